#include "hbmrd/profile.hpp"

#include <algorithm>
#include <cmath>

#include "hbmrd/rng.hpp"

namespace hbmrd {

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }

// Flat physical row key used as the RNG coordinate.
uint64_t row_key(const Geometry& g, uint32_t ch, uint32_t pch, uint32_t bank, uint32_t row) {
  return ((uint64_t(ch) * g.pseudo_channels_per_channel + pch) * g.banks_per_pseudo_channel +
          bank) *
             g.rows_per_bank +
         row;
}

// Ladder cell classes: orientation x bit parity. Classes 0 and 3 carry
// the odd ladder steps, classes 1 and 2 the even steps, so each data
// pattern (which sees exactly two classes) observes the complete
// 12-step ladder HC_n = B * n^beta.
constexpr bool kClassTrueCell[4] = {false, false, true, true};
constexpr uint32_t kClassParity[4] = {1, 0, 0, 1};  // odd, even, even, odd
constexpr uint32_t kLadderPerClass = 6;
constexpr uint32_t kLadderSteps = 2 * kLadderPerClass;

uint32_t ladder_step(uint32_t cls, uint32_t j) {
  bool odd_steps = (cls == 0 || cls == 3);
  return odd_steps ? 2 * j + 1 : 2 * j + 2;
}

double ladder_threshold(double base_b, double beta, uint32_t step) {
  return 2.0 * base_b * std::pow(double(step), beta);
}

// Forced weak cells sit in a band of the reference exposure but never
// below the row's pinned ladder, so they cannot perturb HC1..HC12.
double forced_threshold(const FaultProfile& p, double ladder_top, double u) {
  double band = lerp(p.hot_forced_band_lo, p.hot_forced_band_hi, u) * p.hot_forced_exposure *
                p.coupling_checkered;
  return std::max(band, ladder_top * 1.05);
}

}  // namespace

const DataPattern& DataPattern::rowstripe0() {
  static const DataPattern p{"rowstripe0", 0x00, 0xFF, 0x00};
  return p;
}
const DataPattern& DataPattern::rowstripe1() {
  static const DataPattern p{"rowstripe1", 0xFF, 0x00, 0xFF};
  return p;
}
const DataPattern& DataPattern::checkered0() {
  static const DataPattern p{"checkered0", 0x55, 0xAA, 0x55};
  return p;
}
const DataPattern& DataPattern::checkered1() {
  static const DataPattern p{"checkered1", 0xAA, 0x55, 0xAA};
  return p;
}

const std::array<DataPattern, 4>& DataPattern::all() {
  static const std::array<DataPattern, 4> patterns = {rowstripe0(), rowstripe1(), checkered0(),
                                                      checkered1()};
  return patterns;
}

const DataPattern& DataPattern::by_name(const std::string& name) {
  for (const DataPattern& p : all())
    if (p.name == name) return p;
  throw ConfigError("unknown data pattern: " + name);
}

void FaultProfile::validate() const {
  if (taggon_anchors.empty()) throw ConfigError("profile: taggon_anchors must not be empty");
  for (size_t i = 0; i < taggon_anchors.size(); ++i) {
    if (taggon_anchors[i].second <= 0.0)
      throw ConfigError("profile: taggon multiplier must be positive");
    if (i > 0 && (taggon_anchors[i].first <= taggon_anchors[i - 1].first ||
                  taggon_anchors[i].second <= taggon_anchors[i - 1].second))
      throw ConfigError("profile: taggon_anchors must be strictly increasing in both coordinates");
  }
  if (blast_weight_d1 != 1.0) throw ConfigError("profile: blast weight at distance 1 must be 1");
  if (blast_weight_d2 < 0.0 || blast_weight_d2 >= 1.0)
    throw ConfigError("profile: blast weight at distance 2 must be in [0, 1)");
  if (structured) {
    if (hc_floor < 1.0) throw ConfigError("profile: hc_floor must be >= 1");
    if (beta_min <= 0.0 || beta_max <= beta_min)
      throw ConfigError("profile: beta range must satisfy 0 < beta_min < beta_max");
    if (coupling_checkered <= 0.0 || coupling_rowstripe <= 0.0)
      throw ConfigError("profile: couplings must be positive");
  }
  if (retention_geometric_p < 0.0 || retention_geometric_p >= 1.0)
    throw ConfigError("profile: retention_geometric_p must be in [0, 1)");
  if (retention_step_ms < 1) throw ConfigError("profile: retention step must be positive");
}

double FaultProfile::taggon_multiplier(double t_on_ns) const {
  const auto& a = taggon_anchors;
  if (t_on_ns + 1e-9 < a.front().first)
    throw CampaignError("taggon_multiplier: t_on below tRAS anchor");
  if (t_on_ns <= a.front().first) return a.front().second;
  if (t_on_ns >= a.back().first) return a.back().second;  // flat extrapolation
  for (size_t i = 1; i < a.size(); ++i) {
    if (t_on_ns <= a[i].first) {
      double lx0 = std::log(a[i - 1].first), lx1 = std::log(a[i].first);
      double ly0 = std::log(a[i - 1].second), ly1 = std::log(a[i].second);
      double f = (std::log(t_on_ns) - lx0) / (lx1 - lx0);
      return std::exp(ly0 + f * (ly1 - ly0));
    }
  }
  return a.back().second;
}

FaultProfile FaultProfile::calibrated_default() {
  FaultProfile p;
  p.hc_log_median = std::log(86000.0);
  p.beta_row_coupling = 0.88;
  p.beta_spread_exp = 3.0;
  p.subarray_edge_lift = 0.12;
  p.coupling_rowstripe = 0.965;
  // Bulk population constants frozen from the anchor fit (fit.cpp, seed
  // 1) so the default profile needs no startup calibration.
  p.hot_forced_cells_per_class = 116;
  p.bulk_log_median = 14.505938661998456;
  p.bulk_log_sigma = 0.50547425772063259;
  p.bulk_word_sigma = 0.45;
  p.retention_geometric_p = 1.5267938907291671e-05;
  p.taggon_anchors = {
      {29.0, 1.0},
      {58.0, 1.4948939737048357},
      {87.0, 1.6826708968057562},
      {116.0, 2.1140849508308253},
      {3900.0, 83689.0 / 1519.0},   // 55.09x at tREFI
      {35100.0, 83689.0 / 376.0},   // 222.57x at 9*tREFI
      {16.0e6, 1.0e6},              // single-ACT flips at half a refresh window
  };
  p.channel_scale = {1.0, 1.0, 1.07, 1.07, 0.93, 0.93, 0.86, 0.86};
  return p;
}

FaultProfile FaultProfile::degenerate(double threshold) {
  FaultProfile p;
  p.structured = false;
  p.flat_threshold = threshold;
  p.trial_jitter_scale = 0.0;
  p.retention_geometric_p = 0.0;
  p.coupling_rowstripe = 1.0;
  p.taggon_anchors = calibrated_default().taggon_anchors;
  return p;
}

FaultProfile FaultProfile::zero_disturbance() { return degenerate(1.0e15); }

FaultModel::FaultModel(Geometry g, SubarrayLayout layout, FaultProfile profile, uint64_t seed)
    : geometry_(std::move(g)), layout_(std::move(layout)), profile_(std::move(profile)),
      seed_(seed) {
  geometry_.validate();
  layout_.validate(geometry_.rows_per_bank);
  profile_.validate();
}

RowFaultParams FaultModel::derive_row_params(uint32_t ch, uint32_t pch, uint32_t bank,
                                             uint32_t row) const {
  const FaultProfile& p = profile_;
  RowFaultParams rp;
  if (!p.structured) {
    rp.base_b = p.flat_threshold / 2.0;
    rp.beta = 0.0;
    rp.bulk_trunc = p.flat_threshold;
    return rp;
  }

  const uint64_t key = row_key(geometry_, ch, pch, bank, row);
  const auto loc = layout_.locate(row);
  rp.resilient = layout_.is_resilient(loc.subarray, geometry_.rows_per_bank);

  double chscale = (ch < p.channel_scale.size()) ? p.channel_scale[ch] : 1.0;
  double resilient_factor = rp.resilient ? p.resilient_scale : 1.0;
  // Within a subarray, rows near either edge are harder to disturb.
  double x = (double(loc.offset) + 0.5) / double(loc.size);
  double shape = 1.0 + p.subarray_edge_lift * (1.0 - std::sin(M_PI * x));

  double u_d = rng::u01(rng::hash(seed_, rng::kRowDesignation, key));
  rp.floor_row = !rp.resilient && u_d < p.floor_row_rate;
  rp.hot_row = !rp.resilient && !rp.floor_row && u_d < p.floor_row_rate + p.hot_row_rate;

  // Per-trial jitter halfwidth: most rows stable, a few wide. Floor and
  // hot rows stay stable so the calibrated extremes survive jitter.
  if (rp.floor_row) {
    rp.jitter_halfwidth = 0.003 * p.trial_jitter_scale;
  } else {
    double u_j = rng::u01(rng::hash(seed_, rng::kRowJitterScale, key));
    double v_j = rng::u01(rng::hash(seed_, rng::kRowJitterScale, key, 1));
    double s = (u_j < p.jitter_stable_rate || rp.hot_row)
                   ? lerp(p.jitter_stable_lo, p.jitter_stable_hi, v_j)
                   : lerp(p.jitter_wide_lo, p.jitter_wide_hi, v_j);
    rp.jitter_halfwidth = s * p.trial_jitter_scale;
  }

  double z = rng::normal(rng::hash(seed_, rng::kRowFactor, key));
  if (rp.floor_row) {
    double u_f = rng::u01(rng::hash(seed_, rng::kFloorOffset, key));
    rp.base_b = p.hc_floor * std::exp(-0.004 * u_f);
  } else {
    double b = std::exp(p.hc_log_median + p.hc_log_sigma * z) * chscale * resilient_factor;
    // Keep the floor rows the true lower envelope even after jitter.
    double lo = p.hc_floor * std::exp(rp.jitter_halfwidth + 0.01);
    rp.base_b = std::clamp(b, lo, p.hc_cap);
  }

  if (rp.floor_row) {
    double u_b = rng::u01(rng::hash(seed_, rng::kRowBeta, key, 1));
    rp.beta = p.beta_min + (p.beta_max - p.beta_min) * (0.78 + 0.20 * u_b);
  } else {
    // Rows with large base thresholds get narrow ladders (and vice
    // versa), which is what produces the negative HCfirst vs
    // (HCtenth - HCfirst) correlation.
    double z2 = rng::normal(rng::hash(seed_, rng::kRowBeta, key));
    double rho = p.beta_row_coupling;
    double v = phi(-(rho * z + std::sqrt(1.0 - rho * rho) * z2));
    rp.beta = p.beta_min + (p.beta_max - p.beta_min) * std::pow(v, p.beta_spread_exp);
  }

  double z3 = rng::normal(rng::hash(seed_, rng::kRowBulkScale, key));
  double rowfac = std::max(std::exp(p.bulk_row_sigma * z3), p.bulk_row_floor);
  double hotfac = rp.hot_row ? p.hot_bulk_scale : 1.0;
  rp.bulk_log_offset = std::log(chscale * resilient_factor * shape * rowfac * hotfac);
  rp.bulk_trunc = ladder_threshold(rp.base_b, rp.beta, kLadderSteps) * p.bulk_trunc_margin;

  // Ladder positions: 12 distinct odd and 12 distinct even bit indices,
  // split between the two classes of each parity.
  const uint32_t half = geometry_.row_size_bits / 2;
  auto draw_parity = [&](uint32_t parity, rng::Stream stream) {
    std::vector<uint32_t> taken;
    uint64_t attempt = 0;
    while (taken.size() < 2 * kLadderPerClass && attempt < 4000) {
      uint32_t pos = 2 * uint32_t(rng::hash(seed_, stream, key, parity, attempt) % half) + parity;
      ++attempt;
      if (std::find(taken.begin(), taken.end(), pos) == taken.end()) taken.push_back(pos);
    }
    return taken;
  };
  std::vector<uint32_t> odd = draw_parity(1, rng::kLadderPosition);
  std::vector<uint32_t> even = draw_parity(0, rng::kLadderPosition);
  size_t odd_half = odd.size() / 2, even_half = even.size() / 2;
  rp.ladder_positions[0].assign(odd.begin(), odd.begin() + odd_half);
  rp.ladder_positions[3].assign(odd.begin() + odd_half, odd.end());
  rp.ladder_positions[1].assign(even.begin(), even.begin() + even_half);
  rp.ladder_positions[2].assign(even.begin() + even_half, even.end());

  if (rp.hot_row) {
    // Forced weak cells split over the four classes; every pattern sees
    // two classes, i.e. 2 * hot_forced_cells_per_class flips at the
    // reference hammer count.
    for (uint32_t cls = 0; cls < 4; ++cls) {
      uint32_t parity = kClassParity[cls];
      const auto& ladder_same_parity_a = rp.ladder_positions[parity == 1 ? 0 : 1];
      const auto& ladder_same_parity_b = rp.ladder_positions[parity == 1 ? 3 : 2];
      std::vector<uint32_t>& dst = rp.forced_positions[cls];
      uint64_t attempt = 0;
      uint32_t want = uint32_t(p.hot_forced_cells_per_class);
      uint64_t max_attempts = uint64_t(want) * 40 + 400;
      while (dst.size() < want && attempt < max_attempts) {
        uint32_t pos =
            2 * uint32_t(rng::hash(seed_, rng::kForcedPosition, key, cls, attempt) % half) +
            parity;
        ++attempt;
        bool clash = std::find(dst.begin(), dst.end(), pos) != dst.end() ||
                     std::find(ladder_same_parity_a.begin(), ladder_same_parity_a.end(), pos) !=
                         ladder_same_parity_a.end() ||
                     std::find(ladder_same_parity_b.begin(), ladder_same_parity_b.end(), pos) !=
                         ladder_same_parity_b.end();
        bool clash_other = false;
        for (uint32_t other = 0; other < cls; ++other)
          if (kClassParity[other] == parity &&
              std::find(rp.forced_positions[other].begin(), rp.forced_positions[other].end(),
                        pos) != rp.forced_positions[other].end())
            clash_other = true;
        if (!clash && !clash_other) dst.push_back(pos);
      }
    }
  }
  return rp;
}

RowFaults FaultModel::materialize(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t row) const {
  const FaultProfile& p = profile_;
  const uint64_t key = row_key(geometry_, ch, pch, bank, row);
  const uint32_t bits = geometry_.row_size_bits;

  RowFaults rf;
  rf.params = derive_row_params(ch, pch, bank, row);
  rf.threshold.resize(bits);
  rf.retention_steps.resize(bits);
  rf.true_cell.resize(bits);

  const double log_retention = (p.retention_geometric_p > 0.0)
                                   ? std::log1p(-p.retention_geometric_p)
                                   : 0.0;
  double word_factor = 1.0;
  for (uint32_t bit = 0; bit < bits; ++bit) {
    if (bit % 64 == 0 && p.structured) {
      double zw = rng::normal(rng::hash(seed_, rng::kWordFactor, key, bit / 64));
      word_factor = std::exp(p.bulk_word_sigma * zw);
    }
    uint32_t parity = bit & 1;
    double p_true = parity ? p.orientation_true_odd : p.orientation_true_even;
    rf.true_cell[bit] = rng::u01(rng::hash(seed_, rng::kCellOrientation, key, bit)) < p_true;

    if (p.retention_geometric_p > 0.0) {
      double u = rng::u01(rng::hash(seed_, rng::kCellRetention, key, bit));
      double steps = 1.0 + std::floor(std::log(u) / log_retention);
      rf.retention_steps[bit] = uint16_t(std::min(steps, 65535.0));
    } else {
      rf.retention_steps[bit] = 65535;
    }

    if (p.structured) {
      double zc = rng::normal(rng::hash(seed_, rng::kCellThreshold, key, bit));
      double h = std::exp(p.bulk_log_median + rf.params.bulk_log_offset +
                          p.bulk_log_sigma * zc) *
                 word_factor;
      if (rng::u01(rng::hash(seed_, rng::kCellThreshold, key, bit, 1)) < p.bulk_hard_fraction)
        h *= p.bulk_hard_scale;
      rf.threshold[bit] = float(std::max(h, rf.params.bulk_trunc));
    } else {
      rf.threshold[bit] = float(p.flat_threshold);
    }
  }

  if (p.structured) {
    for (uint32_t cls = 0; cls < 4; ++cls) {
      const auto& ladder = rf.params.ladder_positions[cls];
      for (uint32_t j = 0; j < ladder.size(); ++j) {
        uint32_t pos = ladder[j];
        rf.threshold[pos] =
            float(ladder_threshold(rf.params.base_b, rf.params.beta, ladder_step(cls, j)));
        rf.true_cell[pos] = kClassTrueCell[cls];
      }
      const auto& forced = rf.params.forced_positions[cls];
      double ladder_top = ladder_threshold(rf.params.base_b, rf.params.beta, kLadderSteps);
      for (uint32_t j = 0; j < forced.size(); ++j) {
        uint32_t pos = forced[j];
        double u = rng::u01(rng::hash(seed_, rng::kForcedLevel, key, cls, j));
        rf.threshold[pos] = float(forced_threshold(p, ladder_top, u));
        rf.true_cell[pos] = kClassTrueCell[cls];
      }
    }
  }

  uint32_t min_steps = 65535;
  float min_thr = rf.threshold.empty() ? 0.0f : rf.threshold[0];
  for (uint32_t bit = 0; bit < bits; ++bit) {
    min_steps = std::min<uint32_t>(min_steps, rf.retention_steps[bit]);
    min_thr = std::min(min_thr, rf.threshold[bit]);
  }
  rf.min_retention_steps = min_steps;
  rf.min_threshold = min_thr;
  return rf;
}

const RowFaults& FaultModel::row(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t row) const {
  const uint64_t key = row_key(geometry_, ch, pch, bank, row);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
  }
  auto built = std::make_unique<RowFaults>(materialize(ch, pch, bank, row));
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = cache_.emplace(key, std::move(built));
  return *it->second;
}

double FaultModel::trial_jitter(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t physical_row,
                                uint64_t trial_nonce) const {
  if (profile_.trial_jitter_scale == 0.0 || !profile_.structured) return 1.0;
  const RowFaults& rf = row(ch, pch, bank, physical_row);
  const uint64_t key = row_key(geometry_, ch, pch, bank, physical_row);
  double u = rng::upm1(rng::hash(seed_, rng::kTrialJitter, key, trial_nonce));
  return std::exp(rf.params.jitter_halfwidth * u);
}

CellFaultState cell_params(const Geometry& g, const SubarrayLayout& layout,
                           const FaultProfile& profile, uint64_t seed, const Address& physical,
                           uint32_t bit_index) {
  check_address(g, physical);
  if (bit_index >= g.row_size_bits) throw AddressError("cell_params: bit index out of range");
  FaultModel model(g, layout, profile, seed);
  const RowFaults& rf =
      model.row(physical.channel, physical.pseudo_channel, physical.bank, physical.row);
  CellFaultState cs;
  cs.hc_threshold = rf.threshold[bit_index];
  cs.retention_time_ms = uint32_t(rf.retention_steps[bit_index]) * profile.retention_step_ms;
  cs.true_cell = rf.true_cell[bit_index] != 0;
  cs.stored_bit = false;
  cs.last_refresh_ns = 0.0;
  cs.accumulated_exposure = 0.0;
  return cs;
}

}  // namespace hbmrd
