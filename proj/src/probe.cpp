#include "hbmrd/probe.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace hbmrd {

namespace {
constexpr double kReadMarginNs = 1.0e6;  // 1 ms past the target retention time
}

ProbeSurface::ProbeSurface(Factory factory, Address bank_scope)
    : factory_(std::move(factory)), scope_(bank_scope) {
  reset();
}

void ProbeSurface::reset() {
  dev_ = factory_();
  refs_issued_ = 0;
}

uint32_t ProbeSurface::rows_per_bank() const { return dev_->config().geometry.rows_per_bank; }
uint32_t ProbeSurface::row_bits() const { return dev_->config().geometry.row_size_bits; }
const TimingParams& ProbeSurface::timing() const { return dev_->config().timing; }
double ProbeSurface::now() const { return dev_->now(); }
void ProbeSurface::advance(double dt_ns) { dev_->advance(dt_ns); }
void ProbeSurface::advance_to(double t_ns) { dev_->advance_to(t_ns); }

void ProbeSurface::write(uint32_t row, uint8_t fill) {
  Address a = scope_;
  a.row = row;
  dev_->write_row(a, fill);
}

std::vector<uint64_t> ProbeSurface::read(uint32_t row) const {
  Address a = scope_;
  a.row = row;
  return dev_->read_row(a);
}

uint64_t ProbeSurface::flips(uint32_t row, uint8_t expected_fill) const {
  Address a = scope_;
  a.row = row;
  return dev_->count_flips(a, expected_fill);
}

void ProbeSurface::act_once(uint32_t row, double t_on_ns) {
  const TimingParams& t = dev_->config().timing;
  if (t_on_ns <= 0.0) t_on_ns = t.tras_ns;
  Address a = scope_;
  a.row = row;
  double t0 = dev_->now();
  dev_->issue(Command::act(a, t0));
  dev_->issue(Command::pre(a, t0 + t_on_ns));
  dev_->advance_to(t0 + std::max(t.trc_ns, t_on_ns + t.trp_ns));
}

void ProbeSurface::activate(uint32_t row, uint64_t count, double t_on_ns) {
  const TimingParams& t = dev_->config().timing;
  if (t_on_ns <= 0.0) t_on_ns = t.tras_ns;
  dev_->hammer_rows(scope_, {{row, count}}, t_on_ns);
}

void ProbeSurface::ref() {
  dev_->issue(Command::ref(scope_.channel, scope_.pseudo_channel, dev_->now()));
  ++refs_issued_;
}

std::vector<uint32_t> RetentionMap::common_t_rows(size_t want, uint32_t min_spacing) const {
  // Bucket rows by retention time, largest bucket first.
  std::map<uint32_t, std::vector<uint32_t>> buckets;
  for (const auto& [row, t] : min_failing_ms) buckets[t].push_back(row);
  std::vector<const std::vector<uint32_t>*> ordered;
  for (const auto& [t, rows] : buckets) ordered.push_back(&rows);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->size() > b->size(); });

  std::vector<uint32_t> best;
  for (const auto* rows : ordered) {
    std::vector<uint32_t> picked;
    int64_t last = -int64_t(min_spacing) - 1;
    for (uint32_t r : *rows) {
      if (int64_t(r) - last >= int64_t(min_spacing)) {
        picked.push_back(r);
        last = r;
      }
      if (picked.size() >= want) break;
    }
    if (picked.size() > best.size()) best = picked;
    if (best.size() >= want) break;
  }
  return best;
}

RetentionMap profile_retention(ProbeSurface& surface, const std::vector<uint32_t>& rows,
                               uint32_t step_ms, uint32_t cap_ms, uint32_t trials, uint8_t fill) {
  RetentionMap map;
  map.step_ms = step_ms;
  map.cap_ms = cap_ms;

  std::vector<uint32_t> remaining = rows;
  for (uint32_t t_ms = step_ms; t_ms <= cap_ms && !remaining.empty(); t_ms += step_ms) {
    std::vector<bool> failed(remaining.size(), false);
    for (uint32_t trial = 0; trial < trials; ++trial) {
      surface.reset();
      for (uint32_t r : remaining) surface.write(r, fill);
      surface.advance(double(t_ms) * 1e6 + 1e3);
      for (size_t i = 0; i < remaining.size(); ++i)
        if (!failed[i] && surface.flips(remaining[i], fill) > 0) failed[i] = true;
    }
    std::vector<uint32_t> next;
    for (size_t i = 0; i < remaining.size(); ++i) {
      if (failed[i]) map.min_failing_ms[remaining[i]] = t_ms;
      else next.push_back(remaining[i]);
    }
    remaining.swap(next);
  }
  map.above_cap = remaining;
  return map;
}

namespace {

struct SideChannelTrial {
  ProbeSurface& surface;
  double trefi;

  // Issues `warmups` REFs spaced tREFI apart ending one tREFI before
  // t_probe_ref, runs `acts` mid-way through the final interval, then
  // the probe REF at t_probe_ref.
  void run(const std::vector<uint32_t>& write_rows, uint8_t fill, double t_probe_ref,
           uint32_t warmups, const std::function<void(double)>& acts) {
    surface.reset();
    for (uint32_t r : write_rows) surface.write(r, fill);
    for (uint32_t i = warmups; i >= 1; --i) {
      surface.advance_to(t_probe_ref - double(i) * trefi);
      surface.ref();
    }
    if (acts) acts(t_probe_ref - 0.5 * trefi);
    surface.advance_to(t_probe_ref);
    surface.ref();
  }
};

uint32_t gcd_all(const std::vector<uint32_t>& v) {
  uint32_t g = 0;
  for (uint32_t x : v) g = std::gcd(g, x);
  return g;
}

}  // namespace

std::optional<uint32_t> infer_trr_period(ProbeSurface& surface, const RetentionMap& map,
                                         uint32_t max_period, uint8_t fill) {
  if (map.min_failing_ms.empty()) return std::nullopt;
  // Quickest usable side-channel row: smallest retention time.
  uint32_t s_row = 0;
  uint32_t s_t = UINT32_MAX;
  for (const auto& [row, t] : map.min_failing_ms) {
    if (t < s_t && row >= 1) {
      s_row = row;
      s_t = t;
    }
  }
  const double t_full = double(s_t) * 1e6;
  const double trefi = surface.timing().trefi_ns;
  SideChannelTrial trial{surface, trefi};

  const uint32_t scan = 3 * max_period + 1;
  std::vector<uint32_t> capable;
  for (uint32_t p = 0; p < scan; ++p) {
    trial.run({s_row}, fill, t_full / 2.0, p, [&](double t_acts) {
      surface.advance_to(t_acts);
      surface.act_once(s_row - 1);
      surface.act_once(s_row - 1);
      surface.act_once(s_row - 1);
      surface.act_once(s_row + 1);
    });
    surface.advance_to(t_full + kReadMarginNs);
    if (surface.flips(s_row, fill) == 0) capable.push_back(p + 1);
  }
  if (capable.empty()) return std::nullopt;
  return gcd_all(capable);
}

std::optional<uint32_t> infer_victim_span(ProbeSurface& surface, const RetentionMap& map,
                                          uint32_t period, uint32_t max_span, uint8_t fill) {
  const double trefi = surface.timing().trefi_ns;
  SideChannelTrial trial{surface, trefi};

  uint32_t span = 0;
  for (uint32_t d = 1; d <= max_span; ++d) {
    // Side-channel row at distance d above the sampled aggressor.
    uint32_t s_row = 0, s_t = 0;
    for (const auto& [row, t] : map.min_failing_ms) {
      if (row >= d + 1) {
        s_row = row;
        s_t = t;
        break;
      }
    }
    if (s_row == 0) break;
    uint32_t agg = s_row - d;
    uint32_t filler = (agg >= 600) ? agg - 512 : agg + 512;

    trial.run({s_row}, fill, double(s_t) * 1e6 / 2.0, 2 * period - 1, [&](double t_acts) {
      surface.advance_to(t_acts);
      surface.act_once(agg);
      surface.act_once(agg);
      surface.act_once(agg);
      surface.act_once(filler);
    });
    surface.advance_to(double(s_t) * 1e6 + kReadMarginNs);
    if (surface.flips(s_row, fill) == 0) span = d;
  }
  if (span == 0) return std::nullopt;
  return span;
}

TrrFindings infer_sampler_rules(ProbeSurface& surface, const RetentionMap& map, uint32_t period,
                                uint32_t span, uint8_t fill) {
  TrrFindings f;
  f.trr_detected = true;
  f.period = period;
  f.victim_span = span;

  const double trefi = surface.timing().trefi_ns;
  SideChannelTrial trial{surface, trefi};
  const uint32_t kMaxCapacity = 8;

  // (a) First-ACT rule and (if present) sampler capacity: activate nine
  // distinct rows once each right after a TRR-capable REF and see whose
  // +1 neighbors get refreshed at the next capable REF.
  std::vector<uint32_t> side = map.common_t_rows(kMaxCapacity + 1, 32);
  if (side.size() < 4) return f;  // not enough side-channel rows to probe rules
  const uint32_t t_common = map.min_failing_ms.at(side[0]);
  const double t_full = double(t_common) * 1e6;

  {
    trial.run(side, fill, t_full / 2.0, 2 * period - 1, [&](double t_acts) {
      // ACTs must fall inside the window opened by REF #period, i.e.
      // anywhere in the warmup tail; mid-final-interval works for every
      // period because the window stays open until the sampler fills.
      surface.advance_to(t_acts);
      for (uint32_t s : side) surface.act_once(s - 1);
    });
    surface.advance_to(t_full + kReadMarginNs);
    std::vector<bool> refreshed;
    for (uint32_t s : side) refreshed.push_back(surface.flips(s, fill) == 0);

    size_t prefix = 0;
    while (prefix < refreshed.size() && refreshed[prefix]) ++prefix;
    bool any_after_prefix = false;
    for (size_t i = prefix; i < refreshed.size(); ++i)
      if (refreshed[i]) any_after_prefix = true;

    f.first_act_rule = prefix > 0;
    if (prefix > 0 && !any_after_prefix && prefix < refreshed.size())
      f.slot_capacity = uint32_t(prefix);
    // prefix == side.size() would mean capacity >= 9: out of probe range
  }

  // (b) Half-count rule and strict-vs-non-strict majority. The sampler
  // is saturated with sacrificial rows first so a first-ACT rule cannot
  // mask the half-count latch.
  auto majority_trial = [&](uint32_t x_acts, uint32_t filler_acts) {
    uint32_t s_row = side[0];
    uint32_t x = s_row - 1;
    trial.run({s_row}, fill, t_full / 2.0, 2 * period - 1, [&](double t_acts) {
      // Sacrificial saturation right after the capable REF #period would
      // be ideal; mid-final-interval is equivalent because latching only
      // happens at REF boundaries and the window stays open.
      surface.advance_to(t_acts);
      for (uint32_t j = 0; j < 9; ++j) surface.act_once(s_row + 3000 + 64 * j);
      for (uint32_t i = 0; i < x_acts; ++i) surface.act_once(x);
      for (uint32_t j = 0; j < filler_acts; ++j) surface.act_once(s_row + 6000 + 64 * j);
    });
    surface.advance_to(t_full + kReadMarginNs);
    return surface.flips(s_row, fill) == 0;
  };
  (void)majority_trial;

  // NOTE: saturation and the majority pattern must sit in different REF
  // intervals; see run_split below.
  auto majority_trial_split = [&](uint32_t x_acts, uint32_t filler_acts) {
    uint32_t s_row = side[0];
    uint32_t x = s_row - 1;
    surface.reset();
    surface.write(s_row, fill);
    double t_probe = t_full / 2.0;
    uint32_t warmups = 2 * period - 1;
    for (uint32_t i = warmups; i >= 1; --i) {
      surface.advance_to(t_probe - double(i) * trefi);
      surface.ref();
      if (i == period) {
        // Right after the capable REF: saturate the sampler.
        for (uint32_t j = 0; j < 9; ++j) surface.act_once(s_row + 3000 + 64 * j);
      }
    }
    surface.advance_to(t_probe - 0.5 * trefi);
    for (uint32_t i = 0; i < x_acts; ++i) surface.act_once(x);
    for (uint32_t j = 0; j < filler_acts; ++j) surface.act_once(s_row + 6000 + 64 * j);
    surface.advance_to(t_probe);
    surface.ref();
    surface.advance_to(t_full + kReadMarginNs);
    return surface.flips(s_row, fill) == 0;
  };

  bool six_of_ten = majority_trial_split(6, 4);
  f.half_count_rule = six_of_ten;
  if (six_of_ten) {
    bool five_of_ten = majority_trial_split(5, 5);
    f.majority = five_of_ten ? MajorityMode::non_strict : MajorityMode::strict;
  }

  // (c) Capacity through the half-count rule when there is no first-ACT
  // latch to count with. One majority row per REF interval; the sampler
  // holds at most min(k, period) of them per window.
  if (f.first_act_rule == false && f.half_count_rule == true && !f.slot_capacity) {
    uint32_t jmax = std::min<uint32_t>(kMaxCapacity + 1, period);
    for (uint32_t j = 1; j <= jmax && j <= side.size(); ++j) {
      std::vector<uint32_t> rows(side.begin(), side.begin() + j);
      surface.reset();
      for (uint32_t r : rows) surface.write(r, fill);
      double t_probe = t_full / 2.0;
      uint32_t warmups = 2 * period - 1;
      for (uint32_t i = warmups; i >= 1; --i) {
        surface.advance_to(t_probe - double(i) * trefi);
        surface.ref();
      }
      // Majority pattern for row X_i in the interval ending at REF
      // #period+i (the last one ends at the capable REF itself).
      for (uint32_t i = 1; i <= j; ++i) {
        double t_interval_end = t_probe - double(period - i) * trefi;
        surface.advance_to(t_interval_end - 0.5 * trefi);
        uint32_t x = rows[i - 1] - 1;
        surface.act_once(x);
        surface.act_once(x);
        surface.act_once(x);
        surface.act_once(rows[i - 1] + 6000 + 64 * i);
      }
      surface.advance_to(t_probe);
      surface.ref();
      surface.advance_to(t_full + kReadMarginNs);
      uint32_t refreshed = 0;
      for (uint32_t r : rows)
        if (surface.flips(r, fill) == 0) ++refreshed;
      if (refreshed < j) {
        f.slot_capacity = refreshed;
        break;
      }
    }
  }
  return f;
}

TrrFindings infer_trr(ProbeSurface& surface) {
  // Retention-profile a region far away from the first segment-refresh
  // slots so warm-up REFs never touch the side-channel rows.
  std::vector<uint32_t> region;
  uint32_t base = 1024;
  uint32_t rows = surface.rows_per_bank();
  for (uint32_t r = base; r < base + 512 && r + 8 < rows; ++r) region.push_back(r);
  RetentionMap map = profile_retention(surface, region);

  TrrFindings f;
  std::optional<uint32_t> period = infer_trr_period(surface, map);
  if (!period) {
    f.trr_detected = false;
    return f;
  }
  std::optional<uint32_t> span = infer_victim_span(surface, map, *period);
  if (!span) {
    f.trr_detected = true;
    f.period = period;
    return f;
  }
  return infer_sampler_rules(surface, map, *period, *span);
}

std::string TrrFindings::report() const {
  std::ostringstream os;
  os << "TRR inference findings\n";
  if (!trr_detected) {
    os << "  no TRR detected\n";
    return os.str();
  }
  auto opt_u32 = [](const std::optional<uint32_t>& v) {
    return v ? std::to_string(*v) : std::string("undetermined");
  };
  auto opt_bool = [](const std::optional<bool>& v) {
    return v ? (*v ? std::string("on") : std::string("off")) : std::string("undetermined");
  };
  os << "  trr-capable REF period : " << opt_u32(period) << "\n";
  os << "  victim span            : " << opt_u32(victim_span) << "\n";
  os << "  first-act rule         : " << opt_bool(first_act_rule) << "\n";
  os << "  half-count rule        : " << opt_bool(half_count_rule) << "\n";
  os << "  sampler capacity       : " << opt_u32(slot_capacity) << "\n";
  os << "  majority threshold     : "
     << (majority == MajorityMode::strict
             ? "strict"
             : (majority == MajorityMode::non_strict ? "non-strict" : "undetermined"))
     << "\n";
  return os.str();
}

std::string TrrFindings::csv() const {
  std::ostringstream os;
  os << "parameter,value,confidence\n";
  auto line = [&](const char* name, const std::string& value, bool known) {
    os << name << "," << value << "," << (known ? "1.0" : "0.0") << "\n";
  };
  line("trr_detected", trr_detected ? "1" : "0", true);
  line("period", period ? std::to_string(*period) : "undetermined", period.has_value());
  line("victim_span", victim_span ? std::to_string(*victim_span) : "undetermined",
       victim_span.has_value());
  line("first_act_rule",
       first_act_rule ? (*first_act_rule ? "on" : "off") : "undetermined",
       first_act_rule.has_value());
  line("half_count_rule",
       half_count_rule ? (*half_count_rule ? "on" : "off") : "undetermined",
       half_count_rule.has_value());
  line("slot_capacity", slot_capacity ? std::to_string(*slot_capacity) : "undetermined",
       slot_capacity.has_value());
  line("majority_strict",
       majority == MajorityMode::strict
           ? "strict"
           : (majority == MajorityMode::non_strict ? "non_strict" : "undetermined"),
       majority != MajorityMode::undetermined);
  return os.str();
}

AdjacencyTable reverse_map(ProbeSurface& surface, const std::vector<uint32_t>& rows,
                           uint64_t hammer_budget, uint32_t window) {
  AdjacencyTable table;
  const uint32_t bank_rows = surface.rows_per_bank();
  for (uint32_t target : rows) {
    surface.reset();
    uint32_t lo = target >= window ? target - window : 0;
    uint32_t hi = std::min(bank_rows - 1, target + window);
    for (uint32_t r = lo; r <= hi; ++r) surface.write(r, r == target ? 0xAA : 0x55);
    surface.activate(target, hammer_budget);
    std::vector<uint32_t> neighbors;
    for (uint32_t r = lo; r <= hi; ++r) {
      if (r == target) continue;
      if (surface.flips(r, 0x55) > 0) neighbors.push_back(r);
    }
    if (neighbors.empty()) table.unresolved.push_back(target);
    else table.neighbors[target] = std::move(neighbors);
  }
  return table;
}

std::vector<uint32_t> find_subarray_bounds(ProbeSurface& surface, uint32_t first_row,
                                           uint32_t last_row, uint64_t hammer_budget) {
  std::vector<uint32_t> bounds;
  const uint32_t bank_rows = surface.rows_per_bank();
  for (uint32_t target = first_row; target <= last_row && target < bank_rows; ++target) {
    surface.reset();
    uint32_t lo = target >= 1 ? target - 1 : 0;
    uint32_t hi = std::min(bank_rows - 1, target + 1);
    for (uint32_t r = lo; r <= hi; ++r) surface.write(r, r == target ? 0xAA : 0x55);
    surface.activate(target, hammer_budget);
    bool below = target >= 1 && surface.flips(target - 1, 0x55) > 0;
    bool above = target + 1 < bank_rows && surface.flips(target + 1, 0x55) > 0;
    if (below != above) bounds.push_back(target);
  }
  return bounds;
}

}  // namespace hbmrd
