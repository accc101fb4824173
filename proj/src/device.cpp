#include "hbmrd/device.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hbmrd/rng.hpp"

namespace hbmrd {

void DeviceConfig::validate() const {
  geometry.validate();
  mapping.validate(geometry.rows_per_bank);
  layout.validate(geometry.rows_per_bank);
  timing.validate();
  profile.validate();
  trr.validate();
}

DeviceConfig DeviceConfig::miniature(uint32_t rows, uint32_t row_bits) {
  DeviceConfig cfg;
  cfg.geometry.channels = 1;
  cfg.geometry.pseudo_channels_per_channel = 1;
  cfg.geometry.banks_per_pseudo_channel = 1;
  cfg.geometry.rows_per_bank = rows;
  cfg.geometry.row_size_bits = row_bits;
  cfg.layout = SubarrayLayout::single(rows);
  return cfg;
}

Device::Device(DeviceConfig cfg)
    : Device(cfg, std::make_shared<FaultModel>(cfg.geometry, cfg.layout, cfg.profile, cfg.seed)) {}

Device::Device(DeviceConfig cfg, std::shared_ptr<const FaultModel> model)
    : cfg_(std::move(cfg)), model_(std::move(model)),
      checker_(cfg_.geometry, cfg_.timing) {
  cfg_.validate();
  banks_.resize(cfg_.geometry.banks_total());
  pchs_.resize(size_t(cfg_.geometry.channels) * cfg_.geometry.pseudo_channels_per_channel);
}

void Device::advance_to(double t_ns) { now_ = std::max(now_, t_ns); }

uint64_t Device::row_state_key(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t phys) const {
  const Geometry& g = cfg_.geometry;
  return ((uint64_t(ch) * g.pseudo_channels_per_channel + pch) * g.banks_per_pseudo_channel +
          bank) *
             g.rows_per_bank +
         phys;
}

Device::BankState& Device::bank_state(const Address& a) {
  return banks_[bank_index(cfg_.geometry, a)];
}

Device::PchState& Device::pch_state(uint32_t ch, uint32_t pch) {
  return pchs_[size_t(ch) * cfg_.geometry.pseudo_channels_per_channel + pch];
}

void Device::row_refresh_history(uint32_t ch, uint32_t pch, uint32_t phys, double* last_refresh,
                                 double* max_committed_gap) const {
  const PchState& ps = pchs_[size_t(ch) * cfg_.geometry.pseudo_channels_per_channel + pch];
  const uint32_t rows = cfg_.geometry.rows_per_bank;
  const uint32_t rpr = cfg_.timing.rows_per_ref(rows);
  double last = 0.0;   // freshly refreshed at t=0
  double max_gap = 0.0;
  for (size_t i = 0; i < ps.ref_times.size(); ++i) {
    uint32_t start = uint32_t((uint64_t(i) * rpr) % rows);
    uint32_t delta = (phys + rows - start) % rows;
    if (delta < rpr) {
      max_gap = std::max(max_gap, ps.ref_times[i] - last);
      last = ps.ref_times[i];
    }
  }
  *last_refresh = last;
  *max_committed_gap = max_gap;
}

Device::RowState& Device::touch_row(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t phys) {
  uint64_t key = row_state_key(ch, pch, bank, phys);
  auto it = rows_.find(key);
  if (it != rows_.end()) return it->second;

  RowState st;
  const uint32_t words = cfg_.geometry.row_size_bits / 64;
  st.bits.assign(words, 0);  // unwritten rows hold zeros
  double max_gap = 0.0;
  row_refresh_history(ch, pch, phys, &st.last_restore_ns, &max_gap);
  // Retention flips locked in by past segment refreshes. On a zero fill
  // only anti cells can flip (0 -> 1).
  const RowFaults& rf = model_->row(ch, pch, bank, phys);
  const double step_ns = cfg_.profile.retention_step_ms * 1e6;
  if (max_gap >= rf.min_retention_steps * step_ns) {
    for (uint32_t bit = 0; bit < cfg_.geometry.row_size_bits; ++bit) {
      if (!rf.true_cell[bit] && rf.retention_steps[bit] * step_ns <= max_gap)
        st.bits[bit >> 6] |= (uint64_t(1) << (bit & 63));
    }
  }
  return rows_.emplace(key, std::move(st)).first->second;
}

const Device::RowState* Device::find_row(uint32_t ch, uint32_t pch, uint32_t bank,
                                         uint32_t phys) const {
  auto it = rows_.find(row_state_key(ch, pch, bank, phys));
  return it == rows_.end() ? nullptr : &it->second;
}

void Device::pending_flips(const RowFaults& rf, const std::vector<uint64_t>& stored,
                           double exposure, bool exposure_possible, double gap_ns, double jitter,
                           std::vector<uint64_t>& mask) const {
  const FaultProfile& p = cfg_.profile;
  const uint32_t bits = cfg_.geometry.row_size_bits;
  const double step_ns = p.retention_step_ms * 1e6;
  const double c_ck = p.coupling_checkered;
  const double c_rs = p.coupling_rowstripe;
  const double c_mix = 0.5 * (c_ck + c_rs);
  const bool retention_possible = gap_ns >= rf.min_retention_steps * step_ns;
  if (!retention_possible && !exposure_possible) return;

  for (uint32_t bit = 0; bit < bits; ++bit) {
    bool stored_bit = (stored[bit >> 6] >> (bit & 63)) & 1;
    // true cells discharge from 1, anti cells from 0
    if (stored_bit != bool(rf.true_cell[bit])) continue;

    bool flip = false;
    if (retention_possible && rf.retention_steps[bit] * step_ns <= gap_ns) {
      flip = true;
    } else if (exposure_possible) {
      bool same_l = bit == 0 || (((stored[(bit - 1) >> 6] >> ((bit - 1) & 63)) & 1) == stored_bit);
      bool same_r =
          bit + 1 >= bits || (((stored[(bit + 1) >> 6] >> ((bit + 1) & 63)) & 1) == stored_bit);
      double c = same_l ? (same_r ? c_rs : c_mix) : (same_r ? c_mix : c_ck);
      flip = exposure * c >= double(rf.threshold[bit]) * jitter;
    }
    if (flip) mask[bit >> 6] |= (uint64_t(1) << (bit & 63));
  }
}

std::vector<uint64_t> Device::materialize(uint32_t ch, uint32_t pch, uint32_t bank,
                                          uint32_t phys) const {
  const Geometry& g = cfg_.geometry;
  const RowFaults& rf = model_->row(ch, pch, bank, phys);
  const double step_ns = cfg_.profile.retention_step_ms * 1e6;
  const double jitter = model_->trial_jitter(ch, pch, bank, phys, trial_nonce_);
  const double max_c = std::max(cfg_.profile.coupling_checkered, cfg_.profile.coupling_rowstripe);

  std::vector<uint64_t> stored;
  double exposure = 0.0;
  double gap_ns = 0.0;

  if (const RowState* st = find_row(ch, pch, bank, phys)) {
    stored = st->bits;
    for (const auto& [value, count] : st->terms) exposure += value * double(count);
    gap_ns = now_ - st->last_restore_ns;
  } else {
    stored.assign(g.row_size_bits / 64, 0);
    double last = 0.0, max_gap = 0.0;
    row_refresh_history(ch, pch, phys, &last, &max_gap);
    if (max_gap >= rf.min_retention_steps * step_ns) {
      for (uint32_t bit = 0; bit < g.row_size_bits; ++bit)
        if (!rf.true_cell[bit] && rf.retention_steps[bit] * step_ns <= max_gap)
          stored[bit >> 6] |= (uint64_t(1) << (bit & 63));
    }
    gap_ns = now_ - last;
  }

  bool exposure_possible =
      exposure > 0.0 && exposure * max_c >= double(rf.min_threshold) * jitter;
  std::vector<uint64_t> mask(stored.size(), 0);
  pending_flips(rf, stored, exposure, exposure_possible, gap_ns, jitter, mask);
  for (size_t w = 0; w < stored.size(); ++w) stored[w] ^= mask[w];
  return stored;
}

std::vector<uint64_t> Device::read_row(const Address& logical) const {
  check_address(cfg_.geometry, logical);
  uint32_t phys = cfg_.mapping.to_physical(logical.row);
  return materialize(logical.channel, logical.pseudo_channel, logical.bank, phys);
}

std::vector<uint64_t> Device::flip_mask(const Address& logical, uint8_t expected_fill) const {
  std::vector<uint64_t> bits = read_row(logical);
  uint64_t expected = 0x0101010101010101ULL * expected_fill;
  for (uint64_t& w : bits) w ^= expected;
  return bits;
}

uint64_t Device::count_flips(const Address& logical, uint8_t expected_fill) const {
  std::vector<uint64_t> mask = flip_mask(logical, expected_fill);
  uint64_t n = 0;
  for (uint64_t w : mask) n += uint64_t(__builtin_popcountll(w));
  return n;
}

void Device::write_row(const Address& logical, uint8_t fill) {
  check_address(cfg_.geometry, logical);
  uint32_t phys = cfg_.mapping.to_physical(logical.row);
  RowState& st = touch_row(logical.channel, logical.pseudo_channel, logical.bank, phys);
  st.bits.assign(cfg_.geometry.row_size_bits / 64, 0x0101010101010101ULL * fill);
  st.last_restore_ns = now_;
  st.terms.clear();
}

void Device::commit_refresh(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t phys) {
  auto it = rows_.find(row_state_key(ch, pch, bank, phys));
  if (it == rows_.end()) return;  // untouched rows are reconstructed lazily
  RowState& st = it->second;

  const RowFaults& rf = model_->row(ch, pch, bank, phys);
  const double step_ns = cfg_.profile.retention_step_ms * 1e6;
  const double jitter = model_->trial_jitter(ch, pch, bank, phys, trial_nonce_);
  const double max_c = std::max(cfg_.profile.coupling_checkered, cfg_.profile.coupling_rowstripe);

  double exposure = 0.0;
  for (const auto& [value, count] : st.terms) exposure += value * double(count);
  double gap_ns = now_ - st.last_restore_ns;

  bool exposure_possible =
      exposure > 0.0 && exposure * max_c >= double(rf.min_threshold) * jitter;
  bool retention_possible = gap_ns >= rf.min_retention_steps * step_ns;
  if (exposure_possible || retention_possible) {
    // Refresh restores whatever charge state the cells are in: pending
    // flips become part of the stored data.
    std::vector<uint64_t> mask(st.bits.size(), 0);
    pending_flips(rf, st.bits, exposure, exposure_possible, gap_ns, jitter, mask);
    for (size_t w = 0; w < st.bits.size(); ++w) st.bits[w] ^= mask[w];
  }
  st.last_restore_ns = now_;
  st.terms.clear();
}

std::vector<uint32_t> Device::physical_neighbors(uint32_t phys, uint32_t distance) const {
  const auto loc = cfg_.layout.locate(phys);
  std::vector<uint32_t> out;
  if (loc.offset >= distance) out.push_back(phys - distance);
  if (loc.offset + distance < loc.size) out.push_back(phys + distance);
  return out;
}

void Device::register_activation(const Address& bank_scope, uint32_t aggressor_phys,
                                 double t_on_ns, uint64_t count, EventSink* sink) {
  (void)sink;
  const FaultProfile& p = cfg_.profile;
  double t_eff = std::max(t_on_ns, p.taggon_anchors.front().first);
  double mult = p.taggon_multiplier(t_eff);

  auto add_exposure = [&](uint32_t victim_phys, double weight) {
    RowState& st = touch_row(bank_scope.channel, bank_scope.pseudo_channel, bank_scope.bank,
                             victim_phys);
    double value = weight * mult;
    for (auto& [v, c] : st.terms) {
      if (v == value) {
        c += count;
        return;
      }
    }
    st.terms.emplace_back(value, count);
  };

  for (uint32_t v : physical_neighbors(aggressor_phys, 1)) add_exposure(v, p.blast_weight_d1);
  if (p.blast_weight_d2 > 0.0)
    for (uint32_t v : physical_neighbors(aggressor_phys, 2)) add_exposure(v, p.blast_weight_d2);
}

void Device::execute(const Command& cmd, EventSink* sink) {
  const Address& a = cmd.address;
  now_ = std::max(now_, cmd.issue_time_ns);

  switch (cmd.kind) {
    case CommandKind::ACT: {
      BankState& b = bank_state(a);
      if (b.open_physical_row) {
        // Permissive-mode implicit close; the abandoned row still counts
        // as one activation with its measured on-time.
        double t_on = now_ - b.open_since_ns;
        register_activation(a, *b.open_physical_row, t_on, 1, sink);
        if (sink)
          sink->push_back(IssueEvent{IssueEvent::Kind::row_close, {}, a.channel, a.pseudo_channel,
                                     a.bank, *b.open_physical_row, t_on});
      }
      uint32_t phys = cfg_.mapping.to_physical(a.row);
      b.open_physical_row = phys;
      b.open_since_ns = now_;
      b.last_act_ns = now_;
      trr_on_act(cfg_.trr, b.trr, phys, 1);
      break;
    }
    case CommandKind::PRE: {
      BankState& b = bank_state(a);
      if (b.open_physical_row) {
        double t_on = now_ - b.open_since_ns;
        register_activation(a, *b.open_physical_row, t_on, 1, sink);
        if (sink)
          sink->push_back(IssueEvent{IssueEvent::Kind::row_close, {}, a.channel, a.pseudo_channel,
                                     a.bank, *b.open_physical_row, t_on});
        b.open_physical_row.reset();
      }
      break;
    }
    case CommandKind::WR: {
      Address target = a;
      write_row(target, cfg_.write_byte);
      break;
    }
    case CommandKind::RD:
      break;  // data is returned through read_row
    case CommandKind::REF: {
      PchState& ps = pch_state(a.channel, a.pseudo_channel);
      const uint32_t rows = cfg_.geometry.rows_per_bank;
      const uint32_t rpr = cfg_.timing.rows_per_ref(rows);
      uint32_t start = uint32_t((ps.ref_count * rpr) % rows);
      ps.ref_count += 1;
      ps.ref_times.push_back(now_);

      for (uint32_t bk = 0; bk < cfg_.geometry.banks_per_pseudo_channel; ++bk) {
        for (uint32_t i = 0; i < rpr; ++i) {
          uint32_t r = (start + i) % rows;
          commit_refresh(a.channel, a.pseudo_channel, bk, r);
          if (sink)
            sink->push_back(IssueEvent{IssueEvent::Kind::segment_refresh, {}, a.channel,
                                       a.pseudo_channel, bk, r, 0.0});
        }
      }
      for (uint32_t bk = 0; bk < cfg_.geometry.banks_per_pseudo_channel; ++bk) {
        Address ba = a;
        ba.bank = bk;
        std::vector<int64_t> victims = trr_on_ref(cfg_.trr, bank_state(ba).trr);
        for (int64_t v : victims) {
          if (v < 0 || v >= int64_t(rows)) continue;
          // Victim refreshes are observable through the retention side
          // channel, so reconstruct the row eagerly if needed.
          touch_row(a.channel, a.pseudo_channel, bk, uint32_t(v));
          commit_refresh(a.channel, a.pseudo_channel, bk, uint32_t(v));
          if (sink)
            sink->push_back(IssueEvent{IssueEvent::Kind::trr_victim_refresh, {}, a.channel,
                                       a.pseudo_channel, bk, uint32_t(v), 0.0});
        }
      }
      break;
    }
  }
}

void Device::issue(const Command& cmd, EventSink* sink) {
  check_address(cfg_.geometry, cmd.address);
  std::vector<Violation> violations = checker_.step(cmd, issue_index_++);
  if (!violations.empty()) {
    if (!cfg_.permissive)
      throw TimingError("timing violation (" + violations.front().parameter + "): " +
                        violations.front().detail);
    if (sink)
      for (Violation& v : violations)
        sink->push_back(IssueEvent{IssueEvent::Kind::violation, std::move(v), cmd.address.channel,
                                   cmd.address.pseudo_channel, cmd.address.bank, 0, 0.0});
  }
  execute(cmd, sink);
}

void Device::issue_all(const std::vector<Command>& trace, EventSink* sink) {
  for (const Command& c : trace) issue(c, sink);
}

void Device::hammer_rows(const Address& bank_scope,
                         const std::vector<std::pair<uint32_t, uint64_t>>& logical_rows_counts,
                         double t_on_ns) {
  check_address(cfg_.geometry, bank_scope);
  BankState& b = bank_state(bank_scope);
  if (b.open_physical_row)
    throw CampaignError("hammer_rows: bank has an open row");
  if (t_on_ns + 1e-9 < cfg_.timing.tras_ns)
    throw CampaignError("hammer_rows: t_on below tRAS");

  double slot = std::max(cfg_.timing.trc_ns, t_on_ns + cfg_.timing.trp_ns);
  uint64_t total = 0;
  for (const auto& [row, count] : logical_rows_counts) {
    if (row >= cfg_.geometry.rows_per_bank) throw AddressError("hammer_rows: row out of range");
    uint32_t phys = cfg_.mapping.to_physical(row);
    trr_on_act(cfg_.trr, b.trr, phys, count);
    register_activation(bank_scope, phys, t_on_ns, count, nullptr);
    total += count;
  }
  if (total > 0) {
    now_ += double(total) * slot;
    b.last_act_ns = now_ - slot;
  }
}

std::vector<uint32_t> Device::aggressors_for(const Address& victim_logical) const {
  check_address(cfg_.geometry, victim_logical);
  uint32_t phys = cfg_.mapping.to_physical(victim_logical.row);
  std::vector<uint32_t> out;
  for (uint32_t n : physical_neighbors(phys, 1)) out.push_back(cfg_.mapping.to_logical(n));
  return out;
}

void Device::hammer_double_sided(const Address& victim_logical, uint64_t hc, double t_on_ns) {
  std::vector<std::pair<uint32_t, uint64_t>> rows;
  for (uint32_t a : aggressors_for(victim_logical)) rows.emplace_back(a, hc);
  hammer_rows(victim_logical, rows, t_on_ns);
}

CellFaultState Device::cell_state(const Address& physical, uint32_t bit_index) const {
  check_address(cfg_.geometry, physical);
  if (bit_index >= cfg_.geometry.row_size_bits)
    throw AddressError("cell_state: bit index out of range");
  const RowFaults& rf = model_->row(physical.channel, physical.pseudo_channel, physical.bank,
                                    physical.row);
  CellFaultState cs;
  cs.hc_threshold = rf.threshold[bit_index];
  cs.retention_time_ms = uint32_t(rf.retention_steps[bit_index]) * cfg_.profile.retention_step_ms;
  cs.true_cell = rf.true_cell[bit_index] != 0;

  const RowState* st = find_row(physical.channel, physical.pseudo_channel, physical.bank,
                                physical.row);
  if (st) {
    cs.stored_bit = (st->bits[bit_index >> 6] >> (bit_index & 63)) & 1;
    cs.last_refresh_ns = st->last_restore_ns;
    for (const auto& [value, count] : st->terms) cs.accumulated_exposure += value * double(count);
  } else {
    double last = 0.0, max_gap = 0.0;
    row_refresh_history(physical.channel, physical.pseudo_channel, physical.row, &last, &max_gap);
    cs.last_refresh_ns = last;
    cs.stored_bit = false;
  }
  return cs;
}

}  // namespace hbmrd
