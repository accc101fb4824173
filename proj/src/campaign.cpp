#include "hbmrd/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "hbmrd/rng.hpp"

namespace hbmrd {

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void parallel_for(uint32_t jobs, size_t n, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  uint32_t count = std::min<uint32_t>(jobs, uint32_t(n));
  pool.reserve(count);
  for (uint32_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

uint32_t pattern_index(const std::string& name) {
  const auto& all = DataPattern::all();
  for (uint32_t i = 0; i < all.size(); ++i)
    if (all[i].name == name) return i;
  throw ConfigError("unknown data pattern: " + name);
}

uint64_t cell_nonce(const CampaignSpec& spec, uint32_t row, uint32_t pattern_idx, uint32_t rep,
                    uint64_t salt) {
  return rng::hash(spec.seed, rng::kCampaignCell, row, pattern_idx, rep, salt);
}

double hammer_slot_ns(const TimingParams& t, double t_on_ns) {
  return std::max(t.trc_ns, t_on_ns + t.trp_ns);
}

}  // namespace

Experiment experiment_from_string(const std::string& s) {
  if (s == "ber") return Experiment::ber;
  if (s == "hcfirst") return Experiment::hcfirst;
  if (s == "hcnth") return Experiment::hcnth;
  if (s == "rowpress_ber" || s == "rowpress") return Experiment::rowpress_ber;
  if (s == "rowpress_hcfirst") return Experiment::rowpress_hcfirst;
  if (s == "bypass") return Experiment::bypass;
  if (s == "ecc_hist") return Experiment::ecc_hist;
  throw ConfigError("unknown experiment: " + s);
}

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::ber: return "ber";
    case Experiment::hcfirst: return "hcfirst";
    case Experiment::hcnth: return "hcnth";
    case Experiment::rowpress_ber: return "rowpress_ber";
    case Experiment::rowpress_hcfirst: return "rowpress_hcfirst";
    case Experiment::bypass: return "bypass";
    case Experiment::ecc_hist: return "ecc_hist";
  }
  return "???";
}

std::vector<uint32_t> RowSelection::materialize(uint32_t rows_per_bank) const {
  std::vector<uint32_t> out;
  switch (kind) {
    case Kind::stride: {
      uint32_t n = std::min(count, rows_per_bank);
      for (uint32_t i = 0; i < n; ++i)
        out.push_back(uint32_t(uint64_t(i) * rows_per_bank / n));
      break;
    }
    case Kind::first: {
      uint32_t n = std::min(count, rows_per_bank);
      for (uint32_t i = 0; i < n; ++i) out.push_back(i);
      break;
    }
    case Kind::blocks: {
      uint32_t b = std::min(count / 3, rows_per_bank / 3);
      for (uint32_t i = 0; i < b; ++i) out.push_back(i);
      uint32_t mid = rows_per_bank / 2 - b / 2;
      for (uint32_t i = 0; i < b; ++i) out.push_back(mid + i);
      for (uint32_t i = 0; i < b; ++i) out.push_back(rows_per_bank - b + i);
      break;
    }
    case Kind::list:
      out = explicit_rows;
      break;
  }
  return out;
}

void CampaignSpec::validate(const Geometry& g) const {
  if (repetitions < 1) throw ConfigError("campaign: repetitions must be >= 1");
  if (hc_resolution < 1) throw ConfigError("campaign: hc resolution must be >= 1");
  if (hcnth_n < 1 || hcnth_n > 10) throw ConfigError("campaign: hcnth_n must be in [1, 10]");
  Address a = bank;
  a.row = 0;
  check_address(g, a);
  for (uint32_t r : rows.materialize(g.rows_per_bank))
    if (r >= g.rows_per_bank) throw ConfigError("campaign: selected row out of range");
  for (const std::string& p : patterns) DataPattern::by_name(p);
}

uint64_t ber_trial(const CampaignContext& ctx, const CampaignSpec& spec, uint32_t row,
                   const DataPattern& pattern, uint64_t hc, double t_on_ns, uint64_t nonce,
                   std::vector<uint64_t>* mask_out) {
  Device dev = ctx.make_device();
  dev.set_trial_nonce(nonce);
  Address victim = spec.bank;
  victim.row = row;

  const Geometry& g = ctx.config.geometry;
  uint32_t phys = dev.to_physical(row);
  // Victim, both aggressors, and the V +/- [2:8] far rows.
  dev.write_row(victim, pattern.victim_byte);
  for (uint32_t a : dev.aggressors_for(victim)) {
    Address addr = spec.bank;
    addr.row = a;
    dev.write_row(addr, pattern.aggressor_byte);
  }
  for (uint32_t d = 2; d <= 8; ++d) {
    for (int sign : {-1, 1}) {
      int64_t p = int64_t(phys) + sign * int64_t(d);
      if (p < 0 || p >= int64_t(g.rows_per_bank)) continue;
      Address addr = spec.bank;
      addr.row = dev.to_logical(uint32_t(p));
      dev.write_row(addr, pattern.far_byte);
    }
  }

  if (hc > 0) dev.hammer_double_sided(victim, hc, t_on_ns);
  if (mask_out) {
    *mask_out = dev.flip_mask(victim, pattern.victim_byte);
    uint64_t n = 0;
    for (uint64_t w : *mask_out) n += uint64_t(__builtin_popcountll(w));
    return n;
  }
  return dev.count_flips(victim, pattern.victim_byte);
}

namespace {

// Retention-only twin of a hammer trial: same rows, same wall time, no
// activations. Returns the flip mask of the victim row.
uint64_t retention_trial(const CampaignContext& ctx, const CampaignSpec& spec, uint32_t row,
                         const DataPattern& pattern, double duration_ns, uint64_t nonce,
                         std::vector<uint64_t>* mask_out) {
  Device dev = ctx.make_device();
  dev.set_trial_nonce(nonce);
  Address victim = spec.bank;
  victim.row = row;
  dev.write_row(victim, pattern.victim_byte);
  dev.advance(duration_ns);
  std::vector<uint64_t> mask = dev.flip_mask(victim, pattern.victim_byte);
  uint64_t n = 0;
  for (uint64_t w : mask) n += uint64_t(__builtin_popcountll(w));
  if (mask_out) *mask_out = std::move(mask);
  return n;
}

}  // namespace

std::optional<uint64_t> find_hc_nth(const CampaignContext& ctx, const CampaignSpec& spec,
                                    uint32_t row, const DataPattern& pattern, double t_on_ns,
                                    uint32_t nth, uint64_t resolution,
                                    std::vector<uint64_t>* raw_out, uint64_t nonce_salt) {
  double t_on = t_on_ns > 0.0 ? t_on_ns : ctx.config.timing.tras_ns;
  std::optional<uint64_t> best;
  for (uint32_t rep = 0; rep < spec.repetitions; ++rep) {
    uint64_t nonce = cell_nonce(spec, row, pattern_index(pattern.name), rep, nonce_salt);
    auto count_at = [&](uint64_t hc) {
      return ber_trial(ctx, spec, row, pattern, hc, t_on, nonce);
    };

    uint64_t lo = 0, hi = 0;
    bool bracketed = false;
    for (uint64_t hc = std::min(spec.hc_start, spec.hc_cap);; hc = std::min(hc * 2, spec.hc_cap)) {
      if (count_at(hc) >= nth) {
        hi = hc;
        bracketed = true;
        break;
      }
      lo = hc;
      if (hc >= spec.hc_cap) break;
    }
    if (!bracketed) continue;  // above cap in this repetition

    while (hi - lo > resolution) {
      uint64_t mid = lo + (hi - lo) / 2;
      if (count_at(mid) >= nth) hi = mid;
      else lo = mid;
    }
    if (raw_out) raw_out->push_back(hi);
    if (!best || hi < *best) best = hi;
  }
  return best;
}

std::optional<uint64_t> find_hcfirst(const CampaignContext& ctx, const CampaignSpec& spec,
                                     uint32_t row, const DataPattern& pattern, double t_on_ns,
                                     std::vector<uint64_t>* raw_out) {
  return find_hc_nth(ctx, spec, row, pattern, t_on_ns, 1, spec.hc_resolution, raw_out);
}

CampaignResult run_ber(const CampaignContext& ctx, const CampaignSpec& spec) {
  const Geometry& g = ctx.config.geometry;
  spec.validate(g);
  std::vector<uint32_t> rows = spec.rows.materialize(g.rows_per_bank);
  double t_on = spec.taggon_ns > 0.0 ? spec.taggon_ns : ctx.config.timing.tras_ns;
  double duration = 2.0 * double(spec.hammer_count) * hammer_slot_ns(ctx.config.timing, t_on);
  bool exceeds_window = duration > ctx.config.timing.trefw_ns();
  if (exceeds_window && !spec.retention_subtract)
    throw CampaignError("run_ber: hammering exceeds tREFW; enable retention subtraction");

  struct Cell {
    BerRecord mean;
    std::vector<BerRecord> raw;
    std::vector<uint64_t> flip_map;
  };
  std::vector<Cell> cells(rows.size() * spec.patterns.size());

  parallel_for(spec.jobs, cells.size(), [&](size_t i) {
    uint32_t row = rows[i / spec.patterns.size()];
    const DataPattern& pat = DataPattern::by_name(spec.patterns[i % spec.patterns.size()]);
    Cell& cell = cells[i];
    double total = 0.0;
    for (uint32_t rep = 0; rep < spec.repetitions; ++rep) {
      uint64_t nonce = cell_nonce(spec, row, pattern_index(pat.name), rep, 0);
      std::vector<uint64_t> mask;
      uint64_t flips = ber_trial(ctx, spec, row, pat, spec.hammer_count, t_on, nonce,
                                 spec.keep_flip_maps || exceeds_window ? &mask : nullptr);
      if (exceeds_window) {
        std::vector<uint64_t> ret_mask;
        retention_trial(ctx, spec, row, pat, duration, nonce, &ret_mask);
        flips = 0;
        for (size_t w = 0; w < mask.size(); ++w) {
          mask[w] &= ~ret_mask[w];
          flips += uint64_t(__builtin_popcountll(mask[w]));
        }
      }
      total += double(flips);
      BerRecord raw{spec.seed, spec.chip_id, spec.bank.channel, spec.bank.pseudo_channel,
                    spec.bank.bank, row, pat.name, spec.hammer_count, t_on,
                    double(flips), double(flips) / g.row_size_bits, rep};
      cell.raw.push_back(raw);
      if (spec.keep_flip_maps && rep == 0) cell.flip_map = mask;
    }
    double mean = total / spec.repetitions;
    cell.mean = BerRecord{spec.seed, spec.chip_id, spec.bank.channel, spec.bank.pseudo_channel,
                          spec.bank.bank, row, pat.name, spec.hammer_count, t_on,
                          mean, mean / g.row_size_bits, 0};
  });

  CampaignResult result;
  for (Cell& c : cells) {
    result.ber.push_back(c.mean);
    for (BerRecord& r : c.raw) result.ber_raw.push_back(r);
    if (spec.keep_flip_maps) result.flip_maps.push_back(std::move(c.flip_map));
  }
  if (spec.keep_flip_maps)
    result.ecc_histogram = word_histogram(result.flip_maps, g.row_size_bits);
  return result;
}

CampaignResult run_hcfirst(const CampaignContext& ctx, const CampaignSpec& spec) {
  const Geometry& g = ctx.config.geometry;
  spec.validate(g);
  std::vector<uint32_t> rows = spec.rows.materialize(g.rows_per_bank);
  double t_on = spec.taggon_ns > 0.0 ? spec.taggon_ns : ctx.config.timing.tras_ns;

  std::vector<HcRecord> records(rows.size() * spec.patterns.size());
  parallel_for(spec.jobs, records.size(), [&](size_t i) {
    uint32_t row = rows[i / spec.patterns.size()];
    const DataPattern& pat = DataPattern::by_name(spec.patterns[i % spec.patterns.size()]);
    HcRecord rec{spec.seed, spec.chip_id, spec.bank.channel, spec.bank.pseudo_channel,
                 spec.bank.bank, row, pat.name, t_on, {}, false};
    rec.hc.fill(-1.0);
    auto found = find_hcfirst(ctx, spec, row, pat, t_on);
    if (found) rec.hc[0] = double(*found);
    else rec.partial = true;
    records[i] = rec;
  });

  CampaignResult result;
  result.hc = std::move(records);
  return result;
}

CampaignResult run_hcnth(const CampaignContext& ctx, const CampaignSpec& spec) {
  const Geometry& g = ctx.config.geometry;
  spec.validate(g);
  std::vector<uint32_t> rows = spec.rows.materialize(g.rows_per_bank);
  double t_on = spec.taggon_ns > 0.0 ? spec.taggon_ns : ctx.config.timing.tras_ns;

  std::vector<HcRecord> records(rows.size() * spec.patterns.size());
  parallel_for(spec.jobs, records.size(), [&](size_t i) {
    uint32_t row = rows[i / spec.patterns.size()];
    const DataPattern& pat = DataPattern::by_name(spec.patterns[i % spec.patterns.size()]);
    HcRecord rec{spec.seed, spec.chip_id, spec.bank.channel, spec.bank.pseudo_channel,
                 spec.bank.bank, row, pat.name, t_on, {}, false};
    rec.hc.fill(-1.0);
    for (uint32_t n = 1; n <= spec.hcnth_n; ++n) {
      auto found = find_hc_nth(ctx, spec, row, pat, t_on, n, spec.hc_resolution);
      if (!found) {
        rec.partial = true;
        break;
      }
      rec.hc[n - 1] = double(*found);
    }
    records[i] = rec;
  });

  CampaignResult result;
  result.hc = std::move(records);
  return result;
}

CampaignResult run_rowpress_ber(const CampaignContext& ctx, const CampaignSpec& spec) {
  const Geometry& g = ctx.config.geometry;
  spec.validate(g);
  std::vector<uint32_t> rows = spec.rows.materialize(g.rows_per_bank);
  std::vector<double> taggons = spec.taggon_list_ns;
  if (taggons.empty())
    taggons = {29.0, 58.0, 87.0, 116.0, 3900.0, 35100.0};

  struct Cell {
    std::vector<BerRecord> mean;      // one per taggon
    std::vector<BerRecord> raw;       // per (taggon, rep): disturbance BER
    std::vector<BerRecord> retention; // per taggon: retention-pass BER (rep 0)
  };
  std::vector<Cell> cells(rows.size());

  parallel_for(spec.jobs, cells.size(), [&](size_t i) {
    uint32_t row = rows[i];
    const DataPattern& pat = DataPattern::by_name(spec.patterns.front());
    Cell& cell = cells[i];
    for (double t_on : taggons) {
      double duration = 2.0 * double(spec.hammer_count) * hammer_slot_ns(ctx.config.timing, t_on);
      bool exceeds_window = duration > ctx.config.timing.trefw_ns();
      if (exceeds_window && !spec.retention_subtract)
        throw CampaignError("rowpress: tAggON run exceeds tREFW without retention subtraction");
      double total = 0.0;
      double retention_flips_rep0 = 0.0;
      for (uint32_t rep = 0; rep < spec.repetitions; ++rep) {
        uint64_t nonce = cell_nonce(spec, row, 0, rep, 1);
        std::vector<uint64_t> mask;
        uint64_t flips =
            ber_trial(ctx, spec, row, pat, spec.hammer_count, t_on, nonce, &mask);
        if (exceeds_window) {
          std::vector<uint64_t> ret_mask;
          uint64_t ret = retention_trial(ctx, spec, row, pat, duration, nonce, &ret_mask);
          flips = 0;
          for (size_t w = 0; w < mask.size(); ++w) {
            mask[w] &= ~ret_mask[w];
            flips += uint64_t(__builtin_popcountll(mask[w]));
          }
          if (rep == 0) retention_flips_rep0 = double(ret);
        }
        total += double(flips);
        cell.raw.push_back(BerRecord{spec.seed, spec.chip_id, spec.bank.channel,
                                     spec.bank.pseudo_channel, spec.bank.bank, row, pat.name,
                                     spec.hammer_count, t_on, double(flips),
                                     double(flips) / g.row_size_bits, rep});
      }
      double mean = total / spec.repetitions;
      cell.mean.push_back(BerRecord{spec.seed, spec.chip_id, spec.bank.channel,
                                    spec.bank.pseudo_channel, spec.bank.bank, row, pat.name,
                                    spec.hammer_count, t_on, mean, mean / g.row_size_bits, 0});
      cell.retention.push_back(BerRecord{spec.seed, spec.chip_id, spec.bank.channel,
                                         spec.bank.pseudo_channel, spec.bank.bank, row,
                                         "retention", 0, t_on, retention_flips_rep0,
                                         retention_flips_rep0 / g.row_size_bits, 0});
    }
  });

  CampaignResult result;
  for (Cell& c : cells) {
    for (auto& r : c.mean) result.ber.push_back(r);
    for (auto& r : c.raw) result.ber_raw.push_back(r);
    for (auto& r : c.retention) result.ber_raw.push_back(r);
  }
  return result;
}

CampaignResult run_rowpress_hcfirst(const CampaignContext& ctx, const CampaignSpec& spec) {
  const Geometry& g = ctx.config.geometry;
  spec.validate(g);
  std::vector<uint32_t> rows = spec.rows.materialize(g.rows_per_bank);
  std::vector<double> taggons = spec.taggon_list_ns;
  if (taggons.empty()) taggons = {29.0, 3900.0, 35100.0, 16.0e6};

  struct Cell {
    std::vector<HcRecord> recs;
  };
  std::vector<Cell> cells(rows.size());
  parallel_for(spec.jobs, cells.size(), [&](size_t i) {
    uint32_t row = rows[i];
    const DataPattern& pat = DataPattern::by_name(spec.patterns.front());
    for (double t_on : taggons) {
      HcRecord rec{spec.seed, spec.chip_id, spec.bank.channel, spec.bank.pseudo_channel,
                   spec.bank.bank, row, pat.name, t_on, {}, false};
      rec.hc.fill(-1.0);
      // Fine resolution: HCfirst collapses to a few hundred activations
      // at large tAggON, where the default 256-hammer grid is too coarse.
      auto found = find_hc_nth(ctx, spec, row, pat, t_on, 1, 1, nullptr, 1);
      if (found) rec.hc[0] = double(*found);
      else rec.partial = true;
      cells[i].recs.push_back(rec);
    }
  });

  CampaignResult result;
  for (Cell& c : cells)
    for (auto& r : c.recs) result.hc.push_back(r);
  return result;
}

uint64_t compute_act_budget(const TimingParams& t) {
  if (t.trfc_ns >= t.trefi_ns)
    throw ConfigError("act budget: tRFC must be smaller than tREFI");
  return uint64_t(std::floor((t.trefi_ns - t.trfc_ns) / t.trc_ns));
}

std::vector<Command> synthesize_bypass(const TimingParams& timing, const Address& bank,
                                       uint32_t victim_row,
                                       const std::vector<uint32_t>& aggressor_rows,
                                       const std::vector<uint32_t>& dummy_rows, uint64_t agg_hc,
                                       uint64_t budget, uint64_t intervals) {
  (void)victim_row;
  const uint64_t dummies = dummy_rows.size();
  if (2 * agg_hc + dummies > budget)
    throw CampaignError("synthesize_bypass: infeasible budget split");
  uint64_t dummy_acts = dummies > 0 ? (budget - 2 * agg_hc) / dummies : 0;
  uint64_t acts_per_interval = dummies * dummy_acts + agg_hc * aggressor_rows.size();
  if (acts_per_interval > budget)
    throw CampaignError("synthesize_bypass: activation budget exceeded");

  std::vector<Command> trace;
  trace.reserve(intervals * (2 * acts_per_interval + 1));
  for (uint64_t i = 0; i < intervals; ++i) {
    double base = double(i) * timing.trefi_ns;
    double t = base + timing.trfc_ns;
    auto act_pre = [&](uint32_t row) {
      Address a = bank;
      a.row = row;
      trace.push_back(Command::act(a, t));
      trace.push_back(Command::pre(a, t + timing.tras_ns));
      t += timing.trc_ns;
    };
    // Dummy rows first so the sampler's first-ACT window fills with them.
    for (uint32_t d : dummy_rows)
      for (uint64_t k = 0; k < dummy_acts; ++k) act_pre(d);
    // Alternating double-sided aggressor activations.
    for (uint64_t k = 0; k < agg_hc; ++k)
      for (uint32_t a : aggressor_rows) act_pre(a);
    trace.push_back(Command::ref(bank.channel, bank.pseudo_channel, base + timing.trefi_ns));
  }
  return trace;
}

CampaignResult run_bypass_campaign(const CampaignContext& ctx, const CampaignSpec& spec) {
  const Geometry& g = ctx.config.geometry;
  spec.validate(g);
  if (!ctx.config.trr.enabled)
    throw CampaignError("bypass campaign requires the hidden TRR mechanism enabled");
  std::vector<uint32_t> rows = spec.rows.materialize(g.rows_per_bank);
  const uint64_t budget = compute_act_budget(ctx.config.timing);
  const uint64_t intervals = 2 * ctx.config.timing.refs_per_window();
  const DataPattern& pat = DataPattern::by_name(spec.patterns.front());

  struct Cell {
    uint32_t dummies;
    uint64_t agg_hc;
    uint32_t row;
  };
  std::vector<Cell> grid;
  for (uint32_t d : spec.bypass_dummies)
    for (uint64_t a : spec.bypass_agg_hc)
      for (uint32_t r : rows) grid.push_back(Cell{d, a, r});

  std::vector<BypassRecord> records(grid.size());
  parallel_for(spec.jobs, grid.size(), [&](size_t i) {
    const Cell& cell = grid[i];
    double total = 0.0;
    for (uint32_t rep = 0; rep < spec.repetitions; ++rep) {
      Device dev = ctx.make_device();
      dev.set_trial_nonce(rng::hash(spec.seed, rng::kCampaignCell, cell.row, rep, 2));

      Address victim = spec.bank;
      victim.row = cell.row;
      std::vector<uint32_t> aggs = dev.aggressors_for(victim);
      uint32_t phys = dev.to_physical(cell.row);
      // Dummies sit at least 16 rows away so their own victims never
      // contaminate the measured row.
      std::vector<uint32_t> dummies;
      for (uint32_t j = 0; j < cell.dummies; ++j) {
        uint32_t dphys = phys + 16 + 2 * j;
        if (dphys >= g.rows_per_bank) dphys = phys - 16 - 2 * j;
        dummies.push_back(dev.to_logical(dphys));
      }

      dev.write_row(victim, pat.victim_byte);
      for (uint32_t a : aggs) {
        Address addr = spec.bank;
        addr.row = a;
        dev.write_row(addr, pat.aggressor_byte);
      }
      for (uint32_t d = 2; d <= 8; ++d) {
        for (int sign : {-1, 1}) {
          int64_t p = int64_t(phys) + sign * int64_t(d);
          if (p < 0 || p >= int64_t(g.rows_per_bank)) continue;
          Address addr = spec.bank;
          addr.row = dev.to_logical(uint32_t(p));
          dev.write_row(addr, pat.far_byte);
        }
      }

      std::vector<Command> trace = synthesize_bypass(ctx.config.timing, spec.bank, cell.row, aggs,
                                                     dummies, cell.agg_hc, budget, intervals);
      dev.issue_all(trace);
      total += double(dev.count_flips(victim, pat.victim_byte));
    }
    double mean = total / spec.repetitions;
    records[i] = BypassRecord{cell.dummies, cell.agg_hc, cell.row, mean / g.row_size_bits};
  });

  CampaignResult result;
  result.bypass = std::move(records);
  return result;
}

CampaignResult run_campaign(const CampaignContext& ctx, const CampaignSpec& spec) {
  switch (spec.experiment) {
    case Experiment::ber: return run_ber(ctx, spec);
    case Experiment::hcfirst: return run_hcfirst(ctx, spec);
    case Experiment::hcnth: return run_hcnth(ctx, spec);
    case Experiment::rowpress_ber: return run_rowpress_ber(ctx, spec);
    case Experiment::rowpress_hcfirst: return run_rowpress_hcfirst(ctx, spec);
    case Experiment::bypass: return run_bypass_campaign(ctx, spec);
    case Experiment::ecc_hist: {
      CampaignSpec s = spec;
      s.keep_flip_maps = true;
      return run_ber(ctx, s);
    }
  }
  throw CampaignError("unhandled experiment");
}

std::map<std::string, uint64_t> word_histogram(const std::vector<std::vector<uint64_t>>& flip_maps,
                                               uint32_t row_bits, uint32_t word_bits) {
  if (word_bits == 0 || row_bits % word_bits != 0)
    throw ConfigError("word_histogram: row bits not divisible by word size");
  std::map<std::string, uint64_t> hist;
  for (const auto& map : flip_maps) {
    for (uint32_t word = 0; word < row_bits / word_bits; ++word) {
      uint32_t flips = 0;
      for (uint32_t b = 0; b < word_bits; ++b) {
        uint32_t bit = word * word_bits + b;
        if ((map[bit >> 6] >> (bit & 63)) & 1) ++flips;
      }
      if (flips == 0) continue;
      std::string bucket = flips > 7 ? ">7" : std::to_string(flips);
      ++hist[bucket];
    }
  }
  return hist;
}

std::string wcdp_select(const std::map<std::string, PatternStats>& per_pattern) {
  const auto& order = DataPattern::all();
  std::string best;
  double best_hc = 0.0;
  double best_ber = 0.0;
  for (const DataPattern& p : order) {
    auto it = per_pattern.find(p.name);
    if (it == per_pattern.end())
      throw CampaignError("wcdp_select: missing data for pattern " + p.name);
    double hc = it->second.hcfirst ? double(*it->second.hcfirst)
                                   : std::numeric_limits<double>::infinity();
    if (best.empty() || hc < best_hc || (hc == best_hc && it->second.ber > best_ber)) {
      best = p.name;
      best_hc = hc;
      best_ber = it->second.ber;
    }
  }
  return best;
}

std::string CampaignResult::ber_csv() const {
  std::ostringstream os;
  os << "seed,chip,channel,pch,bank,row,pattern,hc,taggon_ns,bitflips,ber\n";
  for (const BerRecord& r : ber)
    os << r.seed << "," << r.chip << "," << r.channel << "," << r.pch << "," << r.bank << ","
       << r.row << "," << r.pattern << "," << r.hc << "," << g9(r.taggon_ns) << ","
       << g9(r.bitflips) << "," << g9(r.ber) << "\n";
  return os.str();
}

std::string CampaignResult::ber_raw_csv() const {
  std::ostringstream os;
  os << "seed,chip,channel,pch,bank,row,pattern,hc,taggon_ns,repetition,bitflips,ber\n";
  for (const BerRecord& r : ber_raw)
    os << r.seed << "," << r.chip << "," << r.channel << "," << r.pch << "," << r.bank << ","
       << r.row << "," << r.pattern << "," << r.hc << "," << g9(r.taggon_ns) << ","
       << r.repetition << "," << g9(r.bitflips) << "," << g9(r.ber) << "\n";
  return os.str();
}

std::string CampaignResult::hc_csv() const {
  std::ostringstream os;
  os << "seed,chip,channel,pch,bank,row,pattern,taggon_ns";
  for (int n = 1; n <= 10; ++n) os << ",hc" << n;
  os << "\n";
  for (const HcRecord& r : hc) {
    os << r.seed << "," << r.chip << "," << r.channel << "," << r.pch << "," << r.bank << ","
       << r.row << "," << r.pattern << "," << g9(r.taggon_ns);
    for (int n = 0; n < 10; ++n) os << "," << g9(r.hc[n]);
    os << "\n";
  }
  return os.str();
}

std::string CampaignResult::bypass_csv() const {
  std::ostringstream os;
  os << "dummies,agg_hc,row,ber\n";
  for (const BypassRecord& r : bypass)
    os << r.dummies << "," << r.agg_hc << "," << r.row << "," << g9(r.ber) << "\n";
  return os.str();
}

std::string CampaignResult::ecc_csv() const {
  std::ostringstream os;
  os << "bucket,count\n";
  for (const auto& [bucket, count] : ecc_histogram) os << bucket << "," << count << "\n";
  return os.str();
}

}  // namespace hbmrd
