#include <doctest.h>

#include <cmath>
#include <map>

#include "hbmrd/device.hpp"
#include "hbmrd/rng.hpp"

using namespace hbmrd;

TEST_CASE("taggon multiplier anchors") {
  FaultProfile p = FaultProfile::calibrated_default();
  CHECK(p.taggon_multiplier(29.0) == doctest::Approx(1.0));
  // paper-derived anchors: mean HCfirst 83689 at tRAS over 376 at 9*tREFI
  CHECK(p.taggon_multiplier(35100.0) == doctest::Approx(83689.0 / 376.0));
  CHECK(p.taggon_multiplier(35100.0) == doctest::Approx(222.577).epsilon(1e-4));
  // and over 1519 at tREFI
  CHECK(p.taggon_multiplier(3900.0) == doctest::Approx(83689.0 / 1519.0));
  CHECK(p.taggon_multiplier(3900.0) == doctest::Approx(55.0947).epsilon(1e-4));
  // log-log interpolation is monotone between anchors
  double prev = 0.0;
  for (double t = 29.0; t < 1e7; t *= 1.7) {
    double m = p.taggon_multiplier(t);
    CHECK(m >= prev);
    prev = m;
  }
  // flat extrapolation beyond the last anchor
  CHECK(p.taggon_multiplier(1e9) == doctest::Approx(1e6));
  CHECK_THROWS_AS(p.taggon_multiplier(5.0), CampaignError);
}

TEST_CASE("single activation gives unit exposure to both neighbors") {
  DeviceConfig cfg = DeviceConfig::miniature(16);
  cfg.profile = FaultProfile::degenerate(1000.0);
  Device dev(cfg);
  Address agg{0, 0, 0, 5, 0};
  dev.issue(Command::act(agg, 0.0));
  dev.issue(Command::pre(agg, 29.0));
  Address v4{0, 0, 0, 4, 0}, v6{0, 0, 0, 6, 0};
  CHECK(dev.cell_state(v4, 0).accumulated_exposure == doctest::Approx(1.0));
  CHECK(dev.cell_state(v6, 0).accumulated_exposure == doctest::Approx(1.0));
  CHECK(dev.cell_state(agg, 0).accumulated_exposure == doctest::Approx(0.0));
}

TEST_CASE("double-sided HC=10 yields victim exposure 20") {
  // a hammer count of 10 activates each aggressor 10 times: 20 activations
  DeviceConfig cfg = DeviceConfig::miniature(16);
  cfg.profile = FaultProfile::degenerate(1e9);
  Device dev(cfg);
  Address victim{0, 0, 0, 8, 0};
  dev.hammer_double_sided(victim, 10, cfg.timing.tras_ns);
  CHECK(dev.cell_state(victim, 3).accumulated_exposure == doctest::Approx(20.0));
}

TEST_CASE("bulk hammer equals command-by-command replay exactly") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    DeviceConfig cfg = DeviceConfig::miniature(32);
    cfg.seed = seed;
    cfg.profile = FaultProfile::calibrated_default();
    cfg.profile.hc_floor = 50.0;  // small thresholds so flips happen quickly
    cfg.profile.hc_log_median = std::log(200.0);
    cfg.profile.hc_cap = 2000.0;

    Device bulk(cfg);
    Device replay(cfg);
    Address victim{0, 0, 0, 10, 0};
    for (Device* d : {&bulk, &replay}) {
      d->set_trial_nonce(7);
      d->write_row(victim, 0x55);
      Address a1{0, 0, 0, 9, 0}, a2{0, 0, 0, 11, 0};
      d->write_row(a1, 0xAA);
      d->write_row(a2, 0xAA);
    }
    bulk.hammer_double_sided(victim, 100, cfg.timing.tras_ns);

    double t = 0.0;
    double slot = std::max(cfg.timing.trc_ns, cfg.timing.tras_ns + cfg.timing.trp_ns);
    for (int k = 0; k < 100; ++k) {
      for (uint32_t row : {9u, 11u}) {
        Address a{0, 0, 0, row, 0};
        replay.issue(Command::act(a, t));
        replay.issue(Command::pre(a, t + cfg.timing.tras_ns));
        t += slot;
      }
    }
    replay.advance_to(bulk.now());
    CHECK(bulk.read_row(victim) == replay.read_row(victim));
    CHECK(bulk.cell_state(victim, 0).accumulated_exposure ==
          replay.cell_state(victim, 0).accumulated_exposure);
  }
}

TEST_CASE("fresh row with zero exposure reads back exactly") {
  DeviceConfig cfg;
  cfg.seed = 77;
  Device dev(cfg);
  Address a{0, 0, 0, 100, 0};
  dev.write_row(a, 0x55);
  CHECK(dev.count_flips(a, 0x55) == 0);
}

TEST_CASE("one 16 ms activation flips the weakest cells of any row") {
  DeviceConfig cfg;
  cfg.seed = 3;
  Device dev(cfg);
  Address victim{0, 0, 0, 200, 0};
  dev.write_row(victim, 0x55);
  for (uint32_t agg : dev.aggressors_for(victim)) {
    Address a = victim;
    a.row = agg;
    dev.write_row(a, 0xAA);
  }
  dev.hammer_double_sided(victim, 1, 16.0e6);
  CHECK(dev.count_flips(victim, 0x55) > 0);
}

TEST_CASE("BER is nondecreasing in hammer count and tAggON per row") {
  DeviceConfig cfg;
  cfg.seed = 21;
  CampaignContext ctx(cfg);
  CampaignSpec spec;
  spec.seed = 21;
  uint64_t prev = 0;
  for (uint64_t hc : {50000ull, 100000ull, 200000ull, 400000ull}) {
    uint64_t flips = ber_trial(ctx, spec, 300, DataPattern::checkered0(), hc, 29.0, 5);
    CHECK(flips >= prev);
    prev = flips;
  }
  prev = 0;
  for (double t_on : {29.0, 58.0, 87.0, 116.0, 3900.0}) {
    uint64_t flips = ber_trial(ctx, spec, 300, DataPattern::checkered0(), 10000, t_on, 5);
    CHECK(flips >= prev);
    prev = flips;
  }
}

TEST_CASE("double-sided dominance: exposure sums over the two sides") {
  DeviceConfig cfg = DeviceConfig::miniature(16);
  cfg.profile = FaultProfile::degenerate(1e9);
  Device both(cfg), left(cfg), right(cfg);
  Address victim{0, 0, 0, 8, 0};
  both.hammer_double_sided(victim, 50, cfg.timing.tras_ns);
  left.hammer_rows(victim, {{7, 50}}, cfg.timing.tras_ns);
  right.hammer_rows(victim, {{9, 50}}, cfg.timing.tras_ns);
  double e_both = both.cell_state(victim, 0).accumulated_exposure;
  double e_left = left.cell_state(victim, 0).accumulated_exposure;
  double e_right = right.cell_state(victim, 0).accumulated_exposure;
  CHECK(e_both == doctest::Approx(e_left + e_right));
}

TEST_CASE("retention flips appear exactly past the per-row minimum time") {
  DeviceConfig cfg;
  cfg.seed = 13;
  Device dev(cfg);
  Address a{0, 0, 0, 1500, 0};
  dev.write_row(a, 0x55);

  // Ground truth: smallest retention time over the cells that can decay
  // under this fill (stored bit matches orientation).
  const RowFaults& rf = dev.fault_model().row(0, 0, 0, 1500);
  uint32_t min_t = UINT32_MAX;
  for (uint32_t bit = 0; bit < cfg.geometry.row_size_bits; ++bit) {
    bool stored = (0x55 >> (bit % 8)) & 1;
    if (stored == bool(rf.true_cell[bit]))
      min_t = std::min<uint32_t>(min_t, rf.retention_steps[bit]);
  }
  REQUIRE(min_t < 65535);
  double t_ns = double(min_t) * 64.0 * 1e6;

  dev.advance_to(t_ns - 64e6);
  CHECK(dev.count_flips(a, 0x55) == 0);
  dev.advance_to(t_ns);
  CHECK(dev.count_flips(a, 0x55) > 0);
}

TEST_CASE("a refresh commits pending flips and resets the clocks") {
  DeviceConfig cfg = DeviceConfig::miniature(8);
  cfg.profile = FaultProfile::degenerate(100.0);
  // all cells threshold 100; orientation split applies
  Device dev(cfg);
  Address victim{0, 0, 0, 4, 0};
  dev.write_row(victim, 0xFF);  // only true cells can flip 1 -> 0
  dev.hammer_double_sided(victim, 60, cfg.timing.tras_ns);  // exposure 120 >= 100
  uint64_t flips = dev.count_flips(victim, 0xFF);
  CHECK(flips > 0);

  // REF refreshes rows round-robin; drive it until the victim's slot.
  double t = dev.now();
  for (int i = 0; i < 8; ++i) {
    t += cfg.timing.trefi_ns;
    dev.issue(Command::ref(0, 0, t));
  }
  // exposure cleared, flips locked in
  CHECK(dev.cell_state(victim, 0).accumulated_exposure == 0.0);
  CHECK(dev.count_flips(victim, 0xFF) == flips);
  // further identical hammering flips the next tier, not the same cells twice
  dev.hammer_double_sided(victim, 60, cfg.timing.tras_ns);
  CHECK(dev.count_flips(victim, 0xFF) == flips);  // flipped cells no longer match orientation
}

TEST_CASE("REF every tREFI keeps data intact indefinitely") {
  DeviceConfig cfg = DeviceConfig::miniature(32);
  cfg.seed = 4;
  cfg.profile = FaultProfile::calibrated_default();
  Device dev(cfg);
  Address a{0, 0, 0, 7, 0};
  dev.write_row(a, 0xAA);
  double t = 0.0;
  for (int i = 0; i < 4000; ++i) {  // ~15.6 ms simulated, several full windows
    t += cfg.timing.trefi_ns;
    dev.issue(Command::ref(0, 0, t));
  }
  CHECK(dev.count_flips(a, 0xAA) == 0);
}

TEST_CASE("oracle equivalence: incremental accounting equals brute-force replay") {
  // Replays random state-valid traces on miniature devices and compares
  // the device's final read-back against an independent recomputation
  // of per-row exposure and refresh history.
  const uint32_t kRows = 16;
  for (uint64_t trial = 0; trial < 150; ++trial) {
    DeviceConfig cfg = DeviceConfig::miniature(kRows);
    cfg.seed = trial;
    cfg.permissive = true;
    cfg.profile = FaultProfile::calibrated_default();
    cfg.profile.hc_floor = 20.0;
    cfg.profile.hc_log_median = std::log(60.0);
    cfg.profile.hc_cap = 500.0;
    cfg.profile.trial_jitter_scale = 0.0;
    cfg.profile.retention_geometric_p = 0.02;  // fast retention for coverage
    cfg.trr.enabled = false;

    // generate a random but state-valid trace
    std::vector<Command> trace;
    double t = 0.0;
    bool open = false;
    uint32_t open_row = 0;
    uint64_t h = rng::hash(4242, rng::kTraceGen, trial);
    int commands = 40 + int(h % 60);
    for (int i = 0; i < commands; ++i) {
      h = rng::combine(h, i);
      t += 30.0 + double(h % 5000);
      uint32_t row = uint32_t(rng::combine(h, 1) % kRows);
      Address a{0, 0, 0, row, 0};
      switch (rng::combine(h, 2) % 6) {
        case 0:
        case 1:
          if (!open) {
            trace.push_back(Command::act(a, t));
            open = true;
            open_row = row;
          }
          break;
        case 2: {
          if (open) {
            Address oa{0, 0, 0, open_row, 0};
            // hold the row open a random additional time (RowPress-ish)
            t += double(rng::combine(h, 3) % 50000);
            trace.push_back(Command::pre(oa, t));
            open = false;
          }
          break;
        }
        case 3:
          if (!open) trace.push_back(Command::ref(0, 0, t));
          break;
        case 4:
          if (!open) {
            // long idle stretch: retention territory
            t += 16.0e6 * double(1 + rng::combine(h, 4) % 12);
          }
          break;
        default:
          break;
      }
    }
    if (open) trace.push_back(Command::pre(Address{0, 0, 0, open_row, 0}, t + 30.0));

    Device dev(cfg);
    for (uint32_t r = 0; r < kRows; ++r) dev.write_row(Address{0, 0, 0, r, 0}, 0x55);
    dev.issue_all(trace);

    // --- independent oracle ---
    const FaultModel& model = dev.fault_model();
    const uint32_t bits = cfg.geometry.row_size_bits;
    struct ORow {
      std::vector<uint8_t> stored;
      double exposure = 0.0;
      double last_restore = 0.0;
    };
    std::vector<ORow> rows(kRows);
    for (auto& r : rows) r.stored.assign(bits, 0);
    for (uint32_t r = 0; r < kRows; ++r)
      for (uint32_t b = 0; b < bits; ++b) rows[r].stored[b] = (0x55 >> (b % 8)) & 1;

    auto coupling = [&](const ORow& row, uint32_t b) {
      bool self = row.stored[b];
      bool same_l = b == 0 || row.stored[b - 1] == self;
      bool same_r = b + 1 >= bits || row.stored[b + 1] == self;
      const FaultProfile& p = cfg.profile;
      if (same_l && same_r) return p.coupling_rowstripe;
      if (!same_l && !same_r) return p.coupling_checkered;
      return 0.5 * (p.coupling_checkered + p.coupling_rowstripe);
    };
    auto flips_now = [&](uint32_t r, double now, std::vector<uint8_t>* out) {
      const RowFaults& rf = model.row(0, 0, 0, r);
      const ORow& row = rows[r];
      out->assign(bits, 0);
      for (uint32_t b = 0; b < bits; ++b) {
        if (row.stored[b] != rf.true_cell[b]) continue;
        bool flip = false;
        if (now - row.last_restore >= rf.retention_steps[b] * 64.0e6) flip = true;
        else if (row.exposure * coupling(row, b) >= double(rf.threshold[b])) flip = true;
        (*out)[b] = flip;
      }
    };
    auto commit = [&](uint32_t r, double now) {
      std::vector<uint8_t> mask;
      flips_now(r, now, &mask);
      for (uint32_t b = 0; b < bits; ++b) rows[r].stored[b] ^= mask[b];
      rows[r].exposure = 0.0;
      rows[r].last_restore = now;
    };

    double open_since = 0.0;
    int open_r = -1;
    uint64_t ref_count = 0;
    for (const Command& c : trace) {
      switch (c.kind) {
        case CommandKind::ACT:
          open_r = int(c.address.row);
          open_since = c.issue_time_ns;
          break;
        case CommandKind::PRE: {
          if (open_r < 0) break;
          double t_on = c.issue_time_ns - open_since;
          double mult = cfg.profile.taggon_multiplier(std::max(t_on, 29.0));
          if (open_r > 0) rows[open_r - 1].exposure += mult;
          if (open_r + 1 < int(kRows)) rows[open_r + 1].exposure += mult;
          open_r = -1;
          break;
        }
        case CommandKind::REF: {
          uint32_t rpr = cfg.timing.rows_per_ref(kRows);
          uint32_t start = uint32_t((ref_count * rpr) % kRows);
          for (uint32_t i = 0; i < rpr; ++i) commit((start + i) % kRows, c.issue_time_ns);
          ++ref_count;
          break;
        }
        default:
          break;
      }
    }

    // compare final reads for every row
    for (uint32_t r = 0; r < kRows; ++r) {
      std::vector<uint8_t> mask;
      flips_now(r, dev.now(), &mask);
      std::vector<uint64_t> expect(bits / 64, 0);
      for (uint32_t b = 0; b < bits; ++b) {
        bool bit = rows[r].stored[b] ^ mask[b];
        if (bit) expect[b >> 6] |= uint64_t(1) << (b & 63);
      }
      CHECK(dev.read_row(Address{0, 0, 0, r, 0}) == expect);
    }
  }
}

