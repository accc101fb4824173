#include <doctest.h>

#include <cmath>
#include <set>

#include "hbmrd/campaign.hpp"
#include "hbmrd/fit.hpp"

using namespace hbmrd;

TEST_CASE("activation budget arithmetic") {
  TimingParams t;
  CHECK(compute_act_budget(t) == 78);

  TimingParams one;
  one.trefi_ns = one.trfc_ns + one.trc_ns;
  CHECK(compute_act_budget(one) == 1);

  TimingParams direct;
  direct.trefi_ns = 1000;
  direct.trfc_ns = 100;
  direct.trc_ns = 45;
  CHECK(compute_act_budget(direct) == 20);

  TimingParams bad;
  bad.trfc_ns = bad.trefi_ns + 1;
  CHECK_THROWS_AS(compute_act_budget(bad), ConfigError);
}

TEST_CASE("bypass synthesis divides the budget as the worked example") {
  TimingParams t;
  Address bank{0, 0, 0, 0, 0};
  // 4 dummies, agg_hc 18, budget 78: each dummy activated 10 times
  std::vector<Command> trace =
      synthesize_bypass(t, bank, 100, {99, 101}, {120, 122, 124, 126}, 18, 78, 3);
  uint64_t dummy_acts = 0, agg_acts = 0, refs = 0;
  for (const Command& c : trace) {
    if (c.kind == CommandKind::REF) ++refs;
    if (c.kind != CommandKind::ACT) continue;
    if (c.address.row >= 120) ++dummy_acts;
    else ++agg_acts;
  }
  CHECK(refs == 3);
  CHECK(dummy_acts == 3 * 4 * 10);  // floor((78 - 18*2)/4) = 10 per dummy
  CHECK(agg_acts == 3 * 2 * 18);
}

TEST_CASE("bypass trace length covers two refresh windows") {
  TimingParams t;
  Address bank{0, 0, 0, 0, 0};
  uint64_t intervals = 2 * t.refs_per_window();
  CHECK(intervals == 2 * 8205);
  std::vector<Command> trace = synthesize_bypass(t, bank, 100, {99, 101}, {120}, 18, 78, intervals);
  uint64_t refs = 0;
  for (const Command& c : trace)
    if (c.kind == CommandKind::REF) ++refs;
  CHECK(refs == intervals);
}

TEST_CASE("bypass traces pass strict validation with one REF per tREFI") {
  Geometry g;
  TimingParams t;
  Address bank{0, 0, 0, 0, 0};
  SUBCASE("with dummies") {
    auto trace = synthesize_bypass(t, bank, 100, {99, 101}, {120, 122, 124, 126}, 18, 78, 40);
    CHECK(validate_trace(g, t, trace).clean());
  }
  SUBCASE("plain double-sided filling the budget") {
    auto trace = synthesize_bypass(t, bank, 100, {99, 101}, {}, 39, 78, 40);
    CHECK(validate_trace(g, t, trace).clean());
    uint64_t acts = 0;
    for (const Command& c : trace)
      if (c.kind == CommandKind::ACT) ++acts;
    CHECK(acts == 40 * 78);
  }
}

TEST_CASE("infeasible bypass budget split is rejected") {
  TimingParams t;
  Address bank{0, 0, 0, 0, 0};
  CHECK_THROWS_AS(synthesize_bypass(t, bank, 100, {99, 101}, {120, 122}, 39, 78, 1),
                  CampaignError);
}

TEST_CASE("single-cell threshold 1000 measures HCfirst of 500 double-sided") {
  // closed form: exposure = 2 * HC, flip at exposure >= 1000 -> HC = 500
  DeviceConfig dc = DeviceConfig::miniature(64);
  dc.profile = FaultProfile::degenerate(1000.0);
  CampaignContext ctx(dc);
  CampaignSpec spec;
  spec.seed = 1;
  spec.hc_start = 8;
  spec.hc_resolution = 1;
  spec.repetitions = 1;
  auto hc = find_hcfirst(ctx, spec, 30, DataPattern::checkered0(), dc.timing.tras_ns);
  REQUIRE(hc.has_value());
  CHECK(*hc == 500);

  // brute-force verification: 499 hammers per aggressor do not flip, 500 do
  CHECK(ber_trial(ctx, spec, 30, DataPattern::checkered0(), 499, dc.timing.tras_ns, 0) == 0);
  CHECK(ber_trial(ctx, spec, 30, DataPattern::checkered0(), 500, dc.timing.tras_ns, 0) > 0);
}

TEST_CASE("zero-disturbance profile gives all-zero BER") {
  DeviceConfig dc;
  dc.profile = FaultProfile::zero_disturbance();
  CampaignContext ctx(dc);
  CampaignSpec spec;
  spec.seed = 1;
  spec.rows = RowSelection::stride(16);
  spec.patterns = {"checkered0"};
  spec.repetitions = 1;
  CampaignResult r = run_ber(ctx, spec);
  for (const BerRecord& rec : r.ber) CHECK(rec.ber == 0.0);
}

TEST_CASE("hcnth sequences are nondecreasing and ladder-shaped") {
  DeviceConfig dc;
  dc.seed = 1;
  CampaignContext ctx(dc);
  CampaignSpec spec;
  spec.seed = 1;
  spec.repetitions = 2;
  for (uint32_t row : {10u, 210u, 410u}) {
    std::array<double, 10> hc{};
    for (uint32_t n = 1; n <= 10; ++n) {
      auto v = find_hc_nth(ctx, spec, row, DataPattern::rowstripe1(), 29.0, n, 256);
      REQUIRE(v.has_value());
      hc[n - 1] = double(*v);
      if (n > 1) CHECK(hc[n - 1] >= hc[n - 2]);
    }
    double norm10 = hc[9] / hc[0];
    CHECK(norm10 >= 1.1);
    CHECK(norm10 <= 5.5);
  }
}

TEST_CASE("word histogram buckets") {
  SUBCASE("all-zero flip map is empty") {
    std::vector<std::vector<uint64_t>> maps = {std::vector<uint64_t>(128, 0)};
    CHECK(word_histogram(maps, 8192).empty());
  }
  SUBCASE("one 16-flip word lands in the >7 bucket") {
    std::vector<uint64_t> map(128, 0);
    map[3] = 0xFFFF;  // 16 bitflips inside one 64-bit word
    auto hist = word_histogram({map}, 8192);
    CHECK(hist.at(">7") == 1);
    CHECK(hist.size() == 1);
  }
  SUBCASE("mixed multiplicities") {
    std::vector<uint64_t> map(128, 0);
    map[0] = 0x1;            // 1 flip
    map[1] = 0x3;            // 2 flips
    map[2] = 0x7F;           // 7 flips
    map[4] = 0x1FF;          // 9 flips
    auto hist = word_histogram({map}, 8192);
    CHECK(hist.at("1") == 1);
    CHECK(hist.at("2") == 1);
    CHECK(hist.at("7") == 1);
    CHECK(hist.at(">7") == 1);
  }
  SUBCASE("row bits must divide into words") {
    CHECK_THROWS_AS(word_histogram({}, 100, 64), ConfigError);
  }
}

TEST_CASE("wcdp selection: min HCfirst, then max BER, then canonical order") {
  std::map<std::string, PatternStats> stats;
  stats["rowstripe0"] = {40000, 0.001};
  stats["rowstripe1"] = {35000, 0.001};
  stats["checkered0"] = {30000, 0.002};
  stats["checkered1"] = {33000, 0.004};
  CHECK(wcdp_select(stats) == "checkered0");

  // HCfirst tie between the checkered patterns: larger BER wins
  stats["checkered1"] = {30000, 0.004};
  CHECK(wcdp_select(stats) == "checkered1");

  // full tie: canonical order rowstripe0 < rowstripe1 < checkered0 < checkered1
  for (auto& [k, v] : stats) v = {30000, 0.004};
  CHECK(wcdp_select(stats) == "rowstripe0");

  // above-cap rows lose to measured rows
  stats["rowstripe0"] = {std::nullopt, 0.0};
  CHECK(wcdp_select(stats) == "rowstripe1");

  stats.erase("checkered0");
  CHECK_THROWS_AS(wcdp_select(stats), CampaignError);
}

TEST_CASE("ber campaign output is byte-identical across jobs 1 and 8") {
  DeviceConfig dc;
  dc.seed = 99;
  CampaignContext ctx(dc);
  CampaignSpec spec;
  spec.seed = 99;
  spec.rows = RowSelection::stride(24);
  spec.repetitions = 2;
  spec.jobs = 1;
  CampaignResult r1 = run_ber(ctx, spec);
  spec.jobs = 8;
  CampaignResult r8 = run_ber(ctx, spec);
  CHECK(r1.ber_csv() == r8.ber_csv());
  CHECK(r1.ber_raw_csv() == r8.ber_raw_csv());
}

TEST_CASE("run_ber rejects over-window hammering without retention subtraction") {
  DeviceConfig dc;
  CampaignContext ctx(dc);
  CampaignSpec spec;
  spec.seed = 1;
  spec.rows = RowSelection::first(1);
  spec.patterns = {"checkered0"};
  spec.hammer_count = 600000;  // 2*600K*46.6ns = 56 ms > tREFW
  spec.retention_subtract = false;
  CHECK_THROWS_AS(run_ber(ctx, spec), CampaignError);
  spec.retention_subtract = true;
  CHECK_NOTHROW(run_ber(ctx, spec));
}

TEST_CASE("fitted profile reproduces the floor and mean anchors in simulation") {
  AnchorSet anchors = {{"min_hcfirst", 14531.0, 0.02},
                       {"ber_checkered_mean_256k", 0.0076, 0.10}};
  FaultProfile p = fit_profile(anchors, 1);
  CHECK(p.hc_floor == 14531.0);

  DeviceConfig dc;
  dc.profile = p;
  dc.seed = 1;
  CampaignContext ctx(dc);
  CampaignSpec spec;
  spec.seed = 1;
  spec.rows = RowSelection::stride(192);
  spec.patterns = {"checkered0"};
  spec.repetitions = 2;
  spec.jobs = 8;
  CampaignResult r = run_ber(ctx, spec);
  double mean = 0.0;
  for (const BerRecord& rec : r.ber) mean += rec.ber;
  mean /= double(r.ber.size());
  CHECK(mean == doctest::Approx(0.0076).epsilon(0.10));
}

TEST_CASE("fit rejects non-monotone tAggON anchors") {
  AnchorSet anchors = {{"rowpress_ber_29ns", 0.002, 0.2}, {"rowpress_ber_58ns", 0.001, 0.2}};
  CHECK_THROWS_AS(fit_profile(anchors, 1), CalibrationError);
}

TEST_CASE("single flat anchor gives the degenerate profile") {
  AnchorSet anchors = {{"flat_threshold", 5000.0, 0.0}};
  FaultProfile p = fit_profile(anchors, 1);
  CHECK(!p.structured);
  CHECK(p.flat_threshold == 5000.0);
}

TEST_CASE("rowpress sweep BER anchors within 20 percent") {
  // six-point tAggON curve at HC = 150K over first/middle/last blocks
  DeviceConfig dc;
  dc.seed = 1;
  CampaignContext ctx(dc);
  CampaignSpec spec;
  spec.seed = 1;
  spec.experiment = Experiment::rowpress_ber;
  spec.rows = RowSelection::blocks(96);  // reduced desk scale for the unit suite
  spec.patterns = {"checkered0"};
  spec.hammer_count = 150000;
  spec.repetitions = 2;
  spec.jobs = 8;
  CampaignResult r = run_rowpress_ber(ctx, spec);

  std::map<double, std::pair<double, int>> by_taggon;
  for (const BerRecord& rec : r.ber) {
    by_taggon[rec.taggon_ns].first += rec.ber;
    by_taggon[rec.taggon_ns].second += 1;
  }
  const std::map<double, double> expect = {{29.0, 0.0008},   {58.0, 0.0024}, {87.0, 0.0040},
                                           {116.0, 0.0073},  {3900.0, 0.31}, {35100.0, 0.5035}};
  for (const auto& [taggon, target] : expect) {
    double mean = by_taggon.at(taggon).first / by_taggon.at(taggon).second;
    INFO("tAggON " << taggon << " mean " << mean << " target " << target);
    CHECK(mean == doctest::Approx(target).epsilon(0.20));
  }
}
