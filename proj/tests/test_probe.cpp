#include <doctest.h>

#include <memory>

#include "hbmrd/probe.hpp"
#include "hbmrd/rng.hpp"

using namespace hbmrd;

namespace {

ProbeSurface make_surface(TrrConfig trr, uint64_t seed = 1,
                          RowMapping mapping = RowMapping::identity()) {
  DeviceConfig cfg;
  cfg.seed = seed;
  cfg.trr = trr;
  cfg.mapping = mapping;
  cfg.permissive = true;  // probes run with periodic refresh withheld
  return ProbeSurface([cfg] { return std::make_unique<Device>(cfg); });
}

}  // namespace

TEST_CASE("retention profiling finds quantized per-row times") {
  DeviceConfig cfg;
  cfg.seed = 1;
  cfg.permissive = true;
  ProbeSurface surface([cfg] { return std::make_unique<Device>(cfg); });
  std::vector<uint32_t> rows;
  for (uint32_t r = 1024; r < 1024 + 160; ++r) rows.push_back(r);
  RetentionMap map = profile_retention(surface, rows, 64, 64 * 16, 5);
  CHECK(map.min_failing_ms.size() > 10);

  // White-box cross-check: the probed minimum matches the smallest
  // retention time over cells that can decay under the probe fill.
  FaultModel model(cfg.geometry, cfg.layout, cfg.profile, cfg.seed);
  for (const auto& [row, t] : map.min_failing_ms) {
    CHECK(t % 64 == 0);
    CHECK(t >= 64);
    const RowFaults& rf = model.row(0, 0, 0, row);
    uint32_t expect = 65535;
    for (uint32_t bit = 0; bit < cfg.geometry.row_size_bits; ++bit) {
      bool stored = (0x55 >> (bit % 8)) & 1;
      if (stored == bool(rf.true_cell[bit]))
        expect = std::min<uint32_t>(expect, rf.retention_steps[bit]);
    }
    CHECK(t == expect * 64);
  }
}

TEST_CASE("retention map is reproducible for a fixed seed") {
  std::vector<uint32_t> rows;
  for (uint32_t r = 1024; r < 1024 + 96; ++r) rows.push_back(r);
  ProbeSurface s1 = make_surface(TrrConfig{}, 5);
  ProbeSurface s2 = make_surface(TrrConfig{}, 5);
  RetentionMap m1 = profile_retention(s1, rows, 64, 64 * 12, 2);
  RetentionMap m2 = profile_retention(s2, rows, 64, 64 * 12, 2);
  CHECK(m1.min_failing_ms == m2.min_failing_ms);
}

TEST_CASE("default hidden config is recovered") {
  ProbeSurface surface = make_surface(TrrConfig{});
  TrrFindings f = infer_trr(surface);
  CHECK(f.trr_detected);
  CHECK(f.period == 17);
  CHECK(f.victim_span == 1);
  CHECK(f.first_act_rule == true);
  CHECK(f.half_count_rule == true);
  CHECK(f.slot_capacity == 4);
  CHECK(f.majority == MajorityMode::strict);
}

TEST_CASE("hidden period 5 is recovered") {
  TrrConfig trr;
  trr.period = 5;
  ProbeSurface surface = make_surface(trr);
  RetentionMap map = profile_retention(surface, [] {
    std::vector<uint32_t> rows;
    for (uint32_t r = 1024; r < 1536; ++r) rows.push_back(r);
    return rows;
  }());
  auto period = infer_trr_period(surface, map);
  REQUIRE(period.has_value());
  CHECK(*period == 5);
}

TEST_CASE("TRR disabled reports no TRR detected") {
  TrrConfig trr;
  trr.enabled = false;
  ProbeSurface surface = make_surface(trr);
  TrrFindings f = infer_trr(surface);
  CHECK(!f.trr_detected);
}

TEST_CASE("k=1 capacity (literal first-row rule) is recovered") {
  TrrConfig trr;
  trr.sampler_slots = 1;
  ProbeSurface surface = make_surface(trr);
  TrrFindings f = infer_trr(surface);
  CHECK(f.slot_capacity == 1);
  CHECK(f.first_act_rule == true);
}

TEST_CASE("hidden span 2 is recovered") {
  TrrConfig trr;
  trr.victim_span = 2;
  ProbeSurface surface = make_surface(trr);
  TrrFindings f = infer_trr(surface);
  CHECK(f.victim_span == 2);
}

TEST_CASE("non-strict majority is detected") {
  TrrConfig trr;
  trr.strict_majority = false;
  ProbeSurface surface = make_surface(trr);
  TrrFindings f = infer_trr(surface);
  CHECK(f.half_count_rule == true);
  CHECK(f.majority == MajorityMode::non_strict);
}

TEST_CASE("reverse map: identity neighbors are L-1 and L+1") {
  ProbeSurface surface = make_surface(TrrConfig{});
  AdjacencyTable table = reverse_map(surface, {100, 101, 102});
  REQUIRE(table.neighbors.count(101));
  CHECK(table.neighbors.at(101) == std::vector<uint32_t>{100, 102});
  CHECK(table.unresolved.empty());
}

TEST_CASE("reverse map recovers the pair-swap scheme exactly") {
  RowMapping mapping = RowMapping::group_swap(2, 1);
  ProbeSurface surface = make_surface(TrrConfig{}, 1, mapping);
  std::vector<uint32_t> rows;
  for (uint32_t r = 200; r < 232; ++r) rows.push_back(r);
  AdjacencyTable table = reverse_map(surface, rows);
  CHECK(table.unresolved.empty());
  for (uint32_t l : rows) {
    uint32_t phys = mapping.to_physical(l);
    std::vector<uint32_t> expect;
    for (uint32_t p : {phys - 1, phys + 1}) expect.push_back(mapping.to_logical(p));
    std::sort(expect.begin(), expect.end());
    CHECK(table.neighbors.at(l) == expect);
  }
}

TEST_CASE("subarray edge rows flip on only one side") {
  ProbeSurface surface = make_surface(TrrConfig{});
  // probe around the first boundary of the default layout (832)
  std::vector<uint32_t> bounds = find_subarray_bounds(surface, 824, 840);
  CHECK(bounds == std::vector<uint32_t>{831, 832});
}

TEST_CASE("single-subarray layout has boundaries only at the bank edges") {
  DeviceConfig cfg;
  cfg.seed = 2;
  cfg.layout = SubarrayLayout::single(cfg.geometry.rows_per_bank);
  cfg.permissive = true;
  ProbeSurface surface([cfg] { return std::make_unique<Device>(cfg); });
  std::vector<uint32_t> inner = find_subarray_bounds(surface, 800, 864);
  CHECK(inner.empty());
  std::vector<uint32_t> low = find_subarray_bounds(surface, 0, 2);
  CHECK(low == std::vector<uint32_t>{0});
}
