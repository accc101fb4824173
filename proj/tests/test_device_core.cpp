#include <doctest.h>

#include <cstring>
#include <set>

#include "hbmrd/device.hpp"
#include "hbmrd/profile.hpp"
#include "hbmrd/rng.hpp"

using namespace hbmrd;

TEST_CASE("default geometry matches the tested chips") {
  Geometry g;
  CHECK(g.channels == 8);
  CHECK(g.pseudo_channels_per_channel == 2);
  CHECK(g.banks_per_pseudo_channel == 16);
  CHECK(g.rows_per_bank == 16384);
  CHECK(g.row_size_bits == 8192);
  CHECK_NOTHROW(g.validate());
  CHECK(g.rows_total() == 8ull * 2 * 16 * 16384);
}

TEST_CASE("geometry invariants rejected") {
  Geometry g;
  g.row_size_bits = 100;  // not a multiple of 64
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g = Geometry{};
  g.channels = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("miniature device builds") {
  DeviceConfig cfg = DeviceConfig::miniature(64);
  CHECK_NOTHROW(Device(cfg));
}

TEST_CASE("layout sizes must sum to rows_per_bank") {
  DeviceConfig cfg;
  cfg.layout.sizes.back() -= 1;
  CHECK_THROWS_AS(Device(cfg), ConfigError);
}

TEST_CASE("identity mapping is the identity") {
  RowMapping m = RowMapping::identity();
  CHECK(m.to_physical(42) == 42);
  CHECK(m.to_logical(42) == 42);
}

TEST_CASE("pair swap mapping on a 16-row bank, checked by enumeration") {
  RowMapping m = RowMapping::group_swap(2, 1);
  m.validate(16);
  // Brute-force the full mapping table and check bijectivity.
  std::set<uint32_t> image;
  for (uint32_t l = 0; l < 16; ++l) {
    uint32_t p = m.to_physical(l);
    CHECK(p < 16);
    image.insert(p);
    CHECK(m.to_logical(p) == l);
    CHECK(p == (l ^ 1u));  // pair swap within even/odd pairs
  }
  CHECK(image.size() == 16);
  CHECK(m.to_physical(6) == 7);
  CHECK(m.to_physical(7) == 6);
}

TEST_CASE("every shipped mapping is a bijection over the full row range") {
  for (RowMapping m : {RowMapping::identity(), RowMapping::group_swap(2, 1),
                       RowMapping::group_swap(16, 6), RowMapping::group_swap(8, 5)}) {
    m.validate(16384);
    for (uint32_t l = 0; l < 16384; ++l) CHECK(m.to_logical(m.to_physical(l)) == l);
  }
}

TEST_CASE("invalid group swap parameters rejected") {
  CHECK_THROWS_AS(RowMapping::group_swap(2, 2).validate(16384), ConfigError);
  CHECK_THROWS_AS(RowMapping::group_swap(3, 1).validate(16384), ConfigError);
}

TEST_CASE("default subarray layout structure") {
  SubarrayLayout layout = SubarrayLayout::default_layout();
  layout.validate(16384);
  uint32_t n832 = 0, n768 = 0, sum = 0;
  for (uint32_t s : layout.sizes) {
    CHECK((s == 832 || s == 768));
    if (s == 832) ++n832;
    else ++n768;
    sum += s;
  }
  CHECK(n832 == 16);
  CHECK(n768 == 4);
  CHECK(sum == 16384);
  // middle and last subarrays are 832-row ones
  CHECK(layout.sizes[layout.middle_index(16384)] == 832);
  CHECK(layout.sizes[layout.last_index()] == 832);
  auto starts = layout.start_rows();
  for (size_t i = 1; i < starts.size(); ++i) CHECK(starts[i] > starts[i - 1]);
}

TEST_CASE("subarray_of locates rows") {
  SubarrayLayout layout = SubarrayLayout::default_layout();
  auto loc0 = layout.locate(0);
  CHECK(loc0.subarray == 0);
  CHECK(loc0.offset == 0);
  CHECK(loc0.size == 832);
  auto loc831 = layout.locate(831);  // last row of the leading 832-row subarray
  CHECK(loc831.subarray == 0);
  CHECK(loc831.offset == 831);
  CHECK(loc831.size == 832);
  auto locLast = layout.locate(16383);
  CHECK(locLast.subarray == layout.last_index());
  CHECK(locLast.offset == locLast.size - 1);
  CHECK_THROWS_AS(layout.locate(16384), AddressError);
}

TEST_CASE("cell_params is deterministic and quantized") {
  Geometry g;
  SubarrayLayout layout = SubarrayLayout::default_layout();
  FaultProfile p = FaultProfile::calibrated_default();
  Address a{0, 0, 0, 123, 0};
  CellFaultState c1 = cell_params(g, layout, p, 7, a, 100);
  CellFaultState c2 = cell_params(g, layout, p, 7, a, 100);
  CHECK(c1.hc_threshold == c2.hc_threshold);
  CHECK(c1.retention_time_ms == c2.retention_time_ms);
  CHECK(c1.true_cell == c2.true_cell);
  CHECK(c1.retention_time_ms % 64 == 0);
  CHECK(c1.retention_time_ms >= 64);
  CHECK(c1.hc_threshold >= 1.0);
}

TEST_CASE("different seeds give different thresholds for nearly all cells") {
  Geometry g;
  SubarrayLayout layout = SubarrayLayout::default_layout();
  FaultProfile p = FaultProfile::calibrated_default();
  FaultModel m1(g, layout, p, 1), m2(g, layout, p, 2);
  uint32_t same = 0, total = 0;
  for (uint32_t row = 0; row < 10; ++row) {
    const RowFaults& r1 = m1.row(0, 0, 0, row);
    const RowFaults& r2 = m2.row(0, 0, 0, row);
    for (uint32_t bit = 0; bit < 1000; ++bit) {
      if (r1.threshold[bit] == r2.threshold[bit]) ++same;
      ++total;
    }
  }
  CHECK(double(same) / total < 0.01);
}

TEST_CASE("zero-variance profile gives every cell the anchor threshold") {
  Geometry g;
  SubarrayLayout layout = SubarrayLayout::default_layout();
  FaultProfile p = FaultProfile::degenerate(12345.0);
  FaultModel model(g, layout, p, 9);
  const RowFaults& rf = model.row(0, 0, 0, 77);
  for (uint32_t bit = 0; bit < g.row_size_bits; ++bit) CHECK(rf.threshold[bit] == 12345.0f);
}

TEST_CASE("cell_params agrees with the device's materialized faults") {
  DeviceConfig cfg;
  cfg.seed = 5;
  Device dev(cfg);
  Address a{1, 1, 3, 999, 0};
  const RowFaults& rf = dev.fault_model().row(1, 1, 3, 999);
  for (uint32_t bit : {0u, 1u, 63u, 64u, 4095u, 8191u}) {
    CellFaultState cs = cell_params(cfg.geometry, cfg.layout, cfg.profile, cfg.seed, a, bit);
    CHECK(cs.hc_threshold == doctest::Approx(rf.threshold[bit]));
    CHECK(cs.retention_time_ms == uint32_t(rf.retention_steps[bit]) * 64);
    CHECK(cs.true_cell == bool(rf.true_cell[bit]));
  }
}

TEST_CASE("fault derivation is referentially transparent") {
  Geometry g;
  SubarrayLayout layout = SubarrayLayout::default_layout();
  FaultProfile p = FaultProfile::calibrated_default();
  auto sweep_hash = [&](uint64_t seed) {
    FaultModel model(g, layout, p, seed);
    uint64_t h = 0;
    for (uint32_t row = 0; row < 4; ++row) {
      const RowFaults& rf = model.row(0, 0, 0, row * 1000);
      for (uint32_t bit = 0; bit < g.row_size_bits; bit += 37) {
        uint64_t t = 0;
        float f = rf.threshold[bit];
        std::memcpy(&t, &f, sizeof f);
        h = rng::combine(h, t + rf.retention_steps[bit]);
      }
    }
    return h;
  };
  CHECK(sweep_hash(42) == sweep_hash(42));
  CHECK(sweep_hash(42) != sweep_hash(43));
}

TEST_CASE("resilient subarrays carry higher thresholds") {
  Geometry g;
  SubarrayLayout layout = SubarrayLayout::default_layout();
  FaultProfile p = FaultProfile::calibrated_default();
  FaultModel model(g, layout, p, 3);
  auto mid = model.derive_row_params(0, 0, 0, 8192 + 400);  // middle 832-row subarray
  CHECK(mid.resilient);
  auto normal = model.derive_row_params(0, 0, 0, 400);
  CHECK(!normal.resilient);
}

TEST_CASE("device starts freshly refreshed: reads return written data") {
  DeviceConfig cfg;
  cfg.seed = 11;
  Device dev(cfg);
  Address a{0, 0, 0, 50, 0};
  dev.write_row(a, 0xAA);
  std::vector<uint64_t> bits = dev.read_row(a);
  for (uint64_t w : bits) CHECK(w == 0xAAAAAAAAAAAAAAAAULL);
  CHECK(dev.count_flips(a, 0xAA) == 0);
}
