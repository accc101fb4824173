#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "hbmrd/geometry.hpp"
#include "hbmrd/timing.hpp"

namespace hbmrd {

// Victim/aggressor/far-row fill bytes of the four test data patterns.
struct DataPattern {
  std::string name;
  uint8_t victim_byte;
  uint8_t aggressor_byte;
  uint8_t far_byte;  // rows V +/- [2:8]

  static const DataPattern& rowstripe0();
  static const DataPattern& rowstripe1();
  static const DataPattern& checkered0();
  static const DataPattern& checkered1();
  // Canonical order: Rowstripe0 < Rowstripe1 < Checkered0 < Checkered1.
  static const std::array<DataPattern, 4>& all();
  static const DataPattern& by_name(const std::string& name);
};

// Statistical description of a device's read-disturbance and retention
// behaviour. Thresholds are in effective-exposure units: one ACT held
// open for tRAS contributes 1.0 to each distance-1 neighbor, so a row
// whose weakest cell has threshold 2*B flips after B double-sided
// hammers per aggressor.
struct FaultProfile {
  // --- hammer-count ladder (weakest cells of a row) ---
  double hc_floor = 14531.0;     // lower envelope of per-row base B (WCDP hammers)
  double hc_log_median = 0.0;    // median of ln B over undesignated rows (set below)
  double hc_log_sigma = 0.52;    // dispersion of ln B
  double hc_cap = 450000.0;      // upper clamp on B after modulation
  double floor_row_rate = 0.04;  // fraction of rows pinned at the floor
  double hot_row_rate = 0.04;    // fraction of rows with forced max-BER cells

  // ladder shape: HC_n / HC_1 = n^beta, beta in [beta_min, beta_max]
  double beta_min = 0.0607;
  double beta_max = 0.718;
  double beta_spread_exp = 2.476;  // beta quantile = v^exp, v uniform
  double beta_row_coupling = 0.55; // anticorrelation between ln B and beta

  // --- forced max-BER rows ---
  int hot_forced_cells_per_class = 111;  // 2 classes visible per pattern
  double hot_bulk_scale = 4.0;           // bulk suppression on hot rows
  double hot_forced_exposure = 512000.0; // reference exposure the forced cells flip at
  double hot_forced_band_lo = 0.86;      // forced thresholds sit in this band of the
  double hot_forced_band_hi = 0.90;      // reference (robust to jitter and coupling)

  // --- bulk cell population ---
  double bulk_log_median = 0.0;   // ln of bulk threshold median (exposure units)
  double bulk_log_sigma = 0.5;    // per-cell lognormal sigma
  double bulk_word_sigma = 0.45;  // per-64-bit-word factor (clusters flips in words)
  double bulk_row_sigma = 0.15;   // per-row factor
  double bulk_row_floor = 0.45;   // lower clamp on the per-row factor
  double bulk_trunc_margin = 1.15;  // bulk thresholds start above ladder top
  double bulk_hard_fraction = 0.35; // fraction of bulk cells with scaled-up thresholds
  double bulk_hard_scale = 10.0;    // threshold multiplier of the hard population

  // --- spatial structure ---
  std::vector<double> channel_scale;  // per-channel multiplier (defaults 1.0)
  double subarray_edge_lift = 0.25;   // threshold lift toward subarray edges
  double resilient_scale = 2.5;       // middle + last subarray multiplier

  // --- data-pattern coupling and cell orientation ---
  double coupling_checkered = 1.0;
  double coupling_rowstripe = 0.955;
  double orientation_true_even = 0.5535;  // P(true cell) at even bit positions
  double orientation_true_odd = 0.5465;

  // --- aggressor-on-time amplification ---
  // log-log piecewise-linear through these anchors, flat beyond the last.
  std::vector<std::pair<double, double>> taggon_anchors;

  // --- blast radius ---
  double blast_weight_d1 = 1.0;
  double blast_weight_d2 = 0.0;

  // --- per-trial jitter (bounded, uniform in log domain) ---
  double trial_jitter_scale = 1.0;    // 0 disables jitter entirely
  double jitter_stable_rate = 0.95;   // fraction of rows in the stable band
  double jitter_stable_lo = 0.004, jitter_stable_hi = 0.030;
  double jitter_wide_lo = 0.09, jitter_wide_hi = 0.35;

  // --- retention ---
  double retention_geometric_p = 1.55e-5;  // per 64 ms step
  uint32_t retention_step_ms = 64;

  // structured = false collapses every cell threshold to flat_threshold
  // (used by degenerate profiles and closed-form tests).
  bool structured = true;
  double flat_threshold = 0.0;

  void validate() const;

  // Exposure multiplier for holding a row open t_on nanoseconds per ACT.
  double taggon_multiplier(double t_on_ns) const;

  // Default profile calibrated against the measured anchor set.
  static FaultProfile calibrated_default();
  // Every cell gets exactly `threshold`; no variance, no jitter, no
  // retention failures below the (huge) retention time.
  static FaultProfile degenerate(double threshold);
  // No cell ever flips from disturbance.
  static FaultProfile zero_disturbance();
};

// Derived per-row fault parameters; deterministic in (profile, seed, row).
struct RowFaultParams {
  double base_b = 0.0;       // HCfirst base (per-aggressor double-sided hammers)
  double beta = 0.25;        // ladder exponent
  double jitter_halfwidth = 0.0;
  double bulk_log_offset = 0.0;  // ln(row factor) applied to bulk thresholds
  double bulk_trunc = 0.0;       // bulk thresholds clamped above this
  bool floor_row = false;
  bool hot_row = false;
  bool resilient = false;

  // Cell class: orientation x bit parity, each carrying an interleaved
  // geometric ladder so every data pattern sees the full ladder.
  // class 0: (anti, odd)  -> odd ladder steps
  // class 1: (anti, even) -> even ladder steps
  // class 2: (true, even) -> even ladder steps
  // class 3: (true, odd)  -> odd ladder steps
  std::array<std::vector<uint32_t>, 4> ladder_positions;
  std::array<std::vector<uint32_t>, 4> forced_positions;  // hot rows only
};

// Fully materialized per-cell fault state for one row.
struct RowFaults {
  RowFaultParams params;
  std::vector<float> threshold;       // exposure units, per bit
  std::vector<uint16_t> retention_steps;  // multiples of retention_step_ms
  std::vector<uint8_t> true_cell;     // 1 = true cell (flips 1->0)
  uint32_t min_retention_steps = 0;
  float min_threshold = 0.0f;
};

// The deterministic fault model: lazily derives and caches per-row cell
// parameters. Shared (const) between all devices built from the same
// (profile, geometry, layout, seed), which is what makes campaign grids
// cheap to clone.
class FaultModel {
 public:
  FaultModel(Geometry g, SubarrayLayout layout, FaultProfile profile, uint64_t seed);

  const Geometry& geometry() const { return geometry_; }
  const SubarrayLayout& layout() const { return layout_; }
  const FaultProfile& profile() const { return profile_; }
  uint64_t seed() const { return seed_; }

  // Row key: physical row coordinates.
  const RowFaults& row(uint32_t channel, uint32_t pch, uint32_t bank,
                       uint32_t physical_row) const;

  RowFaultParams derive_row_params(uint32_t channel, uint32_t pch, uint32_t bank,
                                   uint32_t physical_row) const;

  // Per-trial jitter multiplier on thresholds (bounded, log-uniform).
  double trial_jitter(uint32_t channel, uint32_t pch, uint32_t bank, uint32_t physical_row,
                      uint64_t trial_nonce) const;

 private:
  Geometry geometry_;
  SubarrayLayout layout_;
  FaultProfile profile_;
  uint64_t seed_;

  RowFaults materialize(uint32_t channel, uint32_t pch, uint32_t bank,
                        uint32_t physical_row) const;

  mutable std::mutex mutex_;
  mutable std::unordered_map<uint64_t, std::unique_ptr<RowFaults>> cache_;
};

// Pure per-cell fault derivation (the spec's cell_params): address is in
// physical row coordinates. Repeated calls are bit-identical.
CellFaultState cell_params(const Geometry& g, const SubarrayLayout& layout,
                           const FaultProfile& profile, uint64_t seed, const Address& physical,
                           uint32_t bit_index);

}  // namespace hbmrd
