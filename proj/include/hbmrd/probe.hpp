#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hbmrd/device.hpp"

namespace hbmrd {

// Command/read surface handed to the probes. Probes never see the
// device's TRR or fault configuration: they get commands, reads, writes
// and the public standard timings, nothing else.
class ProbeSurface {
 public:
  using Factory = std::function<std::unique_ptr<Device>()>;

  explicit ProbeSurface(Factory factory, Address bank_scope = Address{});

  // Fresh device with the same hidden configuration.
  void reset();

  uint32_t rows_per_bank() const;
  uint32_t row_bits() const;
  const TimingParams& timing() const;  // standard values, not hidden

  double now() const;
  void advance(double dt_ns);
  void advance_to(double t_ns);

  void write(uint32_t row, uint8_t fill);
  std::vector<uint64_t> read(uint32_t row) const;
  uint64_t flips(uint32_t row, uint8_t expected_fill) const;

  // One activation of `row` held open for t_on (default tRAS).
  void act_once(uint32_t row, double t_on_ns = 0.0);
  // `count` back-to-back activations (command-stream equivalent).
  void activate(uint32_t row, uint64_t count, double t_on_ns = 0.0);
  void ref();
  uint64_t refs_issued() const { return refs_issued_; }

 private:
  Factory factory_;
  Address scope_;
  std::unique_ptr<Device> dev_;
  uint64_t refs_issued_ = 0;
};

// Per-row minimal failing retention time, probed in fixed steps.
struct RetentionMap {
  uint32_t step_ms = 64;
  uint32_t cap_ms = 0;
  std::map<uint32_t, uint32_t> min_failing_ms;  // row -> T; absent row = above cap
  std::vector<uint32_t> above_cap;

  // Rows sharing the most common T, spaced at least `min_spacing` apart.
  std::vector<uint32_t> common_t_rows(size_t want, uint32_t min_spacing) const;
};

enum class MajorityMode { strict, non_strict, undetermined };

struct TrrFindings {
  bool trr_detected = false;
  std::optional<uint32_t> period;
  std::optional<uint32_t> victim_span;
  std::optional<bool> first_act_rule;
  std::optional<bool> half_count_rule;
  std::optional<uint32_t> slot_capacity;
  MajorityMode majority = MajorityMode::undetermined;

  std::string report() const;
  std::string csv() const;  // parameter,value,confidence
};

// Retention profiling: smallest tested T at which any cell of the row
// flips; `trials` repetitions per step, failure if any trial flips.
RetentionMap profile_retention(ProbeSurface& surface, const std::vector<uint32_t>& rows,
                               uint32_t step_ms = 64, uint32_t cap_ms = 64 * 24,
                               uint32_t trials = 5, uint8_t fill = 0x55);

// Retention-side-channel probes. All operate black-box and assume row
// adjacency recovered beforehand (identity mapping unless stated).
std::optional<uint32_t> infer_trr_period(ProbeSurface& surface, const RetentionMap& map,
                                         uint32_t max_period = 32, uint8_t fill = 0x55);
std::optional<uint32_t> infer_victim_span(ProbeSurface& surface, const RetentionMap& map,
                                          uint32_t period, uint32_t max_span = 3,
                                          uint8_t fill = 0x55);
TrrFindings infer_sampler_rules(ProbeSurface& surface, const RetentionMap& map, uint32_t period,
                                uint32_t span, uint8_t fill = 0x55);

// Full pipeline: retention profiling in a refresh-safe region, then
// period, span, rules, capacity.
TrrFindings infer_trr(ProbeSurface& surface);

// Structural reverse engineering via single-sided hammering: for each
// probed logical row, the logical rows observing bitflips (its physical
// neighbors). Rows with no flips at the budget are reported unresolved.
struct AdjacencyTable {
  std::map<uint32_t, std::vector<uint32_t>> neighbors;
  std::vector<uint32_t> unresolved;
};
AdjacencyTable reverse_map(ProbeSurface& surface, const std::vector<uint32_t>& rows,
                           uint64_t hammer_budget = 1250000, uint32_t window = 8);

// Rows whose single-sided hammering flips only one side: subarray edge
// rows, sorted ascending.
std::vector<uint32_t> find_subarray_bounds(ProbeSurface& surface, uint32_t first_row,
                                           uint32_t last_row, uint64_t hammer_budget = 1250000);

}  // namespace hbmrd
