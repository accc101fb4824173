#pragma once

#include <cstdint>
#include <vector>

#include "hbmrd/errors.hpp"

namespace hbmrd {

// Hidden in-DRAM mitigation parameters. The sampler latches up to
// `sampler_slots` aggressor rows per tracking window; every `period`-th
// REF refreshes the latched rows' neighbors out to `victim_span`.
struct TrrConfig {
  bool enabled = true;
  uint32_t period = 17;
  uint32_t sampler_slots = 4;
  bool first_act_rule = true;
  bool half_count_rule = true;
  bool strict_majority = true;  // half-count latch on count > total/2 (vs >=)
  uint32_t victim_span = 1;

  void validate() const {
    if (period < 1) throw ConfigError("trr: period must be >= 1");
    if (sampler_slots < 1) throw ConfigError("trr: sampler_slots must be >= 1");
    if (victim_span < 1) throw ConfigError("trr: victim_span must be >= 1");
  }
};

// Per-bank runtime tracking state. Rows are physical.
struct TrrState {
  uint32_t ref_counter = 0;  // REFs since the last TRR-capable one
  std::vector<uint32_t> slots;
  std::vector<std::pair<uint32_t, uint64_t>> interval_act_counts;
  uint64_t interval_total_acts = 0;
  bool awaiting_first_act = false;  // first-ACT latch window open
};

// Called for every ACT in the bank (count > 1 compresses a run of
// activations of the same row; the first of them does the latching).
void trr_on_act(const TrrConfig& cfg, TrrState& st, uint32_t physical_row, uint64_t count = 1);

// Called on every REF after the refresh segment. Applies the half-count
// rule, resets interval counters, and on every period-th REF returns the
// victim rows (slots +/- span, may be out of range; caller clamps) and
// reopens the first-ACT window.
std::vector<int64_t> trr_on_ref(const TrrConfig& cfg, TrrState& st);

}  // namespace hbmrd
