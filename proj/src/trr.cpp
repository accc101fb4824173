#include "hbmrd/trr.hpp"

#include <algorithm>

namespace hbmrd {

namespace {

bool in_slots(const TrrState& st, uint32_t row) {
  return std::find(st.slots.begin(), st.slots.end(), row) != st.slots.end();
}

// Half-count latches unconditionally: when the sampler is full the
// oldest slot is evicted.
void latch_replacing(const TrrConfig& cfg, TrrState& st, uint32_t row) {
  if (in_slots(st, row)) return;
  if (st.slots.size() >= cfg.sampler_slots) st.slots.erase(st.slots.begin());
  st.slots.push_back(row);
}

}  // namespace

void trr_on_act(const TrrConfig& cfg, TrrState& st, uint32_t physical_row, uint64_t count) {
  if (!cfg.enabled || count == 0) return;

  if (cfg.first_act_rule && st.awaiting_first_act && !in_slots(st, physical_row) &&
      st.slots.size() < cfg.sampler_slots) {
    st.slots.push_back(physical_row);
    if (st.slots.size() >= cfg.sampler_slots) st.awaiting_first_act = false;
  }

  for (auto& [row, cnt] : st.interval_act_counts) {
    if (row == physical_row) {
      cnt += count;
      st.interval_total_acts += count;
      return;
    }
  }
  st.interval_act_counts.emplace_back(physical_row, count);
  st.interval_total_acts += count;
}

std::vector<int64_t> trr_on_ref(const TrrConfig& cfg, TrrState& st) {
  if (!cfg.enabled) return {};

  if (cfg.half_count_rule && st.interval_total_acts > 0) {
    for (const auto& [row, cnt] : st.interval_act_counts) {
      bool majority = cfg.strict_majority ? (2 * cnt > st.interval_total_acts)
                                          : (2 * cnt >= st.interval_total_acts);
      if (majority) latch_replacing(cfg, st, row);
    }
  }
  st.interval_act_counts.clear();
  st.interval_total_acts = 0;

  ++st.ref_counter;
  if (st.ref_counter < cfg.period) return {};

  // TRR-capable REF: refresh the latched rows' victims.
  std::vector<int64_t> victims;
  for (uint32_t row : st.slots) {
    for (uint32_t d = 1; d <= cfg.victim_span; ++d) {
      victims.push_back(int64_t(row) - d);
      victims.push_back(int64_t(row) + d);
    }
  }
  st.slots.clear();
  st.ref_counter = 0;
  st.awaiting_first_act = true;
  return victims;
}

}  // namespace hbmrd
