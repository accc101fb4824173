#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "hbmrd/geometry.hpp"
#include "hbmrd/profile.hpp"
#include "hbmrd/timing.hpp"
#include "hbmrd/trr.hpp"

namespace hbmrd {

struct DeviceConfig {
  Geometry geometry;
  RowMapping mapping;
  SubarrayLayout layout = SubarrayLayout::default_layout();
  TimingParams timing;
  FaultProfile profile = FaultProfile::calibrated_default();
  TrrConfig trr;
  uint64_t seed = 1;
  bool permissive = false;
  uint8_t write_byte = 0x00;  // fill used by trace WR commands

  void validate() const;

  static DeviceConfig miniature(uint32_t rows, uint32_t row_bits = 128);
};

struct IssueEvent {
  enum class Kind { violation, row_close, trr_victim_refresh, segment_refresh };
  Kind kind;
  Violation violation;       // Kind::violation
  uint32_t channel = 0, pseudo_channel = 0, bank = 0;
  uint32_t physical_row = 0;  // closed/refreshed row
  double t_on_ns = 0.0;       // Kind::row_close
};

using EventSink = std::vector<IssueEvent>;

// One HBM2 device: a single mutable state machine; all commands are
// serialized. Cell fault parameters are derived lazily through the
// shared FaultModel, so cloning a device for a campaign grid cell is
// cheap and every clone sees bit-identical faults.
class Device {
 public:
  explicit Device(DeviceConfig cfg);
  Device(DeviceConfig cfg, std::shared_ptr<const FaultModel> model);

  const DeviceConfig& config() const { return cfg_; }
  const FaultModel& fault_model() const { return *model_; }
  std::shared_ptr<const FaultModel> fault_model_ptr() const { return model_; }

  double now() const { return now_; }
  void advance_to(double t_ns);
  void advance(double dt_ns) { advance_to(now_ + dt_ns); }

  // Per-trial jitter context; campaigns set one nonce per repetition.
  void set_trial_nonce(uint64_t nonce) { trial_nonce_ = nonce; }
  uint64_t trial_nonce() const { return trial_nonce_; }

  // Protocol path. Strict mode throws TimingError naming the violated
  // parameter; permissive mode reports violations through the sink and
  // executes the command anyway.
  void issue(const Command& cmd, EventSink* sink = nullptr);
  void issue_all(const std::vector<Command>& trace, EventSink* sink = nullptr);

  // Data path (out-of-band, full-row granularity). A write restores the
  // row's charge: it resets the retention clock and disturbance exposure.
  void write_row(const Address& logical, uint8_t fill);
  // Materializes the row as it would read back right now. Pure: does not
  // commit flips or reset exposure.
  std::vector<uint64_t> read_row(const Address& logical) const;
  // Flip mask/count of the row against a uniform expected fill byte.
  std::vector<uint64_t> flip_mask(const Address& logical, uint8_t expected_fill) const;
  uint64_t count_flips(const Address& logical, uint8_t expected_fill) const;

  // Bulk hammer: equivalent to issuing `count` ACT/PRE pairs per listed
  // row (in list order), each held open t_on_ns, with no interleaved
  // REF. Advances time by the equivalent command-stream duration.
  void hammer_rows(const Address& bank_scope,
                   const std::vector<std::pair<uint32_t, uint64_t>>& logical_rows_counts,
                   double t_on_ns);
  // Double-sided hammer around a victim: both physically adjacent rows
  // receive `hc` activations each.
  void hammer_double_sided(const Address& victim_logical, uint64_t hc, double t_on_ns);

  // Physically adjacent rows of a logical victim (subarray-bounded),
  // returned as logical row indices.
  std::vector<uint32_t> aggressors_for(const Address& victim_logical) const;

  uint32_t to_physical(uint32_t logical_row) const { return cfg_.mapping.to_physical(logical_row); }
  uint32_t to_logical(uint32_t physical_row) const { return cfg_.mapping.to_logical(physical_row); }

  // Spec surface: per-cell fault state at a physical address.
  CellFaultState cell_state(const Address& physical, uint32_t bit_index) const;

 private:
  struct RowState {
    std::vector<uint64_t> bits;  // committed stored bits
    double last_restore_ns = 0.0;
    // (exposure term value, activation count); a term value is
    // blast_weight * taggon multiplier. Kept as exact counts so bulk
    // hammering and command-by-command replay accumulate identically.
    std::vector<std::pair<double, uint64_t>> terms;
  };

  struct BankState {
    std::optional<uint32_t> open_physical_row;
    double open_since_ns = 0.0;
    double last_act_ns = -1.0e18;
    TrrState trr;
  };

  struct PchState {
    uint64_t ref_count = 0;
    std::vector<double> ref_times;
  };

  DeviceConfig cfg_;
  std::shared_ptr<const FaultModel> model_;
  double now_ = 0.0;
  uint64_t trial_nonce_ = 0;
  uint64_t issue_index_ = 0;
  ProtocolChecker checker_;
  std::vector<BankState> banks_;
  std::vector<PchState> pchs_;
  std::unordered_map<uint64_t, RowState> rows_;

  uint64_t row_state_key(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t phys) const;
  BankState& bank_state(const Address& a);
  PchState& pch_state(uint32_t ch, uint32_t pch);

  // Refresh history of a physical row implied by the per-pch REF stream
  // (round-robin segments), used to reconstruct untouched rows lazily.
  void row_refresh_history(uint32_t ch, uint32_t pch, uint32_t phys, double* last_refresh,
                           double* max_committed_gap) const;

  RowState& touch_row(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t phys);
  const RowState* find_row(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t phys) const;

  // Adds pending (uncommitted) flips of the row into `mask`.
  void pending_flips(const RowFaults& rf, const std::vector<uint64_t>& stored, double exposure,
                     bool exposure_possible, double gap_ns, double jitter,
                     std::vector<uint64_t>& mask) const;
  std::vector<uint64_t> materialize(uint32_t ch, uint32_t pch, uint32_t bank,
                                    uint32_t phys) const;

  void register_activation(const Address& bank_scope, uint32_t aggressor_phys, double t_on_ns,
                           uint64_t count, EventSink* sink);
  // Victim/segment refresh: commits pending flips, then resets the
  // retention clock and exposure.
  void commit_refresh(uint32_t ch, uint32_t pch, uint32_t bank, uint32_t phys);
  void execute(const Command& cmd, EventSink* sink);

  std::vector<uint32_t> physical_neighbors(uint32_t phys, uint32_t distance) const;
};

}  // namespace hbmrd
