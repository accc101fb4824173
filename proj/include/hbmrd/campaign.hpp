#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hbmrd/device.hpp"

namespace hbmrd {

enum class Experiment { ber, hcfirst, hcnth, rowpress_ber, rowpress_hcfirst, bypass, ecc_hist };

Experiment experiment_from_string(const std::string& s);
const char* to_string(Experiment e);

// Row selection conventions: evenly spread over the bank (stride), the
// first N rows, first/middle/last blocks of N/3, or an explicit list.
struct RowSelection {
  enum class Kind { stride, first, blocks, list };
  Kind kind = Kind::stride;
  uint32_t count = 384;
  std::vector<uint32_t> explicit_rows;

  std::vector<uint32_t> materialize(uint32_t rows_per_bank) const;
  static RowSelection stride(uint32_t n) { return {Kind::stride, n, {}}; }
  static RowSelection first(uint32_t n) { return {Kind::first, n, {}}; }
  static RowSelection blocks(uint32_t n) { return {Kind::blocks, n, {}}; }
  static RowSelection list(std::vector<uint32_t> rows) {
    return {Kind::list, 0, std::move(rows)};
  }
};

struct CampaignSpec {
  Experiment experiment = Experiment::ber;
  uint32_t chip_id = 0;
  Address bank;  // channel/pseudo-channel/bank under test
  RowSelection rows;
  std::vector<std::string> patterns = {"rowstripe0", "rowstripe1", "checkered0", "checkered1"};
  uint64_t hammer_count = 256000;  // per aggressor
  double taggon_ns = 0.0;          // 0 = tRAS
  std::vector<double> taggon_list_ns;  // rowpress sweeps
  uint32_t repetitions = 5;
  uint64_t hc_start = 8192;
  uint64_t hc_cap = 512000;
  uint64_t hc_resolution = 256;
  uint32_t hcnth_n = 10;
  std::vector<uint32_t> bypass_dummies = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<uint64_t> bypass_agg_hc = {18, 24, 30, 34};
  bool retention_subtract = true;
  bool keep_flip_maps = false;
  uint64_t seed = 1;
  uint32_t jobs = 1;

  void validate(const Geometry& g) const;
};

struct BerRecord {
  uint64_t seed = 0;
  uint32_t chip = 0, channel = 0, pch = 0, bank = 0, row = 0;
  std::string pattern;
  uint64_t hc = 0;
  double taggon_ns = 0.0;
  double bitflips = 0.0;  // mean over repetitions
  double ber = 0.0;
  uint32_t repetition = 0;  // raw records only
};

struct HcRecord {
  uint64_t seed = 0;
  uint32_t chip = 0, channel = 0, pch = 0, bank = 0, row = 0;
  std::string pattern;
  double taggon_ns = 0.0;
  // hc[n-1] = hammer count for the n-th bitflip; -1 when not reachable
  // below the cap ("partial"/"above cap").
  std::array<double, 10> hc{};
  bool partial = false;
};

struct BypassRecord {
  uint32_t dummies = 0;
  uint64_t agg_hc = 0;
  uint32_t row = 0;
  double ber = 0.0;
};

struct CampaignResult {
  std::vector<BerRecord> ber;
  std::vector<BerRecord> ber_raw;  // per-repetition
  std::vector<HcRecord> hc;
  std::vector<std::vector<uint64_t>> flip_maps;  // kept for ecc_hist
  std::vector<BypassRecord> bypass;
  std::map<std::string, uint64_t> ecc_histogram;

  std::string ber_csv() const;
  std::string ber_raw_csv() const;
  std::string hc_csv() const;
  std::string bypass_csv() const;
  std::string ecc_csv() const;
};

// Shared immutable context for one campaign: config plus the lazily
// materialized fault model all grid-cell devices clone from.
struct CampaignContext {
  DeviceConfig config;
  std::shared_ptr<const FaultModel> model;

  explicit CampaignContext(DeviceConfig cfg)
      : config(std::move(cfg)),
        model(std::make_shared<FaultModel>(config.geometry, config.layout, config.profile,
                                           config.seed)) {}
  Device make_device() const { return Device(config, model); }
};

// --- measurement primitives ---

// Initializes victim, aggressors and far rows per the data pattern,
// hammers double-sided, and returns the victim flip count (or mask).
uint64_t ber_trial(const CampaignContext& ctx, const CampaignSpec& spec, uint32_t row,
                   const DataPattern& pattern, uint64_t hc, double t_on_ns, uint64_t nonce,
                   std::vector<uint64_t>* mask_out = nullptr);

// Exponential ramp + bisection for the smallest hammer count flipping at
// least `nth` cells; per-repetition values via raw_out, reported value is
// the minimum across repetitions. nullopt = above cap.
std::optional<uint64_t> find_hc_nth(const CampaignContext& ctx, const CampaignSpec& spec,
                                    uint32_t row, const DataPattern& pattern, double t_on_ns,
                                    uint32_t nth, uint64_t resolution,
                                    std::vector<uint64_t>* raw_out = nullptr,
                                    uint64_t nonce_salt = 0);
std::optional<uint64_t> find_hcfirst(const CampaignContext& ctx, const CampaignSpec& spec,
                                     uint32_t row, const DataPattern& pattern, double t_on_ns,
                                     std::vector<uint64_t>* raw_out = nullptr);

// --- campaigns ---

CampaignResult run_ber(const CampaignContext& ctx, const CampaignSpec& spec);
CampaignResult run_hcfirst(const CampaignContext& ctx, const CampaignSpec& spec);
CampaignResult run_hcnth(const CampaignContext& ctx, const CampaignSpec& spec);
CampaignResult run_rowpress_ber(const CampaignContext& ctx, const CampaignSpec& spec);
CampaignResult run_rowpress_hcfirst(const CampaignContext& ctx, const CampaignSpec& spec);
CampaignResult run_bypass_campaign(const CampaignContext& ctx, const CampaignSpec& spec);
CampaignResult run_campaign(const CampaignContext& ctx, const CampaignSpec& spec);

// Maximum ACT commands between two REFs: floor((tREFI - tRFC) / tRC).
uint64_t compute_act_budget(const TimingParams& t);

// Bypass access pattern: per tREFI interval, each dummy row activated
// floor((budget - 2*agg_hc)/dummies) times, then alternating double-sided
// aggressor activations, then REF; repeated `intervals` times. The trace
// passes strict validation under the given timing.
std::vector<Command> synthesize_bypass(const TimingParams& timing, const Address& bank,
                                       uint32_t victim_row,
                                       const std::vector<uint32_t>& aggressor_rows,
                                       const std::vector<uint32_t>& dummy_rows, uint64_t agg_hc,
                                       uint64_t budget, uint64_t intervals);

// Word-level multiplicity histogram over non-overlapping words; buckets
// "1".."7" and ">7".
std::map<std::string, uint64_t> word_histogram(const std::vector<std::vector<uint64_t>>& flip_maps,
                                               uint32_t row_bits, uint32_t word_bits = 64);

// Worst-case data pattern per row: smallest HCfirst, ties by largest
// BER at the reference hammer count, then canonical pattern order.
struct PatternStats {
  std::optional<uint64_t> hcfirst;
  double ber = 0.0;
};
std::string wcdp_select(const std::map<std::string, PatternStats>& per_pattern);

}  // namespace hbmrd
