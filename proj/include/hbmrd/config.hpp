#pragma once

#include <optional>
#include <string>

#include "hbmrd/campaign.hpp"
#include "hbmrd/device.hpp"

namespace hbmrd {

// Resolved run configuration: device + campaign + run options. The
// on-disk format is line-oriented `key = value` under `[section]`
// headers; unknown keys and duplicate keys are parse errors that name
// the offending line.
struct RunConfig {
  DeviceConfig device;
  CampaignSpec campaign;
  std::optional<uint64_t> seed;  // mandatory before a run starts
  std::string out_dir = "out";
  uint32_t jobs = 1;
  bool paper_scale = false;
  bool trr_hidden = false;

  // profile source bookkeeping ("default", "file", "inline")
  std::string profile_source = "default";
  std::string profile_file;

  std::string trace_file;  // simulate / validate-trace input

  void finalize();  // applies seed/jobs into subordinate specs, validates
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Full resolved-config dump (parseable by parse_config_text); used as
// the body of the run manifest.
std::string serialize_config(const RunConfig& cfg);

std::string serialize_profile_section(const FaultProfile& p);

// Deterministic 64-bit FNV-1a over the serialized config.
uint64_t config_hash(const RunConfig& cfg);

// manifest.txt: serialized config + hash + versions; sufficient to
// reproduce the run bit-exactly.
void write_manifest(const std::string& dir, const RunConfig& cfg,
                    const std::string& extra = "");

// Desk-scale vs paper-scale row counts per experiment.
uint32_t default_row_count(Experiment e, bool paper_scale);

}  // namespace hbmrd
