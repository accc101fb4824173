#pragma once

#include <stdexcept>
#include <string>

namespace hbmrd {

// Invalid geometry, timing, layout, profile or TRR parameters.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-range channel/pseudo-channel/bank/row/bit index.
struct AddressError : std::runtime_error {
  explicit AddressError(const std::string& msg) : std::runtime_error(msg) {}
};

// Strict-mode protocol violation; names the violated parameter.
struct TimingError : std::runtime_error {
  explicit TimingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Campaign precondition failures (infeasible budget split, missing data...).
struct CampaignError : std::runtime_error {
  explicit CampaignError(const std::string& msg) : std::runtime_error(msg) {}
};

// fit_profile given unusable anchors.
struct CalibrationError : std::runtime_error {
  explicit CalibrationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Config file syntax/semantic errors; message carries the line number.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hbmrd
