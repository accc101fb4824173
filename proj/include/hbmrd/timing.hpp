#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hbmrd/geometry.hpp"

namespace hbmrd {

// HBM2 protocol timings in nanoseconds. tRC and tRFC are not published
// for the tested parts; the defaults are reverse-fit so that the
// activation budget floor((tREFI - tRFC) / tRC) comes out at exactly 78.
struct TimingParams {
  double clock_period_ns = 1.67;
  double tras_ns = 29.0;
  double trp_ns = 17.6;
  double trcd_ns = 14.2;
  double trc_ns = 46.6;
  double trfc_ns = 260.0;
  double trefi_ns = 3900.0;
  double trefw_ms = 32.0;
  uint32_t max_postponed_refs = 8;

  void validate() const;

  double trefw_ns() const { return trefw_ms * 1e6; }
  double max_ref_gap_ns() const { return (max_postponed_refs + 1) * trefi_ns; }
  // Number of REF commands in one refresh window.
  uint64_t refs_per_window() const { return uint64_t(trefw_ns() / trefi_ns); }
  // Rows refreshed per bank per REF (round-robin segment).
  uint32_t rows_per_ref(uint32_t rows_per_bank) const {
    uint64_t window = refs_per_window();
    return uint32_t((rows_per_bank + window - 1) / window);
  }
  // Quantize a time stamp to the interface clock grid.
  double quantize(double t_ns) const {
    return clock_period_ns * static_cast<double>(std::llround(t_ns / clock_period_ns));
  }
};

enum class CommandKind { ACT, PRE, RD, WR, REF };

const char* to_string(CommandKind k);

// One DRAM command. REF is scoped per pseudo channel (all banks); its
// bank/row fields are carried but not interpreted.
struct Command {
  CommandKind kind = CommandKind::ACT;
  Address address;
  double issue_time_ns = 0.0;

  static Command act(Address a, double t) { return {CommandKind::ACT, a, t}; }
  static Command pre(Address a, double t) { return {CommandKind::PRE, a, t}; }
  static Command rd(Address a, double t) { return {CommandKind::RD, a, t}; }
  static Command wr(Address a, double t) { return {CommandKind::WR, a, t}; }
  static Command ref(uint32_t ch, uint32_t pch, double t) {
    return {CommandKind::REF, Address{ch, pch, 0, 0, 0}, t};
  }
};

struct Violation {
  size_t command_index;
  std::string parameter;  // e.g. "tRAS", "9*tREFI"
  std::string detail;
};

struct ViolationReport {
  std::vector<Violation> violations;
  bool clean() const { return violations.empty(); }
};

// Sequential protocol checker. The strict device path and validate_trace
// both run commands through this one implementation.
class ProtocolChecker {
 public:
  ProtocolChecker(const Geometry& g, const TimingParams& t);

  // Returns violations triggered by this command (empty when legal).
  std::vector<Violation> step(const Command& cmd, size_t index);

 private:
  struct BankView {
    std::optional<uint32_t> open_row;
    double last_act_ns = -1e18;
  };
  const Geometry geometry_;
  const TimingParams timing_;
  std::vector<BankView> banks_;
  std::vector<double> last_ref_ns_;       // per pseudo channel
  std::vector<uint32_t> postponed_refs_;  // per pseudo channel
  std::vector<bool> saw_ref_;
  double last_time_ = 0.0;

  BankView& bank(const Address& a);
};

// Pure trace validation: every violation with command index and the
// violated parameter name.
ViolationReport validate_trace(const Geometry& g, const TimingParams& t,
                               const std::vector<Command>& trace);

// Trace file format, one command per line:
//   <time_ns> <KIND> <ch> <pch> <bank> <row>
// REF lines omit the row. Times are printed on the clock grid with two
// decimals so emit/parse round-trips bit-exactly.
std::string format_trace(const std::vector<Command>& trace);
std::vector<Command> parse_trace(std::istream& in);
std::vector<Command> parse_trace_file(const std::string& path);
void write_trace_file(const std::string& path, const std::vector<Command>& trace);

}  // namespace hbmrd
