#include "hbmrd/timing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hbmrd {

namespace {
constexpr double kEps = 1e-6;  // slack for >= comparisons on the ns scale
}

void TimingParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("timing: ") + name + " must be positive");
  };
  positive(clock_period_ns, "clock_period_ns");
  positive(tras_ns, "tRAS");
  positive(trp_ns, "tRP");
  positive(trcd_ns, "tRCD");
  positive(trc_ns, "tRC");
  positive(trfc_ns, "tRFC");
  positive(trefi_ns, "tREFI");
  positive(trefw_ms, "tREFW");
  if (trc_ns + kEps < tras_ns + trp_ns)
    throw ConfigError("timing: tRC must be >= tRAS + tRP");
  if (trfc_ns >= trefi_ns)
    throw ConfigError("timing: tRFC must be smaller than tREFI");
  if (trefw_ns() < trefi_ns)
    throw ConfigError("timing: tREFW must cover at least one tREFI");
}

const char* to_string(CommandKind k) {
  switch (k) {
    case CommandKind::ACT: return "ACT";
    case CommandKind::PRE: return "PRE";
    case CommandKind::RD: return "RD";
    case CommandKind::WR: return "WR";
    case CommandKind::REF: return "REF";
  }
  return "???";
}

ProtocolChecker::ProtocolChecker(const Geometry& g, const TimingParams& t)
    : geometry_(g), timing_(t) {
  banks_.resize(g.banks_total());
  uint32_t pchs = g.channels * g.pseudo_channels_per_channel;
  last_ref_ns_.assign(pchs, 0.0);
  postponed_refs_.assign(pchs, 0);
  saw_ref_.assign(pchs, false);
}

ProtocolChecker::BankView& ProtocolChecker::bank(const Address& a) {
  return banks_[bank_index(geometry_, a)];
}

std::vector<Violation> ProtocolChecker::step(const Command& cmd, size_t index) {
  std::vector<Violation> out;
  auto flag = [&](const char* param, std::string detail) {
    out.push_back(Violation{index, param, std::move(detail)});
  };

  const double now = cmd.issue_time_ns;
  if (now + kEps < last_time_)
    flag("time-order", "issue time moves backward");
  last_time_ = std::max(last_time_, now);

  check_address(geometry_, cmd.address);

  switch (cmd.kind) {
    case CommandKind::ACT: {
      BankView& b = bank(cmd.address);
      if (b.open_row)
        flag("bank-state", "ACT on open bank (row " + std::to_string(*b.open_row) + ")");
      if (now + kEps < b.last_act_ns + timing_.trc_ns)
        flag("tRC", "ACT-to-ACT gap below tRC");
      b.open_row = cmd.address.row;
      b.last_act_ns = now;
      break;
    }
    case CommandKind::PRE: {
      BankView& b = bank(cmd.address);
      if (!b.open_row) {
        flag("bank-state", "PRE on closed bank");
      } else {
        if (now + kEps < b.last_act_ns + timing_.tras_ns)
          flag("tRAS", "row closed before tRAS elapsed");
        b.open_row.reset();
      }
      break;
    }
    case CommandKind::RD:
    case CommandKind::WR: {
      BankView& b = bank(cmd.address);
      if (!b.open_row || *b.open_row != cmd.address.row)
        flag("open-row", "RD/WR without matching open row");
      break;
    }
    case CommandKind::REF: {
      uint32_t pch =
          cmd.address.channel * geometry_.pseudo_channels_per_channel + cmd.address.pseudo_channel;
      // All banks of the pseudo channel must be closed.
      for (uint32_t bk = 0; bk < geometry_.banks_per_pseudo_channel; ++bk) {
        Address a = cmd.address;
        a.bank = bk;
        a.row = 0;
        if (bank(a).open_row) {
          flag("ref-open-row", "REF with open row in bank " + std::to_string(bk));
          break;
        }
      }
      double gap = now - last_ref_ns_[pch];  // device starts freshly refreshed at t=0
      if (gap > timing_.max_ref_gap_ns() + kEps) {
        flag("9*tREFI", "inter-REF gap exceeds 9*tREFI");
      } else {
        long long skipped = std::llround(gap / timing_.trefi_ns);
        long long debt = (long long)postponed_refs_[pch] + skipped - 1;
        if (debt > (long long)timing_.max_postponed_refs)
          flag("tREFI-postponement", "more than max_postponed_refs REFs outstanding");
        postponed_refs_[pch] =
            (uint32_t)std::clamp<long long>(debt, 0, timing_.max_postponed_refs);
      }
      last_ref_ns_[pch] = now;
      saw_ref_[pch] = true;
      break;
    }
  }
  return out;
}

ViolationReport validate_trace(const Geometry& g, const TimingParams& t,
                               const std::vector<Command>& trace) {
  ProtocolChecker checker(g, t);
  ViolationReport report;
  for (size_t i = 0; i < trace.size(); ++i) {
    auto v = checker.step(trace[i], i);
    report.violations.insert(report.violations.end(), v.begin(), v.end());
  }
  return report;
}

std::string format_trace(const std::vector<Command>& trace) {
  std::string out;
  char line[128];
  for (const Command& c : trace) {
    const Address& a = c.address;
    if (c.kind == CommandKind::REF) {
      std::snprintf(line, sizeof line, "%.2f REF %u %u %u\n", c.issue_time_ns, a.channel,
                    a.pseudo_channel, a.bank);
    } else {
      std::snprintf(line, sizeof line, "%.2f %s %u %u %u %u\n", c.issue_time_ns,
                    to_string(c.kind), a.channel, a.pseudo_channel, a.bank, a.row);
    }
    out += line;
  }
  return out;
}

std::vector<Command> parse_trace(std::istream& in) {
  std::vector<Command> trace;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t;
    std::string kind;
    if (!(ls >> t >> kind))
      throw ParseError("trace line " + std::to_string(lineno) + ": malformed");
    Command c;
    c.issue_time_ns = t;
    Address& a = c.address;
    if (kind == "REF") {
      c.kind = CommandKind::REF;
      if (!(ls >> a.channel >> a.pseudo_channel >> a.bank))
        throw ParseError("trace line " + std::to_string(lineno) + ": REF needs ch pch bank");
    } else {
      if (kind == "ACT") c.kind = CommandKind::ACT;
      else if (kind == "PRE") c.kind = CommandKind::PRE;
      else if (kind == "RD") c.kind = CommandKind::RD;
      else if (kind == "WR") c.kind = CommandKind::WR;
      else throw ParseError("trace line " + std::to_string(lineno) + ": unknown command " + kind);
      if (!(ls >> a.channel >> a.pseudo_channel >> a.bank >> a.row))
        throw ParseError("trace line " + std::to_string(lineno) + ": needs ch pch bank row");
    }
    trace.push_back(c);
  }
  return trace;
}

std::vector<Command> parse_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file: " + path);
  return parse_trace(in);
}

void write_trace_file(const std::string& path, const std::vector<Command>& trace) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write trace file: " + path);
  out << format_trace(trace);
}

}  // namespace hbmrd
