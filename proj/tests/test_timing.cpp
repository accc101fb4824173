#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hbmrd/device.hpp"
#include "hbmrd/rng.hpp"
#include "hbmrd/timing.hpp"

using namespace hbmrd;

TEST_CASE("default timing invariants") {
  TimingParams t;
  CHECK_NOTHROW(t.validate());
  CHECK(t.trc_ns == doctest::Approx(t.tras_ns + t.trp_ns));
  CHECK(uint64_t(std::floor((t.trefi_ns - t.trfc_ns) / t.trc_ns)) == 78);
  CHECK(t.max_ref_gap_ns() == doctest::Approx(9 * t.trefi_ns));
  CHECK(t.refs_per_window() == 8205);
  // ceil(16384 / 8205) = 2 rows refreshed per bank per REF
  CHECK(t.rows_per_ref(16384) == 2);
  CHECK(t.rows_per_ref(4) * 4 >= 4);
}

TEST_CASE("timing validation errors") {
  TimingParams t;
  t.trc_ns = t.tras_ns;  // < tRAS + tRP
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TimingParams{};
  t.trfc_ns = t.trefi_ns;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("ACT then PRE at tRAS is legal and reports the on-time") {
  DeviceConfig cfg;
  cfg.seed = 1;
  Device dev(cfg);
  Address a{0, 0, 0, 10, 0};
  EventSink events;
  dev.issue(Command::act(a, 0.0), &events);
  dev.issue(Command::pre(a, 29.0), &events);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == IssueEvent::Kind::row_close);
  CHECK(events[0].t_on_ns == doctest::Approx(29.0));
}

TEST_CASE("PRE before tRAS violates tRAS in strict mode") {
  DeviceConfig cfg;
  Device dev(cfg);
  Address a{0, 0, 0, 10, 0};
  dev.issue(Command::act(a, 0.0));
  CHECK_THROWS_AS(dev.issue(Command::pre(a, 10.0)), TimingError);
}

TEST_CASE("row may stay open for the maximal 35.1 us with REFs postponed") {
  Geometry g;
  TimingParams t;
  std::vector<Command> trace;
  Address a{0, 0, 0, 10, 0};
  trace.push_back(Command::act(a, 0.0));
  trace.push_back(Command::pre(a, 35100.0));
  trace.push_back(Command::ref(0, 0, 35120.0));  // gap 35.12us <= 9*tREFI+slack? -> 35100 is limit
  ViolationReport r = validate_trace(g, t, {trace[0], trace[1]});
  CHECK(r.clean());
}

TEST_CASE("strict-mode errors cover the protocol rules") {
  DeviceConfig cfg;
  Device dev(cfg);
  Address a{0, 0, 0, 10, 0};
  Address b{0, 0, 0, 20, 0};

  SUBCASE("ACT on open bank") {
    dev.issue(Command::act(a, 0.0));
    CHECK_THROWS_AS(dev.issue(Command::act(b, 50.0)), TimingError);
  }
  SUBCASE("PRE on closed bank") {
    CHECK_THROWS_AS(dev.issue(Command::pre(a, 0.0)), TimingError);
  }
  SUBCASE("ACT-to-ACT below tRC") {
    dev.issue(Command::act(a, 0.0));
    dev.issue(Command::pre(a, 29.0));
    CHECK_THROWS_AS(dev.issue(Command::act(a, 40.0)), TimingError);
  }
  SUBCASE("REF with open row") {
    dev.issue(Command::act(a, 0.0));
    CHECK_THROWS_AS(dev.issue(Command::ref(0, 0, 100.0)), TimingError);
  }
  SUBCASE("inter-REF gap beyond 9*tREFI") {
    dev.issue(Command::ref(0, 0, 3900.0));
    CHECK_THROWS_AS(dev.issue(Command::ref(0, 0, 3900.0 + 40000.0)), TimingError);
  }
}

TEST_CASE("permissive mode logs violations but executes") {
  DeviceConfig cfg;
  cfg.permissive = true;
  Device dev(cfg);
  Address a{0, 0, 0, 10, 0};
  EventSink events;
  dev.issue(Command::act(a, 0.0), &events);
  dev.issue(Command::pre(a, 5.0), &events);  // tRAS violation
  bool saw_violation = false;
  for (const IssueEvent& e : events)
    if (e.kind == IssueEvent::Kind::violation && e.violation.parameter == "tRAS")
      saw_violation = true;
  CHECK(saw_violation);
}

TEST_CASE("validate_trace basics") {
  Geometry g;
  TimingParams t;
  CHECK(validate_trace(g, t, {}).clean());

  // two REFs 40us apart exceed the 9*tREFI limit
  std::vector<Command> trace = {Command::ref(0, 0, 3900.0), Command::ref(0, 0, 43900.0)};
  ViolationReport r = validate_trace(g, t, trace);
  REQUIRE(!r.clean());
  CHECK(r.violations[0].parameter == "9*tREFI");
  CHECK(r.violations[0].command_index == 1);
}

TEST_CASE("postponed REFs must be compensated") {
  Geometry g;
  TimingParams t;
  // A 9*tREFI gap is legal once (8 postponed), but a second long gap
  // right after is not.
  std::vector<Command> trace = {Command::ref(0, 0, 9 * 3900.0),
                                Command::ref(0, 0, 9 * 3900.0 + 5 * 3900.0)};
  ViolationReport r = validate_trace(g, t, trace);
  REQUIRE(!r.clean());
  CHECK(r.violations[0].parameter == "tREFI-postponement");

  // catching up with sub-tREFI gaps clears the debt
  std::vector<Command> ok = {Command::ref(0, 0, 9 * 3900.0)};
  for (int i = 1; i <= 8; ++i)
    ok.push_back(Command::ref(0, 0, 9 * 3900.0 + i * 100.0));
  ok.push_back(Command::ref(0, 0, 9 * 3900.0 + 8 * 100.0 + 3900.0));
  CHECK(validate_trace(g, t, ok).clean());
}

TEST_CASE("strict acceptance implies a clean validate_trace report") {
  // Property: generate random state-valid traces; if the strict device
  // accepts every command, validate_trace must agree, and vice versa.
  Geometry g = DeviceConfig::miniature(16).geometry;
  SubarrayLayout layout = SubarrayLayout::single(16);
  for (uint64_t trial = 0; trial < 200; ++trial) {
    std::vector<Command> trace;
    double t_now = 0.0;
    bool open = false;
    double open_since = 0.0;
    uint64_t h = rng::hash(999, rng::kTraceGen, trial);
    for (int i = 0; i < 40; ++i) {
      h = rng::combine(h, i);
      t_now += 1.0 + double(h % 400);
      Address a{0, 0, 0, uint32_t(rng::combine(h, 1) % 16), 0};
      switch (rng::combine(h, 2) % 4) {
        case 0:
          if (!open) {
            trace.push_back(Command::act(a, t_now));
            open = true;
            open_since = t_now;
          }
          break;
        case 1:
          if (open) {
            trace.push_back(Command::pre(a, t_now));
            open = false;
          }
          break;
        case 2:
          if (!open) trace.push_back(Command::ref(0, 0, t_now));
          break;
        default:
          break;
      }
      (void)open_since;
    }
    ViolationReport report = validate_trace(g, TimingParams{}, trace);

    DeviceConfig cfg = DeviceConfig::miniature(16);
    cfg.profile = FaultProfile::zero_disturbance();
    Device dev(cfg);
    bool strict_ok = true;
    try {
      dev.issue_all(trace);
    } catch (const TimingError&) {
      strict_ok = false;
    }
    CHECK(strict_ok == report.clean());
  }
}

TEST_CASE("trace files round-trip bit-exactly") {
  std::vector<Command> trace = {
      Command::act(Address{1, 0, 3, 42, 0}, 0.0),
      Command::pre(Address{1, 0, 3, 42, 0}, 30.06),
      Command::wr(Address{1, 0, 3, 42, 0}, 100.02),
      Command::rd(Address{1, 0, 3, 42, 0}, 150.3),
      Command::ref(1, 0, 3900.0),
  };
  std::string text = format_trace(trace);
  std::istringstream in(text);
  std::vector<Command> parsed = parse_trace(in);
  REQUIRE(parsed.size() == trace.size());
  CHECK(format_trace(parsed) == text);
  for (size_t i = 0; i < trace.size(); ++i) {
    CHECK(parsed[i].kind == trace[i].kind);
    CHECK(parsed[i].address.row == trace[i].address.row);
  }
  // REF line omits the row
  CHECK(text.find("3900.00 REF 1 0 0\n") != std::string::npos);
}

TEST_CASE("refresh segment walks all rows round-robin") {
  // miniature device with 4 rows and a 4-REF window refreshes 1 row per REF
  DeviceConfig cfg = DeviceConfig::miniature(4);
  cfg.profile = FaultProfile::zero_disturbance();
  cfg.timing.trefw_ms = 4 * cfg.timing.trefi_ns / 1e6;
  Device dev(cfg);
  CHECK(cfg.timing.rows_per_ref(4) == 1);
  EventSink events;
  for (int i = 1; i <= 4; ++i)
    dev.issue(Command::ref(0, 0, i * cfg.timing.trefi_ns), &events);
  std::set<uint32_t> refreshed;
  for (const IssueEvent& e : events)
    if (e.kind == IssueEvent::Kind::segment_refresh) refreshed.insert(e.physical_row);
  CHECK(refreshed == std::set<uint32_t>{0, 1, 2, 3});
}

TEST_CASE("default device: every row refreshed within 8205 REFs") {
  TimingParams t;
  uint32_t rpr = t.rows_per_ref(16384);
  // after 8205 consecutive REFs every row index has been covered
  CHECK(uint64_t(rpr) * 8205 >= 16384);
}
