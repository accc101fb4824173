// hbmrd: HBM2 read-disturbance laboratory CLI.
//
// Subcommands:
//   simulate        replay a command trace and log victim reads
//   characterize    ber | hcfirst | hcnth | rowpress | rowpress-hcfirst
//   probe           black-box TRR inference via the retention side channel
//   bypass          TRR bypass pattern campaign
//   ecc-hist        word-level bitflip multiplicity histogram
//   fit-profile     calibrate a fault profile against an anchor CSV
//   validate-trace  timing-check a trace file
//
// Exit codes: 0 ok, 2 config error, 3 campaign error, 4 timing violation.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hbmrd/campaign.hpp"
#include "hbmrd/config.hpp"
#include "hbmrd/fit.hpp"
#include "hbmrd/probe.hpp"

using namespace hbmrd;

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw CampaignError("cannot write " + path);
  out << content;
}

int run_simulate(const RunConfig& cfg) {
  if (cfg.trace_file.empty())
    throw ConfigError("simulate: no trace file ([simulate] trace or --trace)");
  std::vector<Command> trace = parse_trace_file(cfg.trace_file);
  Device dev(cfg.device);
  EventSink events;
  std::ostringstream log;
  log << "time_ns,kind,channel,pch,bank,physical_row,t_on_ns\n";
  for (const Command& c : trace) {
    events.clear();
    dev.issue(c, &events);
    for (const IssueEvent& e : events) {
      const char* kind = e.kind == IssueEvent::Kind::violation ? "violation"
                         : e.kind == IssueEvent::Kind::row_close ? "row_close"
                         : e.kind == IssueEvent::Kind::trr_victim_refresh ? "trr_refresh"
                                                                          : "segment_refresh";
      log << c.issue_time_ns << "," << kind << "," << e.channel << "," << e.pseudo_channel << ","
          << e.bank << "," << e.physical_row << "," << e.t_on_ns << "\n";
    }
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/events.csv", log.str());
  write_manifest(cfg.out_dir, cfg);
  std::cout << "simulated " << trace.size() << " commands, events at " << cfg.out_dir
            << "/events.csv\n";
  return 0;
}

int run_characterize(const RunConfig& cfg) {
  CampaignContext ctx(cfg.device);
  CampaignResult result = run_campaign(ctx, cfg.campaign);
  std::filesystem::create_directories(cfg.out_dir);
  if (!result.ber.empty()) write_file(cfg.out_dir + "/ber.csv", result.ber_csv());
  if (!result.ber_raw.empty()) write_file(cfg.out_dir + "/ber_raw.csv", result.ber_raw_csv());
  if (!result.hc.empty()) write_file(cfg.out_dir + "/hc.csv", result.hc_csv());
  if (!result.bypass.empty()) write_file(cfg.out_dir + "/bypass.csv", result.bypass_csv());
  if (!result.ecc_histogram.empty()) write_file(cfg.out_dir + "/ecc.csv", result.ecc_csv());
  write_manifest(cfg.out_dir, cfg);
  std::cout << to_string(cfg.campaign.experiment) << " campaign done, outputs in " << cfg.out_dir
            << "\n";
  return 0;
}

int run_probe(const RunConfig& cfg) {
  DeviceConfig dev_cfg = cfg.device;
  dev_cfg.permissive = true;  // probes run with periodic refresh withheld
  ProbeSurface surface([dev_cfg] { return std::make_unique<Device>(dev_cfg); });
  TrrFindings findings = infer_trr(surface);
  std::filesystem::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/findings.csv", findings.csv());
  write_file(cfg.out_dir + "/findings.txt", findings.report());
  write_manifest(cfg.out_dir, cfg);
  std::cout << findings.report();
  return 0;
}

int run_fit(const RunConfig& cfg, const std::string& anchors_path) {
  AnchorSet anchors =
      anchors_path.empty() ? default_anchor_set() : parse_anchors_file(anchors_path);
  FaultProfile profile = fit_profile(anchors, cfg.seed.value_or(1));
  std::filesystem::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/profile.cfg", serialize_profile_section(profile));
  std::cout << "fitted profile written to " << cfg.out_dir << "/profile.cfg\n";
  return 0;
}

int run_validate(const RunConfig& cfg) {
  std::vector<Command> trace = parse_trace_file(cfg.trace_file);
  ViolationReport report = validate_trace(cfg.device.geometry, cfg.device.timing, trace);
  if (report.clean()) {
    std::cout << "trace ok: " << trace.size() << " commands, no violations\n";
    return 0;
  }
  for (const Violation& v : report.violations)
    std::cout << "violation at command " << v.command_index << ": " << v.parameter << " ("
              << v.detail << ")\n";
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hbmrd: HBM2 read-disturbance laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, trace_path, anchors_path, characterize_what;
  uint64_t seed = 0;
  bool seed_set = false;
  uint32_t jobs = 0;
  bool paper_scale = false, trr_hidden = false, permissive = false;

  app.add_option("--config", config_path, "config file (key = value sections)");
  app.add_option("--seed", seed, "global seed (overrides config)")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "max concurrent device instances");
  app.add_flag("--paper-scale", paper_scale, "use full Table-II row counts");
  app.add_flag("--trr-hidden", trr_hidden, "withhold the TRR section from logs/manifest");
  app.add_flag("--permissive-timing", permissive, "log timing violations instead of failing");

  auto* sim = app.add_subcommand("simulate", "replay a command trace");
  sim->add_option("trace", trace_path, "trace file");
  auto* charac = app.add_subcommand("characterize", "run a characterization campaign");
  charac->add_option("what", characterize_what,
                     "ber | hcfirst | hcnth | rowpress | rowpress-hcfirst")
      ->required();
  app.add_subcommand("probe", "black-box TRR inference");
  app.add_subcommand("bypass", "TRR bypass campaign");
  app.add_subcommand("ecc-hist", "word-level bitflip histogram");
  auto* fit = app.add_subcommand("fit-profile", "calibrate a fault profile");
  fit->add_option("anchors", anchors_path, "anchor CSV (anchor_name,value,tolerance)");
  auto* validate = app.add_subcommand("validate-trace", "timing-check a trace file");
  validate->add_option("trace", trace_path, "trace file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (jobs > 0) cfg.jobs = jobs;
    if (paper_scale) cfg.paper_scale = true;
    if (trr_hidden) cfg.trr_hidden = true;
    if (permissive) cfg.device.permissive = true;
    if (!trace_path.empty()) cfg.trace_file = trace_path;

    if (app.got_subcommand("validate-trace")) {
      // validation is pure; geometry/timing come from the config defaults
      return run_validate(cfg);
    }
    if (app.got_subcommand("fit-profile")) {
      if (!cfg.seed) cfg.seed = 1;
      return run_fit(cfg, anchors_path);
    }

    if (app.got_subcommand("characterize")) {
      std::string what = characterize_what == "rowpress" ? "rowpress_ber"
                         : characterize_what == "rowpress-hcfirst" ? "rowpress_hcfirst"
                                                                   : characterize_what;
      cfg.campaign.experiment = experiment_from_string(what);
      if (cfg.campaign.experiment == Experiment::rowpress_ber ||
          cfg.campaign.experiment == Experiment::rowpress_hcfirst) {
        if (cfg.campaign.rows.kind == RowSelection::Kind::stride &&
            cfg.campaign.rows.count == 384)
          cfg.campaign.rows = RowSelection::blocks(
              default_row_count(Experiment::rowpress_ber, cfg.paper_scale));
        if (cfg.campaign.experiment == Experiment::rowpress_hcfirst) {
          cfg.campaign.rows =
              RowSelection::first(default_row_count(Experiment::rowpress_hcfirst, cfg.paper_scale));
          cfg.campaign.hammer_count = 150000;
        } else {
          cfg.campaign.hammer_count = 150000;
        }
      } else if (cfg.campaign.rows.kind == RowSelection::Kind::stride &&
                 cfg.campaign.rows.count == 384) {
        cfg.campaign.rows =
            RowSelection::stride(default_row_count(cfg.campaign.experiment, cfg.paper_scale));
      }
    } else if (app.got_subcommand("bypass")) {
      cfg.campaign.experiment = Experiment::bypass;
      if (cfg.campaign.rows.kind == RowSelection::Kind::stride && cfg.campaign.rows.count == 384)
        cfg.campaign.rows =
            RowSelection::first(default_row_count(Experiment::bypass, cfg.paper_scale));
      if (cfg.campaign.repetitions == 5) cfg.campaign.repetitions = 1;
    } else if (app.got_subcommand("ecc-hist")) {
      cfg.campaign.experiment = Experiment::ecc_hist;
      cfg.campaign.keep_flip_maps = true;
    }

    cfg.finalize();

    if (app.got_subcommand("simulate")) return run_simulate(cfg);
    if (app.got_subcommand("probe")) return run_probe(cfg);
    return run_characterize(cfg);
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TimingError& e) {
    std::cerr << "timing violation: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "campaign error: " << e.what() << "\n";
    return 3;
  }
}
