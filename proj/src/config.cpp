#include "hbmrd/config.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace hbmrd {

namespace {

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ParsedFile {
  // section -> key -> (value, line number)
  std::map<std::string, std::map<std::string, std::pair<std::string, size_t>>> sections;

  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
  }
  std::string get(const std::string& sec, const std::string& key) const {
    return sections.at(sec).at(key).first;
  }
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

ParsedFile tokenize(const std::string& text) {
  ParsedFile out;
  std::istringstream in(text);
  std::string line, section;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ParseError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      out.sections[section];  // allow empty sections
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": key outside any section");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    auto& sec = out.sections[section];
    if (sec.count(key))
      throw ParseError("config line " + std::to_string(lineno) + ": duplicate key '" + key +
                       "' (first at line " + std::to_string(sec[key].second) + ")");
    sec[key] = {value, lineno};
  }
  return out;
}

uint64_t parse_u64(const std::string& sec, const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t out = std::stoull(v, &pos, 0);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (...) {
    throw ParseError("config: [" + sec + "] " + key + ": not an integer: '" + v + "'");
  }
}

double parse_f64(const std::string& sec, const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (...) {
    throw ParseError("config: [" + sec + "] " + key + ": not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& sec, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ParseError("config: [" + sec + "] " + key + ": not a boolean: '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// Per-section known-key whitelists; anything else is a parse error.
const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"run", {"seed", "out", "jobs", "paper_scale", "trr_hidden", "permissive"}},
      {"device",
       {"channels", "pseudo_channels", "banks", "rows", "row_bits", "mapping", "mapping_group",
        "mapping_mask", "subarrays", "write_byte"}},
      {"timing",
       {"clock_period_ns", "tras_ns", "trp_ns", "trcd_ns", "trc_ns", "trfc_ns", "trefi_ns",
        "trefw_ms", "max_postponed_refs"}},
      {"profile",
       {"source", "file", "hc_floor", "hc_log_median", "hc_log_sigma", "hc_cap",
        "floor_row_rate", "hot_row_rate", "beta_min", "beta_max", "beta_spread_exp",
        "beta_row_coupling", "hot_forced_cells_per_class", "hot_bulk_scale",
        "hot_forced_exposure", "hot_forced_band_lo", "hot_forced_band_hi", "bulk_log_median",
        "bulk_log_sigma", "bulk_word_sigma", "bulk_row_sigma", "bulk_row_floor",
        "bulk_trunc_margin", "channel_scale", "subarray_edge_lift", "resilient_scale",
        "coupling_checkered", "coupling_rowstripe", "orientation_true_even",
        "orientation_true_odd", "taggon_anchors", "blast_weight_d2", "trial_jitter_scale",
        "jitter_stable_rate", "jitter_stable_lo", "jitter_stable_hi", "jitter_wide_lo",
        "jitter_wide_hi", "retention_geometric_p", "retention_step_ms", "structured",
        "flat_threshold"}},
      {"trr",
       {"enabled", "period", "slots", "first_act", "half_count", "strict_majority", "span"}},
      {"campaign",
       {"experiment", "chip", "channel", "pch", "bank", "rows", "patterns", "hc", "taggon_ns",
        "taggon_list", "repetitions", "hc_start", "hc_cap", "hc_resolution", "hcnth_n",
        "dummies", "agg_hc", "retention_subtract", "keep_flip_maps"}},
      {"simulate", {"trace", "write_byte"}},
  };
  return keys;
}

void check_known(const ParsedFile& f) {
  const auto& known = known_keys();
  for (const auto& [sec, entries] : f.sections) {
    auto it = known.find(sec);
    if (it == known.end()) throw ParseError("config: unknown section [" + sec + "]");
    for (const auto& [key, val] : entries) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ParseError("config line " + std::to_string(val.second) + ": unknown key '" + key +
                         "' in [" + sec + "]");
    }
  }
}

void apply_profile_keys(const ParsedFile& f, FaultProfile& p) {
  auto num = [&](const char* key, double& field) {
    if (f.has("profile", key)) field = parse_f64("profile", key, f.get("profile", key));
  };
  num("hc_floor", p.hc_floor);
  num("hc_log_median", p.hc_log_median);
  num("hc_log_sigma", p.hc_log_sigma);
  num("hc_cap", p.hc_cap);
  num("floor_row_rate", p.floor_row_rate);
  num("hot_row_rate", p.hot_row_rate);
  num("beta_min", p.beta_min);
  num("beta_max", p.beta_max);
  num("beta_spread_exp", p.beta_spread_exp);
  num("beta_row_coupling", p.beta_row_coupling);
  num("hot_bulk_scale", p.hot_bulk_scale);
  num("hot_forced_exposure", p.hot_forced_exposure);
  num("hot_forced_band_lo", p.hot_forced_band_lo);
  num("hot_forced_band_hi", p.hot_forced_band_hi);
  num("bulk_log_median", p.bulk_log_median);
  num("bulk_log_sigma", p.bulk_log_sigma);
  num("bulk_word_sigma", p.bulk_word_sigma);
  num("bulk_row_sigma", p.bulk_row_sigma);
  num("bulk_row_floor", p.bulk_row_floor);
  num("bulk_trunc_margin", p.bulk_trunc_margin);
  num("subarray_edge_lift", p.subarray_edge_lift);
  num("resilient_scale", p.resilient_scale);
  num("coupling_checkered", p.coupling_checkered);
  num("coupling_rowstripe", p.coupling_rowstripe);
  num("orientation_true_even", p.orientation_true_even);
  num("orientation_true_odd", p.orientation_true_odd);
  num("blast_weight_d2", p.blast_weight_d2);
  num("trial_jitter_scale", p.trial_jitter_scale);
  num("jitter_stable_rate", p.jitter_stable_rate);
  num("jitter_stable_lo", p.jitter_stable_lo);
  num("jitter_stable_hi", p.jitter_stable_hi);
  num("jitter_wide_lo", p.jitter_wide_lo);
  num("jitter_wide_hi", p.jitter_wide_hi);
  num("retention_geometric_p", p.retention_geometric_p);
  num("flat_threshold", p.flat_threshold);
  if (f.has("profile", "hot_forced_cells_per_class"))
    p.hot_forced_cells_per_class = int(parse_u64("profile", "hot_forced_cells_per_class",
                                                 f.get("profile", "hot_forced_cells_per_class")));
  if (f.has("profile", "retention_step_ms"))
    p.retention_step_ms =
        uint32_t(parse_u64("profile", "retention_step_ms", f.get("profile", "retention_step_ms")));
  if (f.has("profile", "structured"))
    p.structured = parse_bool("profile", "structured", f.get("profile", "structured"));
  if (f.has("profile", "channel_scale")) {
    p.channel_scale.clear();
    for (const std::string& s : split_list(f.get("profile", "channel_scale")))
      p.channel_scale.push_back(parse_f64("profile", "channel_scale", s));
  }
  if (f.has("profile", "taggon_anchors")) {
    p.taggon_anchors.clear();
    for (const std::string& s : split_list(f.get("profile", "taggon_anchors"))) {
      size_t colon = s.find(':');
      if (colon == std::string::npos)
        throw ParseError("config: taggon_anchors entries must be t_ns:multiplier");
      p.taggon_anchors.emplace_back(parse_f64("profile", "taggon_anchors", s.substr(0, colon)),
                                    parse_f64("profile", "taggon_anchors", s.substr(colon + 1)));
    }
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  ParsedFile f = tokenize(text);
  check_known(f);
  RunConfig cfg;

  if (f.has("run", "seed")) cfg.seed = parse_u64("run", "seed", f.get("run", "seed"));
  if (f.has("run", "out")) cfg.out_dir = f.get("run", "out");
  if (f.has("run", "jobs")) cfg.jobs = uint32_t(parse_u64("run", "jobs", f.get("run", "jobs")));
  if (f.has("run", "paper_scale"))
    cfg.paper_scale = parse_bool("run", "paper_scale", f.get("run", "paper_scale"));
  if (f.has("run", "trr_hidden"))
    cfg.trr_hidden = parse_bool("run", "trr_hidden", f.get("run", "trr_hidden"));
  if (f.has("run", "permissive"))
    cfg.device.permissive = parse_bool("run", "permissive", f.get("run", "permissive"));

  Geometry& g = cfg.device.geometry;
  if (f.has("device", "channels"))
    g.channels = uint32_t(parse_u64("device", "channels", f.get("device", "channels")));
  if (f.has("device", "pseudo_channels"))
    g.pseudo_channels_per_channel =
        uint32_t(parse_u64("device", "pseudo_channels", f.get("device", "pseudo_channels")));
  if (f.has("device", "banks"))
    g.banks_per_pseudo_channel = uint32_t(parse_u64("device", "banks", f.get("device", "banks")));
  if (f.has("device", "rows"))
    g.rows_per_bank = uint32_t(parse_u64("device", "rows", f.get("device", "rows")));
  if (f.has("device", "row_bits"))
    g.row_size_bits = uint32_t(parse_u64("device", "row_bits", f.get("device", "row_bits")));
  if (f.has("device", "mapping")) {
    std::string m = f.get("device", "mapping");
    if (m == "identity") {
      cfg.device.mapping = RowMapping::identity();
    } else if (m == "group_swap") {
      uint32_t group = f.has("device", "mapping_group")
                           ? uint32_t(parse_u64("device", "mapping_group",
                                                 f.get("device", "mapping_group")))
                           : 2;
      uint32_t mask = f.has("device", "mapping_mask")
                          ? uint32_t(parse_u64("device", "mapping_mask",
                                                f.get("device", "mapping_mask")))
                          : 1;
      cfg.device.mapping = RowMapping::group_swap(group, mask);
    } else {
      throw ParseError("config: unknown mapping scheme '" + m + "'");
    }
  }
  if (f.has("device", "subarrays")) {
    std::string v = f.get("device", "subarrays");
    if (v == "default") {
      cfg.device.layout = SubarrayLayout::default_layout();
    } else if (v == "single") {
      cfg.device.layout = SubarrayLayout::single(g.rows_per_bank);
    } else {
      cfg.device.layout.sizes.clear();
      for (const std::string& s : split_list(v))
        cfg.device.layout.sizes.push_back(uint32_t(parse_u64("device", "subarrays", s)));
    }
  } else if (g.rows_per_bank != 16384) {
    cfg.device.layout = SubarrayLayout::single(g.rows_per_bank);
  }
  if (f.has("device", "write_byte"))
    cfg.device.write_byte = uint8_t(parse_u64("device", "write_byte",
                                              f.get("device", "write_byte")));

  TimingParams& t = cfg.device.timing;
  auto tnum = [&](const char* key, double& field) {
    if (f.has("timing", key)) field = parse_f64("timing", key, f.get("timing", key));
  };
  tnum("clock_period_ns", t.clock_period_ns);
  tnum("tras_ns", t.tras_ns);
  tnum("trp_ns", t.trp_ns);
  tnum("trcd_ns", t.trcd_ns);
  tnum("trc_ns", t.trc_ns);
  tnum("trfc_ns", t.trfc_ns);
  tnum("trefi_ns", t.trefi_ns);
  tnum("trefw_ms", t.trefw_ms);
  if (f.has("timing", "max_postponed_refs"))
    t.max_postponed_refs = uint32_t(
        parse_u64("timing", "max_postponed_refs", f.get("timing", "max_postponed_refs")));

  // Exactly one profile source.
  bool has_inline = false;
  if (f.sections.count("profile")) {
    for (const auto& [key, val] : f.sections.at("profile"))
      if (key != "source" && key != "file") has_inline = true;
  }
  cfg.profile_source = f.has("profile", "source") ? f.get("profile", "source")
                                                  : (has_inline ? "inline" : "default");
  if (cfg.profile_source == "file") {
    if (!f.has("profile", "file"))
      throw ParseError("config: profile source 'file' needs a file key");
    if (has_inline)
      throw ParseError("config: profile file and inline keys are mutually exclusive");
    cfg.profile_file = f.get("profile", "file");
    std::ifstream in(cfg.profile_file);
    if (!in) throw ParseError("config: cannot open profile file " + cfg.profile_file);
    std::stringstream ss;
    ss << in.rdbuf();
    ParsedFile pf = tokenize(ss.str());
    check_known(pf);
    apply_profile_keys(pf, cfg.device.profile);
  } else if (cfg.profile_source == "inline") {
    apply_profile_keys(f, cfg.device.profile);
  } else if (cfg.profile_source != "default") {
    throw ParseError("config: profile source must be default, file or inline");
  }

  TrrConfig& trr = cfg.device.trr;
  if (f.has("trr", "enabled")) trr.enabled = parse_bool("trr", "enabled", f.get("trr", "enabled"));
  if (f.has("trr", "period"))
    trr.period = uint32_t(parse_u64("trr", "period", f.get("trr", "period")));
  if (f.has("trr", "slots"))
    trr.sampler_slots = uint32_t(parse_u64("trr", "slots", f.get("trr", "slots")));
  if (f.has("trr", "first_act"))
    trr.first_act_rule = parse_bool("trr", "first_act", f.get("trr", "first_act"));
  if (f.has("trr", "half_count"))
    trr.half_count_rule = parse_bool("trr", "half_count", f.get("trr", "half_count"));
  if (f.has("trr", "strict_majority"))
    trr.strict_majority = parse_bool("trr", "strict_majority", f.get("trr", "strict_majority"));
  if (f.has("trr", "span"))
    trr.victim_span = uint32_t(parse_u64("trr", "span", f.get("trr", "span")));

  CampaignSpec& c = cfg.campaign;
  if (f.has("campaign", "experiment"))
    c.experiment = experiment_from_string(f.get("campaign", "experiment"));
  if (f.has("campaign", "chip"))
    c.chip_id = uint32_t(parse_u64("campaign", "chip", f.get("campaign", "chip")));
  if (f.has("campaign", "channel"))
    c.bank.channel = uint32_t(parse_u64("campaign", "channel", f.get("campaign", "channel")));
  if (f.has("campaign", "pch"))
    c.bank.pseudo_channel = uint32_t(parse_u64("campaign", "pch", f.get("campaign", "pch")));
  if (f.has("campaign", "bank"))
    c.bank.bank = uint32_t(parse_u64("campaign", "bank", f.get("campaign", "bank")));
  if (f.has("campaign", "rows")) {
    std::string v = f.get("campaign", "rows");
    size_t colon = v.find(':');
    std::string kind = colon == std::string::npos ? v : v.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : v.substr(colon + 1);
    if (kind == "stride") c.rows = RowSelection::stride(uint32_t(std::stoul(arg)));
    else if (kind == "first") c.rows = RowSelection::first(uint32_t(std::stoul(arg)));
    else if (kind == "blocks") c.rows = RowSelection::blocks(uint32_t(std::stoul(arg)));
    else if (kind == "list") {
      std::vector<uint32_t> rows;
      for (const std::string& s : split_list(arg)) rows.push_back(uint32_t(std::stoul(s)));
      c.rows = RowSelection::list(rows);
    } else {
      throw ParseError("config: rows must be stride:N, first:N, blocks:N or list:...");
    }
  }
  if (f.has("campaign", "patterns")) c.patterns = split_list(f.get("campaign", "patterns"));
  if (f.has("campaign", "hc")) c.hammer_count = parse_u64("campaign", "hc", f.get("campaign", "hc"));
  if (f.has("campaign", "taggon_ns"))
    c.taggon_ns = parse_f64("campaign", "taggon_ns", f.get("campaign", "taggon_ns"));
  if (f.has("campaign", "taggon_list")) {
    c.taggon_list_ns.clear();
    for (const std::string& s : split_list(f.get("campaign", "taggon_list")))
      c.taggon_list_ns.push_back(parse_f64("campaign", "taggon_list", s));
  }
  if (f.has("campaign", "repetitions"))
    c.repetitions = uint32_t(parse_u64("campaign", "repetitions", f.get("campaign", "repetitions")));
  if (f.has("campaign", "hc_start"))
    c.hc_start = parse_u64("campaign", "hc_start", f.get("campaign", "hc_start"));
  if (f.has("campaign", "hc_cap"))
    c.hc_cap = parse_u64("campaign", "hc_cap", f.get("campaign", "hc_cap"));
  if (f.has("campaign", "hc_resolution"))
    c.hc_resolution = parse_u64("campaign", "hc_resolution", f.get("campaign", "hc_resolution"));
  if (f.has("campaign", "hcnth_n"))
    c.hcnth_n = uint32_t(parse_u64("campaign", "hcnth_n", f.get("campaign", "hcnth_n")));
  if (f.has("campaign", "dummies")) {
    c.bypass_dummies.clear();
    for (const std::string& s : split_list(f.get("campaign", "dummies")))
      c.bypass_dummies.push_back(uint32_t(std::stoul(s)));
  }
  if (f.has("campaign", "agg_hc")) {
    c.bypass_agg_hc.clear();
    for (const std::string& s : split_list(f.get("campaign", "agg_hc")))
      c.bypass_agg_hc.push_back(std::stoull(s));
  }
  if (f.has("campaign", "retention_subtract"))
    c.retention_subtract =
        parse_bool("campaign", "retention_subtract", f.get("campaign", "retention_subtract"));
  if (f.has("campaign", "keep_flip_maps"))
    c.keep_flip_maps = parse_bool("campaign", "keep_flip_maps", f.get("campaign", "keep_flip_maps"));

  if (f.has("simulate", "trace")) cfg.trace_file = f.get("simulate", "trace");
  if (f.has("simulate", "write_byte"))
    cfg.device.write_byte =
        uint8_t(parse_u64("simulate", "write_byte", f.get("simulate", "write_byte")));

  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void RunConfig::finalize() {
  if (!seed) throw ConfigError("config: seed is mandatory (set [run] seed or --seed)");
  device.seed = *seed;
  campaign.seed = *seed;
  campaign.jobs = jobs;
  device.validate();
  campaign.validate(device.geometry);
}

std::string serialize_profile_section(const FaultProfile& p) {
  std::ostringstream os;
  os << "[profile]\n";
  os << "hc_floor = " << g17(p.hc_floor) << "\n";
  os << "hc_log_median = " << g17(p.hc_log_median) << "\n";
  os << "hc_log_sigma = " << g17(p.hc_log_sigma) << "\n";
  os << "hc_cap = " << g17(p.hc_cap) << "\n";
  os << "floor_row_rate = " << g17(p.floor_row_rate) << "\n";
  os << "hot_row_rate = " << g17(p.hot_row_rate) << "\n";
  os << "beta_min = " << g17(p.beta_min) << "\n";
  os << "beta_max = " << g17(p.beta_max) << "\n";
  os << "beta_spread_exp = " << g17(p.beta_spread_exp) << "\n";
  os << "beta_row_coupling = " << g17(p.beta_row_coupling) << "\n";
  os << "hot_forced_cells_per_class = " << p.hot_forced_cells_per_class << "\n";
  os << "hot_bulk_scale = " << g17(p.hot_bulk_scale) << "\n";
  os << "hot_forced_exposure = " << g17(p.hot_forced_exposure) << "\n";
  os << "hot_forced_band_lo = " << g17(p.hot_forced_band_lo) << "\n";
  os << "hot_forced_band_hi = " << g17(p.hot_forced_band_hi) << "\n";
  os << "bulk_log_median = " << g17(p.bulk_log_median) << "\n";
  os << "bulk_log_sigma = " << g17(p.bulk_log_sigma) << "\n";
  os << "bulk_word_sigma = " << g17(p.bulk_word_sigma) << "\n";
  os << "bulk_row_sigma = " << g17(p.bulk_row_sigma) << "\n";
  os << "bulk_row_floor = " << g17(p.bulk_row_floor) << "\n";
  os << "bulk_trunc_margin = " << g17(p.bulk_trunc_margin) << "\n";
  if (!p.channel_scale.empty()) {
    os << "channel_scale = ";
    for (size_t i = 0; i < p.channel_scale.size(); ++i)
      os << (i ? "," : "") << g17(p.channel_scale[i]);
    os << "\n";
  }
  os << "subarray_edge_lift = " << g17(p.subarray_edge_lift) << "\n";
  os << "resilient_scale = " << g17(p.resilient_scale) << "\n";
  os << "coupling_checkered = " << g17(p.coupling_checkered) << "\n";
  os << "coupling_rowstripe = " << g17(p.coupling_rowstripe) << "\n";
  os << "orientation_true_even = " << g17(p.orientation_true_even) << "\n";
  os << "orientation_true_odd = " << g17(p.orientation_true_odd) << "\n";
  os << "taggon_anchors = ";
  for (size_t i = 0; i < p.taggon_anchors.size(); ++i)
    os << (i ? "," : "") << g17(p.taggon_anchors[i].first) << ":"
       << g17(p.taggon_anchors[i].second);
  os << "\n";
  os << "blast_weight_d2 = " << g17(p.blast_weight_d2) << "\n";
  os << "trial_jitter_scale = " << g17(p.trial_jitter_scale) << "\n";
  os << "jitter_stable_rate = " << g17(p.jitter_stable_rate) << "\n";
  os << "jitter_stable_lo = " << g17(p.jitter_stable_lo) << "\n";
  os << "jitter_stable_hi = " << g17(p.jitter_stable_hi) << "\n";
  os << "jitter_wide_lo = " << g17(p.jitter_wide_lo) << "\n";
  os << "jitter_wide_hi = " << g17(p.jitter_wide_hi) << "\n";
  os << "retention_geometric_p = " << g17(p.retention_geometric_p) << "\n";
  os << "retention_step_ms = " << p.retention_step_ms << "\n";
  os << "structured = " << (p.structured ? "true" : "false") << "\n";
  os << "flat_threshold = " << g17(p.flat_threshold) << "\n";
  return os.str();
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[run]\n";
  if (cfg.seed) os << "seed = " << *cfg.seed << "\n";
  os << "out = " << cfg.out_dir << "\n";
  os << "jobs = " << cfg.jobs << "\n";
  os << "paper_scale = " << (cfg.paper_scale ? "true" : "false") << "\n";
  os << "trr_hidden = " << (cfg.trr_hidden ? "true" : "false") << "\n";
  os << "permissive = " << (cfg.device.permissive ? "true" : "false") << "\n";

  const Geometry& g = cfg.device.geometry;
  os << "\n[device]\n";
  os << "channels = " << g.channels << "\n";
  os << "pseudo_channels = " << g.pseudo_channels_per_channel << "\n";
  os << "banks = " << g.banks_per_pseudo_channel << "\n";
  os << "rows = " << g.rows_per_bank << "\n";
  os << "row_bits = " << g.row_size_bits << "\n";
  if (cfg.device.mapping.scheme() == RowMapping::Scheme::identity) {
    os << "mapping = identity\n";
  } else {
    os << "mapping = group_swap\n";
    os << "mapping_group = " << cfg.device.mapping.group() << "\n";
    os << "mapping_mask = " << cfg.device.mapping.mask() << "\n";
  }
  os << "subarrays = ";
  for (size_t i = 0; i < cfg.device.layout.sizes.size(); ++i)
    os << (i ? "," : "") << cfg.device.layout.sizes[i];
  os << "\n";

  const TimingParams& t = cfg.device.timing;
  os << "\n[timing]\n";
  os << "clock_period_ns = " << g17(t.clock_period_ns) << "\n";
  os << "tras_ns = " << g17(t.tras_ns) << "\n";
  os << "trp_ns = " << g17(t.trp_ns) << "\n";
  os << "trcd_ns = " << g17(t.trcd_ns) << "\n";
  os << "trc_ns = " << g17(t.trc_ns) << "\n";
  os << "trfc_ns = " << g17(t.trfc_ns) << "\n";
  os << "trefi_ns = " << g17(t.trefi_ns) << "\n";
  os << "trefw_ms = " << g17(t.trefw_ms) << "\n";
  os << "max_postponed_refs = " << t.max_postponed_refs << "\n";

  os << "\n" << serialize_profile_section(cfg.device.profile);

  const TrrConfig& trr = cfg.device.trr;
  if (!cfg.trr_hidden) {
    os << "\n[trr]\n";
    os << "enabled = " << (trr.enabled ? "true" : "false") << "\n";
    os << "period = " << trr.period << "\n";
    os << "slots = " << trr.sampler_slots << "\n";
    os << "first_act = " << (trr.first_act_rule ? "true" : "false") << "\n";
    os << "half_count = " << (trr.half_count_rule ? "true" : "false") << "\n";
    os << "strict_majority = " << (trr.strict_majority ? "true" : "false") << "\n";
    os << "span = " << trr.victim_span << "\n";
  }

  const CampaignSpec& c = cfg.campaign;
  os << "\n[campaign]\n";
  os << "experiment = " << to_string(c.experiment) << "\n";
  os << "chip = " << c.chip_id << "\n";
  os << "channel = " << c.bank.channel << "\n";
  os << "pch = " << c.bank.pseudo_channel << "\n";
  os << "bank = " << c.bank.bank << "\n";
  os << "rows = ";
  switch (c.rows.kind) {
    case RowSelection::Kind::stride: os << "stride:" << c.rows.count; break;
    case RowSelection::Kind::first: os << "first:" << c.rows.count; break;
    case RowSelection::Kind::blocks: os << "blocks:" << c.rows.count; break;
    case RowSelection::Kind::list: {
      os << "list:";
      for (size_t i = 0; i < c.rows.explicit_rows.size(); ++i)
        os << (i ? "," : "") << c.rows.explicit_rows[i];
      break;
    }
  }
  os << "\n";
  os << "patterns = ";
  for (size_t i = 0; i < c.patterns.size(); ++i) os << (i ? "," : "") << c.patterns[i];
  os << "\n";
  os << "hc = " << c.hammer_count << "\n";
  os << "taggon_ns = " << g17(c.taggon_ns) << "\n";
  if (!c.taggon_list_ns.empty()) {
    os << "taggon_list = ";
    for (size_t i = 0; i < c.taggon_list_ns.size(); ++i)
      os << (i ? "," : "") << g17(c.taggon_list_ns[i]);
    os << "\n";
  }
  os << "repetitions = " << c.repetitions << "\n";
  os << "hc_start = " << c.hc_start << "\n";
  os << "hc_cap = " << c.hc_cap << "\n";
  os << "hc_resolution = " << c.hc_resolution << "\n";
  os << "hcnth_n = " << c.hcnth_n << "\n";
  os << "dummies = ";
  for (size_t i = 0; i < c.bypass_dummies.size(); ++i)
    os << (i ? "," : "") << c.bypass_dummies[i];
  os << "\n";
  os << "agg_hc = ";
  for (size_t i = 0; i < c.bypass_agg_hc.size(); ++i) os << (i ? "," : "") << c.bypass_agg_hc[i];
  os << "\n";
  os << "retention_subtract = " << (c.retention_subtract ? "true" : "false") << "\n";
  os << "keep_flip_maps = " << (c.keep_flip_maps ? "true" : "false") << "\n";

  if (!cfg.trace_file.empty()) {
    os << "\n[simulate]\n";
    os << "trace = " << cfg.trace_file << "\n";
  }
  return os.str();
}

uint64_t config_hash(const RunConfig& cfg) {
  std::string s = serialize_config(cfg);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_manifest(const std::string& dir, const RunConfig& cfg, const std::string& extra) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/manifest.txt");
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, config_hash(cfg));
  out << "# hbmrd run manifest\n";
  out << "# tool_version = 1.0.0\n";
  out << "# config_hash = " << hash << "\n";
  if (!extra.empty()) out << extra;
  out << "\n" << serialize_config(cfg);
}

uint32_t default_row_count(Experiment e, bool paper_scale) {
  switch (e) {
    case Experiment::ber: return paper_scale ? 16384 : 384;
    case Experiment::hcfirst: return paper_scale ? 3072 : 384;
    case Experiment::hcnth: return paper_scale ? 1152 : 576;
    case Experiment::rowpress_ber: return 384;
    case Experiment::rowpress_hcfirst: return paper_scale ? 384 : 96;
    case Experiment::bypass: return paper_scale ? 16384 : 128;
    case Experiment::ecc_hist: return paper_scale ? 2048 : 384;
  }
  return 384;
}

}  // namespace hbmrd
