#include "mrd/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mrd/errors.hpp"

namespace mrd {

namespace {

using nlohmann::json;

// Walks the document while remembering where it is, so every error can
// name the offending key.
class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ValidationError(source_ + ": " + path + ": " + what);
  }

  void only_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
      if (ok.count(k) == 0) fail(join(path, k), "unknown key");
    }
  }

  template <class T>
  T get(const json& obj, const std::string& path, const char* key, T fallback) const {
    if (!obj.contains(key)) return fallback;
    return as<T>(obj.at(key), join(path, key));
  }

  template <class T>
  T require(const json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) fail(join(path, key), "missing required key");
    return as<T>(obj.at(key), join(path, key));
  }

  template <class T>
  T as(const json& v, const std::string& path) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
    } else {
      if (!v.is_number_integer()) fail(path, "expected an integer");
    }
    return v.get<T>();
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string at(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

 private:
  std::string source_;
};

template <class E>
E pick(const Reader& rd, const std::string& path, const std::string& value,
       std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    names += names.empty() ? name : std::string(", ") + name;
  }
  rd.fail(path, "'" + value + "' is not one of {" + names + "}");
}

ScheduleSpec parse_schedule(const Reader& rd, const json& obj, const std::string& path,
                            ScheduleSpec base) {
  rd.only_keys(obj, path,
               {"family", "alpha", "factor", "values", "scale", "tail_draws", "tail_seed"});
  if (obj.contains("family")) {
    base.family = pick<ScheduleSpec::Family>(
        rd, Reader::join(path, "family"), rd.as<std::string>(obj.at("family"), path + ".family"),
        {{"mrd_two_sided", ScheduleSpec::Family::mrd_two_sided},
         {"one_sided_mrd", ScheduleSpec::Family::one_sided_mrd},
         {"one_sided_lrsd", ScheduleSpec::Family::one_sided_lrsd},
         {"one_sided_sd", ScheduleSpec::Family::one_sided_sd},
         {"explicit", ScheduleSpec::Family::explicit_values}});
    // The 1.25/1.2 recipe is on the max-coordinate scale, the LRT statistic
    // is not; see lrt_tail_matched.
    base.scale = base.family == ScheduleSpec::Family::one_sided_lrsd
                     ? ScheduleSpec::Scale::lrt_tail
                     : ScheduleSpec::Scale::raw;
  }
  if (obj.contains("scale")) {
    base.scale = pick<ScheduleSpec::Scale>(
        rd, Reader::join(path, "scale"), rd.as<std::string>(obj.at("scale"), path + ".scale"),
        {{"raw", ScheduleSpec::Scale::raw},
         {"squared", ScheduleSpec::Scale::squared},
         {"lrt_tail", ScheduleSpec::Scale::lrt_tail}});
  }
  base.alpha = rd.get(obj, path, "alpha", base.alpha);
  base.factor = rd.get(obj, path, "factor", base.factor);
  base.tail_draws = rd.get(obj, path, "tail_draws", base.tail_draws);
  base.tail_seed = rd.get(obj, path, "tail_seed", base.tail_seed);
  if (base.tail_draws < 1) rd.fail(Reader::join(path, "tail_draws"), "must be positive");
  if (obj.contains("values")) {
    const auto& vals = obj.at("values");
    const std::string vpath = Reader::join(path, "values");
    if (!vals.is_array()) rd.fail(vpath, "expected an array of numbers");
    base.values.clear();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      base.values.push_back(rd.as<double>(vals[i], Reader::at(vpath, i)));
    }
  }
  return base;
}

ProcedureSpec parse_procedure(const Reader& rd, const json& obj, const std::string& path,
                              const ScheduleSpec& default_schedule) {
  rd.only_keys(obj, path,
               {"kind", "name", "sided", "schedule", "level", "studentization",
                "calibration_draws", "calibration_seed", "calibration_cache"});
  ProcedureSpec spec;
  const std::string kpath = Reader::join(path, "kind");
  spec.kind = pick<ProcedureKind>(rd, kpath, rd.require<std::string>(obj, path, "kind"),
                                  {{"mrd", ProcedureKind::mrd},
                                   {"lrsd", ProcedureKind::lrsd},
                                   {"step_up", ProcedureKind::step_up},
                                   {"step_down", ProcedureKind::step_down},
                                   {"dunnett", ProcedureKind::dunnett},
                                   {"always_accept", ProcedureKind::always_accept},
                                   {"always_reject", ProcedureKind::always_reject}});
  spec.name = rd.get<std::string>(obj, path, "name", "");
  spec.sided = pick<Sidedness>(rd, Reader::join(path, "sided"),
                               rd.get<std::string>(obj, path, "sided", "two_sided"),
                               {{"two_sided", Sidedness::two_sided},
                                {"one_sided", Sidedness::one_sided}});
  spec.schedule = default_schedule;
  if (obj.contains("schedule")) {
    spec.schedule = parse_schedule(rd, obj.at("schedule"), Reader::join(path, "schedule"),
                                   default_schedule);
  }
  spec.level = rd.get(obj, path, "level", spec.level);
  if (!(spec.level > 0.0 && spec.level < 1.0)) {
    rd.fail(Reader::join(path, "level"), "must lie in (0, 1)");
  }
  spec.studentization = pick<Studentization>(
      rd, Reader::join(path, "studentization"),
      rd.get<std::string>(obj, path, "studentization", "pooled_sd"),
      {{"pooled_sd", Studentization::pooled_sd}, {"root_t", Studentization::root_t}});
  spec.calibration_draws = rd.get(obj, path, "calibration_draws", spec.calibration_draws);
  spec.calibration_seed = rd.get(obj, path, "calibration_seed", spec.calibration_seed);
  spec.calibration_cache = rd.get<std::string>(obj, path, "calibration_cache", "");
  return spec;
}

std::vector<GridRow> parse_scenario(const Reader& rd, const json& obj, const std::string& path) {
  rd.only_keys(obj, path,
               {"kind", "rho", "n", "sigma", "variance_known", "units", "mode", "layout",
                "nonpositive_is_null", "m", "rows"});
  Scenario base;
  base.kind = pick<ScenarioKind>(rd, Reader::join(path, "kind"),
                                 rd.require<std::string>(obj, path, "kind"),
                                 {{"treatments_control", ScenarioKind::treatments_control},
                                  {"change_point", ScenarioKind::change_point},
                                  {"successive", ScenarioKind::successive},
                                  {"intraclass", ScenarioKind::intraclass}});
  base.rho = rd.get(obj, path, "rho", base.rho);
  base.n = rd.get<Index>(obj, path, "n", base.n);
  base.sigma = rd.get(obj, path, "sigma", base.sigma);
  base.variance_known = rd.get(obj, path, "variance_known", base.variance_known);
  base.units = pick<MeanUnits>(rd, Reader::join(path, "units"),
                               rd.get<std::string>(obj, path, "units", "raw"),
                               {{"raw", MeanUnits::raw}, {"standardized", MeanUnits::standardized}});
  base.mode = pick<GenerationMode>(rd, Reader::join(path, "mode"),
                                   rd.get<std::string>(obj, path, "mode", "one_factor"),
                                   {{"one_factor", GenerationMode::one_factor},
                                    {"raw", GenerationMode::raw}});
  const MeanLayout default_layout = pick<MeanLayout>(
      rd, Reader::join(path, "layout"), rd.get<std::string>(obj, path, "layout", "block"),
      {{"block", MeanLayout::block}, {"equally_spaced_triples", MeanLayout::equally_spaced_triples}});
  const bool nonpositive = rd.get(obj, path, "nonpositive_is_null", false);
  const Index declared_m = rd.get<Index>(obj, path, "m", -1);

  std::vector<GridRow> rows;
  const std::string rpath = Reader::join(path, "rows");
  if (!obj.contains("rows")) rd.fail(rpath, "missing required key");
  const auto& list = obj.at("rows");
  if (!list.is_array()) rd.fail(rpath, "expected an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string row_path = Reader::at(rpath, i);
    const json& row = list[i];
    rd.only_keys(row, row_path, {"label", "counts", "layout"});
    MeanLayout layout = default_layout;
    if (row.contains("layout")) {
      layout = pick<MeanLayout>(rd, row_path + ".layout",
                                rd.as<std::string>(row.at("layout"), row_path + ".layout"),
                                {{"block", MeanLayout::block},
                                 {"equally_spaced_triples", MeanLayout::equally_spaced_triples}});
    }
    const std::string cpath = row_path + ".counts";
    if (!row.contains("counts")) rd.fail(cpath, "missing required key");
    const auto& counts_json = row.at("counts");
    if (!counts_json.is_array()) rd.fail(cpath, "expected an array of [value, count] pairs");
    std::vector<std::pair<double, Index>> counts;
    for (std::size_t c = 0; c < counts_json.size(); ++c) {
      const auto& pair = counts_json[c];
      const std::string ppath = Reader::at(cpath, c);
      if (!pair.is_array() || pair.size() != 2) rd.fail(ppath, "expected [value, count]");
      counts.emplace_back(rd.as<double>(pair[0], ppath + "[0]"),
                          rd.as<Index>(pair[1], ppath + "[1]"));
    }
    GridRow gr;
    gr.scenario = base;
    try {
      gr.scenario.means = mean_pattern_table(counts, layout, nonpositive);
    } catch (const ValidationError& e) {
      rd.fail(cpath, e.what());
    }
    gr.scenario.m = gr.scenario.means.size();
    if (declared_m >= 0 && declared_m != gr.scenario.m) {
      rd.fail(cpath, "counts give M = " + std::to_string(gr.scenario.m) + " but " +
                         Reader::join(path, "m") + " = " + std::to_string(declared_m));
    }
    gr.label = rd.get<std::string>(row, row_path, "label", "row" + std::to_string(i + 1));
    gr.scenario.label = gr.label;
    try {
      gr.scenario.validate();
    } catch (const std::exception& e) {
      rd.fail(row_path, e.what());
    }
    rows.push_back(std::move(gr));
  }
  return rows;
}

}  // namespace

OutputFormat parse_output_format(const std::string& name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "md" || name == "markdown") return OutputFormat::markdown;
  throw ValidationError("format '" + name + "' is not one of {csv, md}");
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(source + ": parse error at byte " + std::to_string(e.byte) + ": " +
                          e.what());
  }
  const Reader rd(source);
  rd.only_keys(doc, "(root)", {"scenario", "procedures", "schedule", "run"});

  RunConfig cfg;
  if (doc.contains("run")) {
    const json& run = doc.at("run");
    rd.only_keys(run, "run", {"iterations", "seed", "workers", "format", "out"});
    cfg.grid.options.iterations = rd.get(run, "run", "iterations", cfg.grid.options.iterations);
    if (cfg.grid.options.iterations < 1) rd.fail("run.iterations", "must be at least 1");
    cfg.seed = rd.get(run, "run", "seed", cfg.seed);
    cfg.grid.options.workers = rd.get(run, "run", "workers", cfg.grid.options.workers);
    if (cfg.grid.options.workers < 1) rd.fail("run.workers", "must be at least 1");
    if (run.contains("format")) {
      try {
        cfg.format = parse_output_format(rd.as<std::string>(run.at("format"), "run.format"));
      } catch (const ValidationError& e) {
        rd.fail("run.format", e.what());
      }
    }
    cfg.out = rd.get<std::string>(run, "run", "out", "");
  }

  ScheduleSpec default_schedule;
  if (doc.contains("schedule")) {
    default_schedule = parse_schedule(rd, doc.at("schedule"), "schedule", default_schedule);
  }

  if (!doc.contains("scenario")) rd.fail("scenario", "missing required section");
  cfg.grid.rows = parse_scenario(rd, doc.at("scenario"), "scenario");
  for (auto& row : cfg.grid.rows) row.scenario.seed = cfg.seed;

  if (doc.contains("procedures")) {
    const json& procs = doc.at("procedures");
    if (!procs.is_array()) rd.fail("procedures", "expected an array");
    for (std::size_t i = 0; i < procs.size(); ++i) {
      cfg.grid.procedures.push_back(
          parse_procedure(rd, procs[i], Reader::at("procedures", i), default_schedule));
    }
  }

  // Fail fast: build every schedule for every row now.
  for (std::size_t p = 0; p < cfg.grid.procedures.size(); ++p) {
    const auto& spec = cfg.grid.procedures[p];
    if (spec.kind != ProcedureKind::mrd && spec.kind != ProcedureKind::lrsd) continue;
    for (const auto& row : cfg.grid.rows) {
      try {
        spec.schedule.build(row.scenario.covariance(), spec.sided);
      } catch (const std::exception& e) {
        rd.fail(Reader::at("procedures", p) + ".schedule",
                std::string(e.what()) + " (row " + row.label + ")");
      }
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError(path + ": cannot open config file");
  std::ostringstream text;
  text << is.rdbuf();
  return parse_run_config(text.str(), path);
}

void apply_overrides(RunConfig& config, const RunOverrides& o) {
  if (o.seed) {
    config.seed = *o.seed;
    for (auto& row : config.grid.rows) row.scenario.seed = *o.seed;
  }
  if (o.iterations) {
    if (*o.iterations < 1) throw ValidationError("--iterations must be at least 1");
    config.grid.options.iterations = *o.iterations;
  }
  if (o.workers) {
    if (*o.workers < 1) throw ValidationError("--workers must be at least 1");
    config.grid.options.workers = *o.workers;
  }
  if (o.format) config.format = *o.format;
  if (o.out) config.out = *o.out;
}

std::string render(const ResultTable& table, OutputFormat format) {
  return format == OutputFormat::csv ? table.to_csv() : table.to_markdown();
}

}  // namespace mrd
