#include "dte/cli.hpp"

#include <boost/version.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dte {

using nlohmann::json;

namespace {

std::string_view to_string(EnrollmentMode mode) {
  switch (mode) {
    case EnrollmentMode::per_subject_poisson: return "per-subject-poisson";
    case EnrollmentMode::poisson_process: return "poisson-process";
    case EnrollmentMode::uniform: return "uniform";
  }
  return "?";
}

std::string_view to_string(BoundaryFamily family) {
  return family == BoundaryFamily::lan_demets_obf ? "lan-demets-obf" : "classical-obf";
}

std::string_view to_string(OutputFormat format) {
  switch (format) {
    case OutputFormat::csv: return "csv";
    case OutputFormat::json: return "json";
    case OutputFormat::both: return "both";
  }
  return "?";
}

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(name(), "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
    }
  }

  void optional_number(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_number()) throw ConfigError(field(key), "expected a number or null");
      out = v->get<double>();
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      if (v->is_number_unsigned()) {
        out = static_cast<Int>(v->get<std::uint64_t>());
        return;
      }
      const auto x = v->get<std::int64_t>();
      if (std::is_unsigned_v<Int> && x < 0)
        throw ConfigError(field(key), "expected a non-negative integer");
      out = static_cast<Int>(x);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  template <class F>
  void text(const std::string& key, F&& assign) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      try {
        assign(v->get<std::string>());
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError(field(key), e.what());
      }
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) throw ConfigError(field(key), "expected an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  std::string name() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void wrap(const std::string& field, F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

EnrollmentMode parse_mode(const std::string& s) {
  for (auto m : {EnrollmentMode::per_subject_poisson, EnrollmentMode::poisson_process,
                 EnrollmentMode::uniform})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown enrollment mode '" + s + "'");
}

BoundaryFamily parse_family(const std::string& s) {
  for (auto f : {BoundaryFamily::lan_demets_obf, BoundaryFamily::classical_obf})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown boundary family '" + s + "'");
}

OutputFormat parse_format(const std::string& s) {
  for (auto f : {OutputFormat::csv, OutputFormat::json, OutputFormat::both})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown format '" + s + "' (csv, json, both)");
}

json number_or_null(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

DesignSpec design_at(const RunConfig& c, double delay, const WeightSpec& w) {
  DesignSpec spec = c.settings().design;
  spec.model = spec.model.with_delay(delay);
  spec.weights = w;
  return spec;
}

}  // namespace

void RunConfig::validate() const {
  if (!(control_median > 0.0 && std::isfinite(control_median)))
    throw ConfigError("design.control_median", "must be positive");
  if (!(experimental_median > 0.0 && std::isfinite(experimental_median)))
    throw ConfigError("design.experimental_median", "must be positive");
  wrap("design", [&] { settings().design.validate(); });
  wrap("enrollment", [&] { settings().enrollment.validate(); });
  wrap("grid", [&] { grid.validate(); });

  if (fractions.empty()) throw ConfigError("boundaries.fractions", "must not be empty");
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    if (!(fractions[k] > 0.0 && fractions[k] <= 1.0))
      throw ConfigError("boundaries.fractions", "values must lie in (0, 1]");
    if (k && !(fractions[k] > fractions[k - 1]))
      throw ConfigError("boundaries.fractions", "must be strictly increasing");
  }
  if (fractions.back() != 1.0)
    throw ConfigError("boundaries.fractions", "last fraction must be 1");

  if (adaptive) {
    if (fractions.size() != 2)
      throw ConfigError("boundaries.fractions", "adaptive designs use exactly two looks");
    if (!(n_max_factor >= 1.0)) throw ConfigError("adaptive.n_max_factor", "must be >= 1");
    const double beta = design.beta;
    if (!(adaptive->cp_min > 0.0 && adaptive->cp_min < 1.0 - beta))
      throw ConfigError("adaptive.cp_min", "must lie in (0, 1 - beta)");
    if (adaptive->n_max < 0.0) throw ConfigError("adaptive.n_max", "must be >= 0");
    if (adaptive->eta && !(*adaptive->eta >= 0.0))
      throw ConfigError("adaptive.eta", "must be >= 0");
  }

  if (nominal_alpha && !(*nominal_alpha > 0.0 && *nominal_alpha < 0.5))
    throw ConfigError("simulation.nominal_alpha", "must lie in (0, 0.5)");
  if (!(recalibration_tolerance > 0.0))
    throw ConfigError("simulation.recalibration_tolerance", "must be positive");
  if (recalibration_replicates < 1)
    throw ConfigError("simulation.recalibration_replicates", "must be >= 1");
  if (replicates < 1) throw ConfigError("simulation.replicates", "must be >= 1");
  if (workers < 1) throw ConfigError("simulation.workers", "must be >= 1");
  if (out_dir.empty()) throw ConfigError("output.dir", "must not be empty");
}

SimulationSettings RunConfig::settings() const {
  SimulationSettings s;
  s.design = design;
  s.design.model = DelayedEffectModel::from_medians(control_median, experimental_median, 0.0);
  s.enrollment = enrollment;
  s.enrollment.accrual_horizon = design.accrual;
  s.enrollment.min_followup = design.min_followup;
  s.fractions = fractions;
  s.family = family;
  s.nominal_alpha = nominal_alpha;
  s.adaptive = adaptive;
  s.n_max_factor = n_max_factor;
  return s;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  Section root(j, "");

  if (const json* d = root.find("design")) {
    Section s(*d, "design");
    s.number("control_median", c.control_median);
    s.number("experimental_median", c.experimental_median);
    s.number("accrual", c.design.accrual);
    s.number("min_followup", c.design.min_followup);
    if (const json* a = s.find("allocation")) {
      Section al(*a, "design.allocation");
      al.integer("control", c.design.allocation.control);
      al.integer("experimental", c.design.allocation.experimental);
      al.finish();
    }
    s.number("alpha", c.design.alpha);
    s.number("beta", c.design.beta);
    s.integer("subintervals", c.design.subintervals);
    s.finish();
  }

  if (const json* e = root.find("enrollment")) {
    Section s(*e, "enrollment");
    s.text("mode", [&](const std::string& v) { c.enrollment.mode = parse_mode(v); });
    s.number("rate", c.enrollment.rate);
    s.finish();
  }

  if (const json* g = root.find("grid")) {
    Section s(*g, "grid");
    s.numbers("delays", c.grid.delays);
    if (const json* w = s.find("weights")) {
      if (!w->is_array()) throw ConfigError("grid.weights", "expected an array");
      c.grid.weights.clear();
      for (std::size_t i = 0; i < w->size(); ++i) {
        Section ws((*w)[i], "grid.weights[" + std::to_string(i) + "]");
        WeightSpec spec;
        ws.number("rho", spec.rho);
        ws.number("gamma", spec.gamma);
        ws.finish();
        c.grid.weights.push_back(spec);
      }
    }
    s.text("truth", [&](const std::string& v) { c.grid.truth = parse_truth(v); });
    s.text("sizing", [&](const std::string& v) { c.grid.sizing = parse_sizing(v); });
    s.finish();
  }

  if (const json* b = root.find("boundaries")) {
    Section s(*b, "boundaries");
    s.numbers("fractions", c.fractions);
    s.text("family", [&](const std::string& v) { c.family = parse_family(v); });
    s.finish();
  }

  if (const json* a = root.find("adaptive"); a && !a->is_null()) {
    Section s(*a, "adaptive");
    AdaptiveConfig ac;
    s.text("rule", [&](const std::string& v) { ac.rule = parse_rule(v); });
    s.number("cp_min", ac.cp_min);
    s.number("n_max", ac.n_max);
    s.number("n_max_factor", c.n_max_factor);
    s.optional_number("eta", ac.eta);
    s.text("fixed_increase_policy",
           [&](const std::string& v) { ac.fixed_increase_policy = parse_policy(v); });
    s.finish();
    c.adaptive = ac;
  }

  if (const json* m = root.find("simulation")) {
    Section s(*m, "simulation");
    s.integer("replicates", c.replicates);
    s.integer("seed", c.seed);
    s.integer("workers", c.workers);
    s.optional_number("nominal_alpha", c.nominal_alpha);
    s.boolean("recalibrate", c.recalibrate);
    s.number("recalibration_tolerance", c.recalibration_tolerance);
    s.integer("recalibration_replicates", c.recalibration_replicates);
    s.finish();
  }

  if (const json* o = root.find("output")) {
    Section s(*o, "output");
    s.text("dir", [&](const std::string& v) { c.out_dir = v; });
    s.text("format", [&](const std::string& v) { c.format = parse_format(v); });
    s.finish();
  }

  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", e.what());
  }
  return parse_config(j);
}

json config_json(const RunConfig& c) {
  json weights = json::array();
  for (const auto& w : c.grid.weights) weights.push_back({{"rho", w.rho}, {"gamma", w.gamma}});
  json adaptive = nullptr;
  if (c.adaptive) {
    adaptive = {{"rule", to_string(c.adaptive->rule)},
                {"cp_min", c.adaptive->cp_min},
                {"n_max", c.adaptive->n_max},
                {"n_max_factor", c.n_max_factor},
                {"eta", number_or_null(c.adaptive->eta)},
                {"fixed_increase_policy", to_string(c.adaptive->fixed_increase_policy)}};
  }
  return {
      {"design",
       {{"control_median", c.control_median},
        {"experimental_median", c.experimental_median},
        {"accrual", c.design.accrual},
        {"min_followup", c.design.min_followup},
        {"allocation",
         {{"control", c.design.allocation.control},
          {"experimental", c.design.allocation.experimental}}},
        {"alpha", c.design.alpha},
        {"beta", c.design.beta},
        {"subintervals", c.design.subintervals}}},
      {"enrollment", {{"mode", to_string(c.enrollment.mode)}, {"rate", c.enrollment.rate}}},
      {"grid",
       {{"delays", c.grid.delays},
        {"weights", weights},
        {"truth", to_string(c.grid.truth)},
        {"sizing", to_string(c.grid.sizing)}}},
      {"boundaries", {{"fractions", c.fractions}, {"family", to_string(c.family)}}},
      {"adaptive", adaptive},
      {"simulation",
       {{"replicates", c.replicates},
        {"seed", c.seed},
        {"workers", c.workers},
        {"nominal_alpha", number_or_null(c.nominal_alpha)},
        {"recalibrate", c.recalibrate},
        {"recalibration_tolerance", c.recalibration_tolerance},
        {"recalibration_replicates", c.recalibration_replicates}}},
      {"output", {{"dir", c.out_dir}, {"format", to_string(c.format)}}},
  };
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, end);
}

namespace {

std::string csv_field(const Value& v) {
  if (auto p = std::get_if<long long>(&v)) return std::to_string(*p);
  if (auto p = std::get_if<double>(&v)) return format_number(*p);
  const auto& s = std::get<std::string>(v);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

json json_value(const Value& v) {
  if (auto p = std::get_if<long long>(&v)) return *p;
  if (auto p = std::get_if<double>(&v)) return std::isnan(*p) ? json(nullptr) : json(*p);
  return std::get<std::string>(v);
}

}  // namespace

std::string to_csv(const Table& table, const json& config) {
  std::ostringstream out;
  out << "# config=" << config.dump() << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i]);
    out << '\n';
  }
  return out.str();
}

json table_json(const Table& table, const json& config) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) r[table.columns[i]] = json_value(row[i]);
    rows.push_back(std::move(r));
  }
  return {{"config", config}, {"columns", table.columns}, {"rows", std::move(rows)}};
}

Table cmd_design(const RunConfig& config) {
  config.validate();
  Table t;
  t.columns = {"delay", "rho", "gamma", "e_star", "n_continuous", "patients", "events"};
  for (const auto& w : config.grid.weights)
    for (double delay : config.grid.delays) {
      const SampleSizeResult r = hasegawa_sample_size(design_at(config, delay, w));
      t.rows.push_back({delay, w.rho, w.gamma, r.e_star, r.n_continuous,
                        static_cast<long long>(r.n), static_cast<long long>(r.d)});
    }
  return t;
}

Table cmd_boundaries(const RunConfig& config) {
  config.validate();
  const LookSchedule s = obf_boundaries(config.fractions, config.design.alpha,
                                        1.0 - config.design.beta, config.family);
  Table t;
  t.columns = {"look", "fraction", "boundary", "cumulative_alpha", "crossing", "drift"};
  for (std::size_t k = 0; k < s.fractions.size(); ++k)
    t.rows.push_back({static_cast<long long>(k + 1), s.fractions[k], s.boundaries[k],
                      s.cumulative_alpha[k], s.crossing[k], *s.drift});
  return t;
}

SimulateReport cmd_simulate(const RunConfig& config) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const SimulationSettings base = config.settings();
  const std::size_t looks = config.fractions.size();

  SimulateReport report;
  Table& t = report.table;
  t.columns = {"delay", "rho", "gamma", "rule", "power_or_alpha", "mc_se", "resize_freq",
               "mean_resize_ratio", "mean_events", "truth", "sizing", "test_alpha",
               "patients", "planned_events", "promising_freq", "mean_patient_ratio",
               "mean_patients", "capped", "pathological"};
  for (std::size_t k = 1; k <= looks; ++k) t.columns.push_back("cross_look" + std::to_string(k));

  // α′ is shared by all cells with the same weights and planned size.
  std::map<std::tuple<double, double, long>, RecalibrationResult> recalibrated;
  json recal_log = json::array();
  json cell_times = json::array();

  std::uint64_t index = 0;
  for (const auto& w : config.grid.weights) {
    for (double delay : config.grid.delays) {
      const std::uint64_t cell_index = index++;
      const auto cell_start = clock::now();
      try {
        SimulationSettings settings = base;
        if (config.recalibrate && !config.nominal_alpha) {
          const long n = size_cell(base, delay, w, config.grid.sizing).n;
          const auto key = std::make_tuple(w.rho, w.gamma, n);
          auto it = recalibrated.find(key);
          if (it == recalibrated.end()) {
            const RecalibrationResult r = recalibrate_alpha(
                base, w, delay, config.grid.sizing, config.design.alpha,
                config.recalibration_tolerance, config.recalibration_replicates,
                config.seed ^ 0x9e3779b97f4a7c15ULL, config.workers);
            it = recalibrated.emplace(key, r).first;
            recal_log.push_back({{"rho", w.rho}, {"gamma", w.gamma}, {"patients", n},
                                 {"alpha_prime", r.alpha_prime}, {"achieved", r.achieved},
                                 {"mc_se", r.mc_se}, {"note", r.note}});
          }
          settings.nominal_alpha = it->second.alpha_prime;
        }
        const CellResult c = run_cell(settings, delay, w, config.grid.truth,
                                      config.grid.sizing, config.replicates, config.seed,
                                      cell_index, config.workers);
        std::vector<Value> row{delay,
                               w.rho,
                               w.gamma,
                               c.rule,
                               c.oc.rejection_rate,
                               c.oc.mc_se,
                               c.oc.resize_frequency,
                               c.oc.mean_resize_ratio,
                               c.oc.mean_events,
                               std::string(to_string(c.truth)),
                               std::string(to_string(c.sizing)),
                               c.test_alpha,
                               static_cast<long long>(c.patients),
                               static_cast<long long>(c.planned_events),
                               c.oc.promising_frequency,
                               c.oc.mean_patient_ratio,
                               c.oc.mean_patients,
                               static_cast<long long>(c.oc.capped),
                               static_cast<long long>(c.oc.pathological)};
        for (std::size_t k = 0; k < looks; ++k) {
          // Adaptive trials only reject at the end.
          double rate = 0.0;
          if (!config.adaptive && k < c.oc.crossing_rates.size()) rate = c.oc.crossing_rates[k];
          if (config.adaptive && k + 1 == looks) rate = c.oc.rejection_rate;
          row.push_back(rate);
        }
        t.rows.push_back(std::move(row));
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "delay=" << format_number(delay) << " rho=" << format_number(w.rho)
            << " gamma=" << format_number(w.gamma) << ": " << e.what();
        report.failures.push_back(msg.str());
      }
      cell_times.push_back(
          {{"cell", cell_index},
           {"seconds", std::chrono::duration<double>(clock::now() - cell_start).count()}});
    }
  }

  report.manifest = {
      {"tool", "dtesim"},
      {"version", "1.0.0"},
      {"compiler", __VERSION__},
      {"boost", BOOST_LIB_VERSION},
      {"seed", config.seed},
      {"replicates", config.replicates},
      {"workers", config.workers},
      {"cells", index},
      {"failed_cells", report.failures},
      {"recalibration", recal_log},
      {"cell_seconds", cell_times},
      {"total_seconds", std::chrono::duration<double>(clock::now() - start).count()},
      {"config", config_json(config)},
  };
  return report;
}

Table cmd_recalibrate(const RunConfig& config) {
  config.validate();
  const SimulationSettings base = config.settings();
  Table t;
  t.columns = {"delay", "rho", "gamma", "rule", "sizing", "target_alpha", "alpha_prime",
               "achieved", "mc_se", "unadjusted", "iterations", "adjusted", "note"};
  const std::string rule = config.adaptive ? std::string(to_string(config.adaptive->rule)) : "gsd";
  // Under fixed sizing the null trial does not depend on the delay.
  const std::vector<double> delays = config.grid.sizing == Sizing::fixed_at_zero_delay
                                         ? std::vector<double>{config.grid.delays.front()}
                                         : config.grid.delays;
  for (const auto& w : config.grid.weights)
    for (double delay : delays) {
      const RecalibrationResult r =
          recalibrate_alpha(base, w, delay, config.grid.sizing, config.design.alpha,
                            config.recalibration_tolerance, config.replicates, config.seed,
                            config.workers);
      t.rows.push_back({delay, w.rho, w.gamma, rule, std::string(to_string(config.grid.sizing)),
                        config.design.alpha, r.alpha_prime, r.achieved, r.mc_se, r.unadjusted,
                        static_cast<long long>(r.iterations),
                        static_cast<long long>(r.adjusted), r.note});
    }
  return t;
}

std::vector<std::string> write_table(const std::string& name, const Table& table,
                                     const RunConfig& config, const json& extra) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const json resolved = config_json(config);
  std::vector<std::string> written;
  auto emit = [&](const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << body;
    written.push_back(path.string());
  };
  if (config.format != OutputFormat::json)
    emit(fs::path(config.out_dir) / (name + ".csv"), to_csv(table, resolved));
  if (config.format != OutputFormat::csv) {
    json j = table_json(table, resolved);
    if (extra.is_object())
      for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    emit(fs::path(config.out_dir) / (name + ".json"), j.dump(2) + "\n");
  }
  return written;
}

}  // namespace dte
