#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dte/cli.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::string> rule;
  std::optional<double> cp_min;
  std::optional<std::string> truth;
  std::optional<std::string> sizing;
  bool recalibrate = false;
  bool full_protocol = false;
};

dte::RunConfig resolve(const Overrides& o) {
  dte::RunConfig c = o.config_path.empty() ? dte::RunConfig{} : dte::load_config(o.config_path);
  // Flags win over the file; the merged result is parsed again so that the
  // same validation applies.
  nlohmann::json j = dte::config_json(c);
  auto& sim = j["simulation"];
  if (o.seed) sim["seed"] = *o.seed;
  if (o.replicates) sim["replicates"] = *o.replicates;
  if (o.full_protocol) sim["replicates"] = 200000;
  if (o.workers) sim["workers"] = *o.workers;
  if (o.recalibrate) sim["recalibrate"] = true;
  if (o.out) j["output"]["dir"] = *o.out;
  if (o.format) j["output"]["format"] = *o.format;
  if (o.truth) j["grid"]["truth"] = *o.truth;
  if (o.sizing) j["grid"]["sizing"] = *o.sizing;
  if (o.rule || o.cp_min) {
    if (j["adaptive"].is_null()) j["adaptive"] = nlohmann::json::object();
    if (o.rule) j["adaptive"]["rule"] = *o.rule;
    if (o.cp_min) j["adaptive"]["cp_min"] = *o.cp_min;
    if (o.rule && *o.rule == "gsd") j["adaptive"] = nullptr;
  }
  return dte::parse_config(j);
}

void report_written(const std::vector<std::string>& paths) {
  for (const auto& p : paths) std::cout << "wrote " << p << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design and simulation of survival trials with a delayed treatment effect"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master random seed");
  app.add_option("--replicates", o.replicates, "Replicates per grid cell");
  app.add_option("--workers", o.workers, "Worker threads");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--format", o.format, "csv, json or both");

  auto* design = app.add_subcommand("design", "Sample size per delay and weight");
  auto* boundaries = app.add_subcommand("boundaries", "Efficacy boundaries per look");
  auto* simulate = app.add_subcommand("simulate", "Operating characteristics by simulation");
  auto* recalibrate = app.add_subcommand("recalibrate", "Nominal level restoring type-I error");

  for (auto* sub : {simulate, recalibrate}) {
    sub->add_option("--rule", o.rule,
                    "gsd, none, promising-zone, chw-guarded, jennison-turnbull, fixed-increase");
    sub->add_option("--cp-min", o.cp_min, "Promising zone lower bound");
    sub->add_option("--truth", o.truth, "null or alternative");
    sub->add_option("--sizing", o.sizing, "fixed-at-zero-delay or resized-per-delay");
  }
  simulate->add_flag("--recalibrate", o.recalibrate, "Recalibrate the nominal level first");
  simulate->add_flag("--full-protocol", o.full_protocol, "200,000 replicates per cell");

  CLI11_PARSE(app, argc, argv);

  dte::RunConfig config;
  try {
    config = resolve(o);
  } catch (const std::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*design) {
      report_written(dte::write_table("design", dte::cmd_design(config), config));
    } else if (*boundaries) {
      report_written(dte::write_table("boundaries", dte::cmd_boundaries(config), config));
    } else if (*recalibrate) {
      report_written(dte::write_table("recalibrate", dte::cmd_recalibrate(config), config));
    } else if (*simulate) {
      const dte::SimulateReport r = dte::cmd_simulate(config);
      report_written(dte::write_table("simulate", r.table, config));
      std::filesystem::create_directories(config.out_dir);
      const auto manifest = std::filesystem::path(config.out_dir) / "manifest.json";
      std::ofstream(manifest) << r.manifest.dump(2) << '\n';
      std::cout << "wrote " << manifest.string() << '\n';
      if (!r.failures.empty()) {
        std::cerr << r.failures.size() << " cell(s) failed:\n";
        for (const auto& f : r.failures) std::cerr << "  " << f << '\n';
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
