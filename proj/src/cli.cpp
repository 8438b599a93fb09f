#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cutbias/io.hpp"

namespace cutbias {

namespace {

std::vector<double> parse_double_list(const std::string& text,
                                      const char* flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string field =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + ": malformed number `" + field + "`");
    }
    if (used != field.size())
      throw ConfigError(std::string(flag) + ": malformed number `" + field + "`");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError(std::string(flag) + ": empty list");
  return out;
}

EffectSetting effect_from_flags(const std::string& name,
                                const std::string& betas) {
  if (name == "more_or_less_1" || name == "more_or_less_2") {
    if (!betas.empty())
      throw ConfigError("--betas is only valid with --effect custom");
    return name == "more_or_less_1" ? EffectSetting::more_or_less_1()
                                    : EffectSetting::more_or_less_2();
  }
  if (name != "custom")
    throw ConfigError(
        "--effect: expected more_or_less_1, more_or_less_2 or custom");
  if (betas.empty()) throw ConfigError("--betas is required with --effect custom");
  const auto v = parse_double_list(betas, "--betas");
  if (v.size() != 4)
    throw ConfigError("--betas: 4 comma-separated numbers required");
  return EffectSetting::custom(ModelCoefficients{v[0], v[1], v[2], v[3]});
}

CutoffSet cutoffs_from_flag(const std::string& text) {
  try {
    return CutoffSet::from(parse_double_list(text, "--cutoffs"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--cutoffs: ") + e.what());
  }
}

// Precedence: --threads flag, then CUTOFF_BIAS_THREADS, then hardware.
int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    const std::string text(env);
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(text, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != text.size() || v < 1)
      throw ConfigError(std::string(kThreadsEnvVar) +
                        ": positive integer required, got `" + text + "`");
    return static_cast<int>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            int threads_flag, bool quiet) {
  // Parse and validate everything before touching the output directory so a
  // bad config leaves no partial outputs behind.
  const std::vector<ScenarioConfig> scenarios = parse_config(config_path);
  const int threads = resolve_threads(threads_flag);

  std::filesystem::create_directories(out_dir);
  RunManifest manifest;
  manifest.timestamp = utc_timestamp();

  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const ScenarioConfig& scenario = scenarios[i];
    RunDiagnostics diagnostics;
    const std::vector<SimulationRecord> records =
        run_scenario(scenario, threads, &diagnostics);
    const BiasReport report = aggregate_bias(records, scenario.cutoffs);

    char records_name[32];
    char report_name[32];
    std::snprintf(records_name, sizeof records_name, "records_%03zu.csv", i);
    std::snprintf(report_name, sizeof report_name, "report_%03zu.csv", i);
    write_records(records, std::filesystem::path(out_dir) / records_name);
    write_bias_report(report, std::filesystem::path(out_dir) / report_name);

    ManifestEntry entry;
    entry.scenario_index = i;
    entry.config_hash = config_hash_hex(scenario);
    entry.master_seed = scenario.master_seed;
    entry.records_path = records_name;
    entry.report_path = report_name;
    manifest.entries.push_back(std::move(entry));

    if (!quiet) {
      std::cout << "scenario " << i << " [" << manifest.entries.back().config_hash
                << "]: " << scenario.n_simulations << " simulations, none rate "
                << report.none_probability;
      if (diagnostics.bootstrap_fallbacks > 0)
        std::cout << ", bootstrap fallbacks " << diagnostics.bootstrap_fallbacks;
      if (diagnostics.abc_failures > 0)
        std::cout << ", abc failures " << diagnostics.abc_failures;
      if (diagnostics.logit_prior_substitutions > 0)
        std::cout << ", prior substitutions "
                  << diagnostics.logit_prior_substitutions;
      std::cout << " -> " << records_name << ", " << report_name << "\n";
    }
  }

  write_manifest(manifest, std::filesystem::path(out_dir) / "manifest.json");
  if (!quiet)
    std::cout << "wrote " << scenarios.size() << " scenario(s) to " << out_dir
              << "\n";
  return 0;
}

int cmd_truth(const std::string& effect, const std::string& betas,
              const std::string& cutoffs_text) {
  const EffectSetting setting = effect_from_flags(effect, betas);
  const CutoffSet cutoffs = cutoffs_from_flag(cutoffs_text);
  std::string out = "cutoff,theta_true\n";
  char buf[64];
  for (const double c : cutoffs.values()) {
    const double theta = true_subset_effect(setting.coefficients, c);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", c, theta);
    out += buf;
  }
  std::cout << out;
  return 0;
}

int cmd_report(const std::string& records_path, const std::string& effect,
               const std::string& betas, const std::string& cutoffs_text,
               const std::string& out_path) {
  std::vector<SimulationRecord> records;
  try {
    records = read_records(records_path);
  } catch (const std::exception& e) {
    // A malformed records file is an input problem, not a runtime failure.
    throw ConfigError(e.what());
  }

  if (!effect.empty()) {
    const EffectSetting setting = effect_from_flags(effect, betas);
    for (SimulationRecord& rec : records)
      if (rec.selected_cutoff)
        rec.theta_true_selected =
            true_subset_effect(setting.coefficients, *rec.selected_cutoff);
  } else if (!betas.empty()) {
    throw ConfigError("--betas requires --effect custom");
  }

  std::optional<CutoffSet> cutoffs;
  if (!cutoffs_text.empty()) cutoffs = cutoffs_from_flag(cutoffs_text);

  const BiasReport report = aggregate_bias(records, cutoffs);
  if (out_path.empty()) {
    std::cout << bias_report_to_csv(report);
  } else {
    write_bias_report(report, out_path);
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "Monte Carlo study of selection bias in subgroup treatment effects "
      "after data-driven biomarker cutoff selection"};
  app.require_subcommand(1);

  std::string run_config;
  std::string run_out;
  int run_threads = 0;
  bool run_quiet = false;
  CLI::App* run = app.add_subcommand("run", "execute a scenario grid");
  run->add_option("config", run_config, "JSON configuration file")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--threads", run_threads, "worker thread count")
      ->check(CLI::PositiveNumber);
  run->add_flag("--quiet", run_quiet, "suppress progress output");

  std::string truth_effect;
  std::string truth_betas;
  std::string truth_cutoffs;
  CLI::App* truth = app.add_subcommand("truth", "print true subset effects");
  truth->add_option("--effect", truth_effect,
                    "more_or_less_1, more_or_less_2 or custom")
      ->required();
  truth->add_option("--betas", truth_betas,
                    "b0,b1,b2,b3 for --effect custom");
  truth->add_option("--cutoffs", truth_cutoffs, "comma-separated cutoffs")
      ->required();

  std::string report_records;
  std::string report_effect;
  std::string report_betas;
  std::string report_cutoffs;
  std::string report_out;
  CLI::App* report =
      app.add_subcommand("report", "re-aggregate a records file");
  report->add_option("--records", report_records, "records CSV file")
      ->required();
  report->add_option("--effect", report_effect,
                     "recompute truth under this effect setting");
  report->add_option("--betas", report_betas, "b0,b1,b2,b3 for --effect custom");
  report->add_option("--cutoffs", report_cutoffs,
                     "cutoff grid for report rows");
  report->add_option("--out", report_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_config, run_out, run_threads, run_quiet);
    if (truth->parsed()) return cmd_truth(truth_effect, truth_betas, truth_cutoffs);
    if (report->parsed())
      return cmd_report(report_records, report_effect, report_betas,
                        report_cutoffs, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cutbias
