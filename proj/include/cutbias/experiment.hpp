#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cutbias/abc.hpp"
#include "cutbias/bootstrap.hpp"
#include "cutbias/model.hpp"
#include "cutbias/selection.hpp"
#include "cutbias/simulate.hpp"

namespace cutbias {

struct EstimatorSet {
  bool mle = true;  // always computed; corrections start from it
  bool bootstrap = false;
  bool abc = false;
};

// Everything needed to run one simulation scenario. Seeds inside the
// bootstrap and abc sub-configs are ignored here: per-simulation seeds
// derive from master_seed (trial = (master, sim), bootstrap = its child 1,
// abc = its child 2).
struct ScenarioConfig {
  EffectSetting effect_setting = EffectSetting::more_or_less_1();
  int n_per_arm = 40;
  CutoffSet cutoffs = CutoffSet::from({0.3, 0.6});
  Rule rule = Rule::Rule1;
  Rule2Params rule2;
  int n_simulations = 10000;
  EstimatorSet estimators;
  BootstrapConfig bootstrap;
  AbcConfig abc;
  AbcPriorRegime abc_prior = AbcPriorRegime::StandardNormal;
  double abc_true_centered_variance = 0.2;
  std::uint64_t master_seed = 0;
  Allocation allocation = Allocation::FixedEqual;
};

// One simulated trial's estimates. Estimates are present iff a cutoff was
// selected; flags are present iff the matching estimate is.
struct SimulationRecord {
  int sim_index = 0;
  std::optional<double> selected_cutoff;
  std::optional<double> theta_true_selected;
  std::optional<double> estimate_mle;
  std::optional<double> estimate_bootstrap;
  std::optional<bool> bootstrap_fallback;
  std::optional<double> estimate_abc;
  std::optional<bool> abc_failed;

  bool operator==(const SimulationRecord&) const = default;
};

struct RunDiagnostics {
  // Simulations whose non-converged logistic fit sent the LogitFitted prior
  // to the StandardNormal fallback.
  int logit_prior_substitutions = 0;
  int bootstrap_fallbacks = 0;
  int abc_failures = 0;
};

// Runs config.n_simulations independent trials. The result is ordered by
// sim_index and is identical at any thread count for a fixed master seed.
std::vector<SimulationRecord> run_scenario(const ScenarioConfig& config,
                                           int threads = 1,
                                           RunDiagnostics* diagnostics = nullptr);

struct BiasCell {
  std::string estimator;  // "mle", "bootstrap", "abc"
  double selected_cutoff = 0.0;
  int n_selected = 0;
  double selection_probability = 0.0;
  std::optional<double> conditional_bias;  // mean(estimate - truth), N >= 1
  std::optional<double> sd;                // sample SD of the same, N >= 2
  std::optional<double> se;                // sd / sqrt(N)
};

struct BiasReport {
  std::vector<BiasCell> cells;  // estimator-major, cutoffs ascending
  int n_simulations = 0;
  int n_none = 0;
  double none_probability = 0.0;
};

// Conditional bias per (estimator, selected cutoff) over the simulations
// that selected that cutoff, plus selection probabilities. `cutoffs` fixes
// the set of reported rows (cells with zero selections get empty
// statistics); when absent, the cutoffs observed in the records are used.
// Throws std::invalid_argument on empty records or on a record selecting a
// cutoff outside `cutoffs`.
BiasReport aggregate_bias(const std::vector<SimulationRecord>& records,
                          const std::optional<CutoffSet>& cutoffs = {});

struct GridResult {
  ScenarioConfig config;
  std::vector<SimulationRecord> records;
  BiasReport report;
  RunDiagnostics diagnostics;
  std::optional<std::string> error;  // set when the scenario failed
};

// Runs every scenario; per-scenario failures are recorded, not fatal.
// Throws std::invalid_argument on an empty list.
std::vector<GridResult> run_grid(const std::vector<ScenarioConfig>& configs,
                                 int threads = 1);

}  // namespace cutbias
