#include "cutbias/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "cutbias/estimators.hpp"

namespace cutbias {

namespace {

struct Counters {
  std::atomic<int> logit_prior_substitutions{0};
  std::atomic<int> bootstrap_fallbacks{0};
  std::atomic<int> abc_failures{0};
};

SimulationRecord simulate_one(const ScenarioConfig& config, int sim_index,
                              Counters& counters) {
  SimulationRecord rec;
  rec.sim_index = sim_index;
  const ModelCoefficients& coef = config.effect_setting.coefficients;
  const SeedSpec sim_seed{config.master_seed,
                          static_cast<std::uint64_t>(sim_index)};
  const TrialData trial =
      generate_trial(coef, config.n_per_arm, sim_seed, config.allocation);
  const auto summaries = summarize_subsets(trial, config.cutoffs);
  const SelectionOutcome outcome =
      apply_rule(summaries, config.rule, config.rule2);
  if (!outcome.selected_cutoff) return rec;

  const double cutoff = *outcome.selected_cutoff;
  rec.selected_cutoff = cutoff;
  rec.theta_true_selected = true_subset_effect(coef, cutoff);
  const double mle = *mle_selected_estimate(summaries, outcome);
  rec.estimate_mle = mle;

  if (config.estimators.bootstrap) {
    BootstrapConfig bc = config.bootstrap;
    bc.seed = sim_seed.child(1);
    const BootstrapResult r = bootstrap_correct(
        trial, config.cutoffs, config.rule, config.rule2, outcome, mle, bc);
    rec.estimate_bootstrap = r.corrected;
    rec.bootstrap_fallback = r.fallback_used;
    if (r.fallback_used) ++counters.bootstrap_fallbacks;
  }

  if (config.estimators.abc) {
    AbcConfig ac = config.abc;
    ac.seed = sim_seed.child(2);
    AbcPriorSpec prior;
    switch (config.abc_prior) {
      case AbcPriorRegime::TrueCentered:
        prior = AbcPriorSpec::true_centered(coef,
                                            config.abc_true_centered_variance);
        break;
      case AbcPriorRegime::StandardNormal:
        prior = AbcPriorSpec::standard_normal();
        break;
      case AbcPriorRegime::LogitFitted: {
        const FittedLogistic fit = fit_logistic(trial);
        if (fit.converged) {
          prior = AbcPriorSpec::logit_fitted(fit);
        } else {
          prior = AbcPriorSpec::standard_normal();
          ++counters.logit_prior_substitutions;
        }
        break;
      }
    }
    const AbcResult r =
        abc_adjust(trial, config.cutoffs, outcome, prior, ac);
    rec.estimate_abc = r.adjusted_estimate;
    rec.abc_failed = r.failed;
    if (r.failed) ++counters.abc_failures;
  }
  return rec;
}

void validate(const ScenarioConfig& config) {
  if (config.n_per_arm < 1)
    throw std::invalid_argument("n_per_arm must be positive");
  if (config.n_simulations < 1)
    throw std::invalid_argument("n_simulations must be positive");
  if (!config.effect_setting.coefficients.finite())
    throw std::invalid_argument("effect coefficients must be finite");
}

}  // namespace

std::vector<SimulationRecord> run_scenario(const ScenarioConfig& config,
                                           int threads,
                                           RunDiagnostics* diagnostics) {
  validate(config);
  const int n = config.n_simulations;
  std::vector<SimulationRecord> records(n);
  Counters counters;
  std::atomic<int> next{0};
  std::atomic<bool> aborted{false};
  std::mutex error_mutex;
  std::string error;

  const auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n || aborted.load(std::memory_order_relaxed)) break;
      try {
        records[i] = simulate_one(config, i, counters);
      } catch (const std::exception& e) {
        {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (error.empty()) error = e.what();
        }
        aborted.store(true, std::memory_order_relaxed);
        break;
      }
    }
  };

  const int n_threads = std::clamp(threads, 1, n);
  std::vector<std::thread> pool;
  pool.reserve(n_threads - 1);
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (aborted.load()) throw std::runtime_error("simulation failed: " + error);

  if (diagnostics) {
    diagnostics->logit_prior_substitutions = counters.logit_prior_substitutions;
    diagnostics->bootstrap_fallbacks = counters.bootstrap_fallbacks;
    diagnostics->abc_failures = counters.abc_failures;
  }
  return records;
}

namespace {

struct Welford {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
};

}  // namespace

BiasReport aggregate_bias(const std::vector<SimulationRecord>& records,
                          const std::optional<CutoffSet>& cutoffs) {
  if (records.empty())
    throw std::invalid_argument("no records to aggregate");

  std::vector<double> cuts;
  if (cutoffs) {
    cuts = cutoffs->values();
  } else {
    for (const SimulationRecord& rec : records)
      if (rec.selected_cutoff) cuts.push_back(*rec.selected_cutoff);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  }
  const auto cutoff_index = [&cuts](double c) -> std::size_t {
    const auto it = std::find(cuts.begin(), cuts.end(), c);
    if (it == cuts.end())
      throw std::invalid_argument("record selects a cutoff outside the report set");
    return static_cast<std::size_t>(it - cuts.begin());
  };

  const std::size_t n_cuts = cuts.size();
  std::vector<int> n_selected(n_cuts, 0);
  std::vector<Welford> acc_mle(n_cuts), acc_boot(n_cuts), acc_abc(n_cuts);
  bool any_mle = false, any_boot = false, any_abc = false;
  int n_none = 0;
  for (const SimulationRecord& rec : records) {
    if (!rec.selected_cutoff) {
      ++n_none;
      continue;
    }
    if (!rec.theta_true_selected)
      throw std::invalid_argument("selecting record lacks its true effect");
    const std::size_t k = cutoff_index(*rec.selected_cutoff);
    ++n_selected[k];
    const double truth = *rec.theta_true_selected;
    if (rec.estimate_mle) {
      acc_mle[k].add(*rec.estimate_mle - truth);
      any_mle = true;
    }
    if (rec.estimate_bootstrap) {
      acc_boot[k].add(*rec.estimate_bootstrap - truth);
      any_boot = true;
    }
    if (rec.estimate_abc) {
      acc_abc[k].add(*rec.estimate_abc - truth);
      any_abc = true;
    }
  }

  BiasReport report;
  report.n_simulations = static_cast<int>(records.size());
  report.n_none = n_none;
  report.none_probability =
      static_cast<double>(n_none) / static_cast<double>(records.size());

  const auto emit = [&](const char* name, const std::vector<Welford>& acc) {
    for (std::size_t k = 0; k < n_cuts; ++k) {
      BiasCell cell;
      cell.estimator = name;
      cell.selected_cutoff = cuts[k];
      cell.n_selected = n_selected[k];
      cell.selection_probability = static_cast<double>(n_selected[k]) /
                                   static_cast<double>(records.size());
      if (acc[k].n >= 1) cell.conditional_bias = acc[k].mean;
      if (acc[k].n >= 2) {
        cell.sd = std::sqrt(acc[k].m2 / (acc[k].n - 1));
        cell.se = *cell.sd / std::sqrt(static_cast<double>(acc[k].n));
      }
      report.cells.push_back(std::move(cell));
    }
  };
  // MLE rows anchor the report whenever the cutoff set is known, even if
  // every simulation selected none.
  if (any_mle || cutoffs) emit("mle", acc_mle);
  if (any_boot) emit("bootstrap", acc_boot);
  if (any_abc) emit("abc", acc_abc);
  return report;
}

std::vector<GridResult> run_grid(const std::vector<ScenarioConfig>& configs,
                                 int threads) {
  if (configs.empty())
    throw std::invalid_argument("no scenarios to run");
  std::vector<GridResult> out;
  out.reserve(configs.size());
  for (const ScenarioConfig& config : configs) {
    GridResult result;
    result.config = config;
    try {
      result.records = run_scenario(config, threads, &result.diagnostics);
      result.report = aggregate_bias(result.records, config.cutoffs);
    } catch (const std::exception& e) {
      result.error = e.what();
    }
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace cutbias
