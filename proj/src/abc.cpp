#include "cutbias/abc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cutbias/estimators.hpp"
#include "cutbias/simulate.hpp"

namespace cutbias {

AbcPriorSpec AbcPriorSpec::true_centered(const ModelCoefficients& coef,
                                         double variance) {
  if (!(variance > 0.0))
    throw std::invalid_argument("prior variance must be positive");
  AbcPriorSpec spec;
  spec.regime = AbcPriorRegime::TrueCentered;
  spec.true_coefficients = coef;
  spec.true_centered_variance = variance;
  return spec;
}

AbcPriorSpec AbcPriorSpec::standard_normal() { return AbcPriorSpec{}; }

AbcPriorSpec AbcPriorSpec::logit_fitted(const FittedLogistic& fit) {
  AbcPriorSpec spec;
  spec.regime = AbcPriorRegime::LogitFitted;
  spec.fitted = fit;
  return spec;
}

SummaryStats compute_summary_stats(const TrialData& trial,
                                   const CutoffSet& cutoffs) {
  SummaryStats stats;
  int n_arm[2] = {0, 0};
  int r_arm[2] = {0, 0};
  for (std::size_t i = 0; i < trial.size(); ++i) {
    const int m = trial.arm[i] != 0 ? 1 : 0;
    ++n_arm[m];
    r_arm[m] += trial.response[i] != 0 ? 1 : 0;
  }
  if (n_arm[1] > 0)
    stats.full_pop_exp_rate = static_cast<double>(r_arm[1]) / n_arm[1];
  if (n_arm[0] > 0)
    stats.full_pop_ctrl_rate = static_cast<double>(r_arm[0]) / n_arm[0];
  const auto summaries = summarize_subsets(trial, cutoffs);
  stats.subset_exp_rates.resize(summaries.size());
  stats.subset_ctrl_rates.resize(summaries.size());
  for (std::size_t k = 0; k < summaries.size(); ++k) {
    const SubsetSummary& s = summaries[k];
    if (s.n_experimental() > 0)
      stats.subset_exp_rates[k] =
          static_cast<double>(s.n_exp_responders) / s.n_experimental();
    if (s.n_control() > 0)
      stats.subset_ctrl_rates[k] =
          static_cast<double>(s.n_ctrl_responders) / s.n_control();
  }
  return stats;
}

ModelCoefficients draw_prior(const AbcPriorSpec& spec, RngStream& rng) {
  double mean[4];
  double sd[4];
  switch (spec.regime) {
    case AbcPriorRegime::StandardNormal:
      for (int j = 0; j < 4; ++j) {
        mean[j] = 0.0;
        sd[j] = 1.0;
      }
      break;
    case AbcPriorRegime::TrueCentered: {
      if (!spec.true_coefficients)
        throw std::invalid_argument("true-centered prior requires coefficients");
      const ModelCoefficients& c = *spec.true_coefficients;
      const double s = std::sqrt(spec.true_centered_variance);
      mean[0] = c.beta0;
      mean[1] = c.beta1;
      mean[2] = c.beta2;
      mean[3] = c.beta3;
      for (int j = 0; j < 4; ++j) sd[j] = s;
      break;
    }
    case AbcPriorRegime::LogitFitted: {
      if (!spec.fitted || !spec.fitted->converged || !spec.fitted->standard_errors)
        throw std::invalid_argument(
            "logit-fitted prior requires a converged fit; fall back to the "
            "standard-normal regime");
      const ModelCoefficients& c = spec.fitted->coefficients;
      const auto& se = *spec.fitted->standard_errors;
      mean[0] = c.beta0;
      mean[1] = c.beta1;
      mean[2] = c.beta2;
      mean[3] = c.beta3;
      for (int j = 0; j < 4; ++j) sd[j] = se[j];
      break;
    }
  }
  ModelCoefficients out;
  out.beta0 = mean[0] + sd[0] * rng.normal();
  out.beta1 = mean[1] + sd[1] * rng.normal();
  out.beta2 = mean[2] + sd[2] * rng.normal();
  out.beta3 = mean[3] + sd[3] * rng.normal();
  return out;
}

ModelCoefficients draw_prior(const AbcPriorSpec& spec, const SeedSpec& seed) {
  RngStream rng(seed);
  return draw_prior(spec, rng);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Max |observed - simulated| over cells with a defined observed value;
// +inf when any such cell is undefined in the simulation. Acceptance at
// tolerance eps is discrepancy <= eps, which lets the epsilon ladder reuse
// one scalar per draw.
double discrepancy(const SummaryStats& observed, const SummaryStats& simulated) {
  if (observed.subset_exp_rates.size() != simulated.subset_exp_rates.size() ||
      observed.subset_ctrl_rates.size() != simulated.subset_ctrl_rates.size())
    throw std::invalid_argument("summary statistics cutoff counts differ");
  double worst = 0.0;
  const auto compare = [&worst](const std::optional<double>& obs,
                                const std::optional<double>& sim) {
    if (!obs) return;
    if (!sim) {
      worst = kInf;
      return;
    }
    worst = std::max(worst, std::fabs(*obs - *sim));
  };
  compare(observed.full_pop_exp_rate, simulated.full_pop_exp_rate);
  compare(observed.full_pop_ctrl_rate, simulated.full_pop_ctrl_rate);
  for (std::size_t k = 0; k < observed.subset_exp_rates.size(); ++k) {
    compare(observed.subset_exp_rates[k], simulated.subset_exp_rates[k]);
    compare(observed.subset_ctrl_rates[k], simulated.subset_ctrl_rates[k]);
  }
  return worst;
}

}  // namespace

bool abc_accept(const SummaryStats& observed, const SummaryStats& simulated,
                double epsilon) {
  return discrepancy(observed, simulated) <= epsilon;
}

AbcResult abc_adjust(const TrialData& trial, const CutoffSet& cutoffs,
                     const SelectionOutcome& observed_selection,
                     const AbcPriorSpec& prior, const AbcConfig& config) {
  if (!observed_selection.selected_cutoff || !observed_selection.selected_index)
    throw std::invalid_argument("abc adjustment requires an observed selection");
  if (!(config.epsilon > 0.0 && config.epsilon < 1.0))
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (config.min_accepted < 1 || config.draws < config.min_accepted)
    throw std::invalid_argument("draws must be at least min_accepted (>= 1)");
  if (config.max_epsilon_doublings < 0)
    throw std::invalid_argument("max_epsilon_doublings must be non-negative");
  const std::size_t sel = *observed_selection.selected_index;
  if (sel >= observed_selection.diagnostics.size() ||
      !observed_selection.diagnostics[sel].orr_diff)
    throw std::invalid_argument("observed selection lacks a defined estimate");
  const double c_select = *observed_selection.selected_cutoff;
  const double observed_mle = *observed_selection.diagnostics[sel].orr_diff;
  const int n_total = static_cast<int>(trial.size());
  if (n_total < 2 || n_total % 2 != 0)
    throw std::invalid_argument("trial size must be even and at least 2");

  const SummaryStats observed = compute_summary_stats(trial, cutoffs);
  const std::size_t n_cutoffs = cutoffs.size();

  // Flattened observed cells in comparison order; -1 marks undefined.
  std::vector<double> obs_cell(2 + 2 * n_cutoffs, -1.0);
  if (observed.full_pop_exp_rate) obs_cell[0] = *observed.full_pop_exp_rate;
  if (observed.full_pop_ctrl_rate) obs_cell[1] = *observed.full_pop_ctrl_rate;
  for (std::size_t k = 0; k < n_cutoffs; ++k) {
    if (observed.subset_exp_rates[k])
      obs_cell[2 + 2 * k] = *observed.subset_exp_rates[k];
    if (observed.subset_ctrl_rates[k])
      obs_cell[3 + 2 * k] = *observed.subset_ctrl_rates[k];
  }

  // Per-draw cache for the epsilon ladder: the discrepancy and the drawn
  // model's exact effect at the observed cutoff.
  std::vector<double> disc(config.draws);
  std::vector<double> theta(config.draws);
  std::vector<int> r_count(2 + 2 * n_cutoffs);
  std::vector<int> n_count(2 + 2 * n_cutoffs);
  for (int j = 0; j < config.draws; ++j) {
    RngStream rng(config.seed.child(static_cast<std::uint64_t>(j)));
    const ModelCoefficients drawn = draw_prior(prior, rng);
    std::fill(r_count.begin(), r_count.end(), 0);
    std::fill(n_count.begin(), n_count.end(), 0);
    // Synthetic trial of the same total size, arms Bernoulli(0.5); counts
    // are accumulated directly instead of materializing the dataset. The
    // variate order (biomarker, arm, response) matches generate_trial.
    for (int i = 0; i < n_total; ++i) {
      const double x = rng.uniform01();
      const int m = rng.bernoulli(0.5) ? 1 : 0;
      const int y =
          rng.bernoulli(response_probability(drawn, x, m)) ? 1 : 0;
      const int cell = m == 1 ? 0 : 1;
      ++n_count[cell];
      r_count[cell] += y;
      for (std::size_t k = 0; k < n_cutoffs && x > cutoffs[k]; ++k) {
        const std::size_t sub = 2 + 2 * k + (m == 1 ? 0 : 1);
        ++n_count[sub];
        r_count[sub] += y;
      }
    }
    double worst = 0.0;
    for (std::size_t c = 0; c < obs_cell.size(); ++c) {
      if (obs_cell[c] < 0.0) continue;
      if (n_count[c] == 0) {
        worst = kInf;
        break;
      }
      worst = std::max(
          worst, std::fabs(obs_cell[c] -
                           static_cast<double>(r_count[c]) / n_count[c]));
    }
    disc[j] = worst;
    theta[j] = true_subset_effect(drawn, c_select);
  }

  double epsilon = config.epsilon;
  std::vector<double> accepted;
  for (int doubling = 0;; ++doubling) {
    accepted.clear();
    for (int j = 0; j < config.draws; ++j)
      if (disc[j] <= epsilon) accepted.push_back(theta[j]);
    if (static_cast<int>(accepted.size()) >= config.min_accepted) break;
    if (doubling >= config.max_epsilon_doublings) break;
    epsilon *= 2.0;
  }

  AbcResult out;
  out.accepted_count = static_cast<int>(accepted.size());
  out.effective_epsilon = epsilon;
  out.accepted_thetas = accepted;
  if (out.accepted_count >= config.min_accepted) {
    std::vector<double> sorted = accepted;
    std::sort(sorted.begin(), sorted.end());
    // Lower median: the ceil(n/2)-th smallest value.
    out.adjusted_estimate = sorted[(sorted.size() + 1) / 2 - 1];
  } else {
    out.failed = true;
    out.adjusted_estimate = observed_mle;
  }
  return out;
}

}  // namespace cutbias
