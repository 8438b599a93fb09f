#include "cutbias/bootstrap.hpp"

#include <stdexcept>

#include "cutbias/estimators.hpp"

namespace cutbias {

TrialData resample_trial(const TrialData& trial, const SeedSpec& seed) {
  const std::size_t n = trial.size();
  std::vector<std::uint32_t> pool[2];
  for (std::size_t i = 0; i < n; ++i)
    pool[trial.arm[i] != 0 ? 1 : 0].push_back(static_cast<std::uint32_t>(i));
  if (pool[0].empty() || pool[1].empty())
    throw std::invalid_argument("resample requires both arms non-empty");
  RngStream rng(seed);
  TrialData out;
  out.biomarker.resize(n);
  out.arm = trial.arm;
  out.response.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& arm_pool = pool[trial.arm[i] != 0 ? 1 : 0];
    const std::uint32_t j = arm_pool[rng.uniform_below(arm_pool.size())];
    out.biomarker[i] = trial.biomarker[j];
    out.response[i] = trial.response[j];
  }
  return out;
}

BootstrapResult bootstrap_correct_replicates(
    const std::function<TrialData(int)>& replicate_at, int replicates,
    const CutoffSet& cutoffs, Rule rule, const Rule2Params& rule2,
    const SelectionOutcome& observed_selection, double observed_estimate,
    BootstrapFallback fallback) {
  if (!observed_selection.selected_cutoff)
    throw std::invalid_argument("bootstrap correction requires an observed selection");
  if (replicates < 1)
    throw std::invalid_argument("replicates must be positive");
  const double observed_cutoff = *observed_selection.selected_cutoff;

  double sum_matching = 0.0;
  double sum_any = 0.0;
  int n_matching = 0;
  int n_other = 0;
  int n_none = 0;
  for (int b = 0; b < replicates; ++b) {
    const TrialData replicate = replicate_at(b);
    const auto summaries = summarize_subsets(replicate, cutoffs);
    const SelectionOutcome sel = apply_rule(summaries, rule, rule2);
    if (!sel.selected_cutoff) {
      ++n_none;
      continue;
    }
    const double estimate = *mle_selected_estimate(summaries, sel);
    sum_any += estimate;
    if (*sel.selected_cutoff == observed_cutoff) {
      ++n_matching;
      sum_matching += estimate;
    } else {
      ++n_other;
    }
  }

  BootstrapResult out;
  out.uncorrected = observed_estimate;
  out.replicates_matching_selection = n_matching;
  out.replicates_other_selection = n_other;
  out.replicates_no_selection = n_none;
  if (n_matching > 0) {
    const double h_star = sum_matching / n_matching;
    out.conditional_bias_estimate = h_star - observed_estimate;
    out.corrected = observed_estimate - out.conditional_bias_estimate;
  } else if (fallback == BootstrapFallback::UnconditionalBias &&
             n_matching + n_other > 0) {
    const double h_star = sum_any / (n_matching + n_other);
    out.conditional_bias_estimate = h_star - observed_estimate;
    out.corrected = observed_estimate - out.conditional_bias_estimate;
    out.fallback_used = true;
  } else {
    // No usable replicate mean at all; refuse to fabricate one.
    out.conditional_bias_estimate = 0.0;
    out.corrected = observed_estimate;
    out.fallback_used = true;
  }
  return out;
}

BootstrapResult bootstrap_correct(const TrialData& trial,
                                  const CutoffSet& cutoffs, Rule rule,
                                  const Rule2Params& rule2,
                                  const SelectionOutcome& observed_selection,
                                  double observed_estimate,
                                  const BootstrapConfig& config) {
  return bootstrap_correct_replicates(
      [&](int b) {
        return resample_trial(trial,
                              config.seed.child(static_cast<std::uint64_t>(b)));
      },
      config.replicates, cutoffs, rule, rule2, observed_selection,
      observed_estimate, config.fallback);
}

}  // namespace cutbias
