#pragma once

#include <functional>

#include "cutbias/model.hpp"
#include "cutbias/rng.hpp"
#include "cutbias/selection.hpp"
#include "cutbias/trial.hpp"

namespace cutbias {

// What to return when no replicate re-selects the observed cutoff:
// the uncorrected estimate, or a correction from every replicate with a
// defined selection regardless of which cutoff it chose.
enum class BootstrapFallback { ReturnUncorrected, UnconditionalBias };

struct BootstrapConfig {
  int replicates = 2000;
  BootstrapFallback fallback = BootstrapFallback::ReturnUncorrected;
  SeedSpec seed;
};

// corrected = 2*uncorrected - h_star, where h_star is the mean replicate
// selected-estimate over replicates that re-selected the observed cutoff;
// equivalently corrected = uncorrected - conditional_bias_estimate with
// conditional_bias_estimate = h_star - uncorrected.
struct BootstrapResult {
  double corrected = 0.0;
  double uncorrected = 0.0;
  double conditional_bias_estimate = 0.0;
  int replicates_matching_selection = 0;
  int replicates_other_selection = 0;
  int replicates_no_selection = 0;
  bool fallback_used = false;
};

// Nonparametric pair resampling: within each arm independently, subjects
// are drawn with replacement from that arm's observed (biomarker, response)
// pairs. Arm sizes and subject order are preserved. Throws
// std::invalid_argument when an arm is empty.
TrialData resample_trial(const TrialData& trial, const SeedSpec& seed);

// Correction core shared by the Monte Carlo path and enumeration tests:
// replicate_at(b) supplies the b-th resampled trial, b in [0, replicates).
BootstrapResult bootstrap_correct_replicates(
    const std::function<TrialData(int)>& replicate_at, int replicates,
    const CutoffSet& cutoffs, Rule rule, const Rule2Params& rule2,
    const SelectionOutcome& observed_selection, double observed_estimate,
    BootstrapFallback fallback);

// Monte Carlo bootstrap correction; replicate b resamples with seed
// config.seed.child(b). Requires an observed selection.
BootstrapResult bootstrap_correct(const TrialData& trial,
                                  const CutoffSet& cutoffs, Rule rule,
                                  const Rule2Params& rule2,
                                  const SelectionOutcome& observed_selection,
                                  double observed_estimate,
                                  const BootstrapConfig& config);

}  // namespace cutbias
