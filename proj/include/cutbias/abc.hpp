#pragma once

#include <optional>
#include <vector>

#include "cutbias/model.hpp"
#include "cutbias/rng.hpp"
#include "cutbias/selection.hpp"
#include "cutbias/trial.hpp"

namespace cutbias {

enum class AbcPriorRegime { TrueCentered, StandardNormal, LogitFitted };

// Independent normal priors over the four model coefficients.
// TrueCentered: mean = true coefficient, variance = true_centered_variance.
// StandardNormal: mean 0, variance 1.
// LogitFitted: mean = fitted coefficient, sd = its standard error.
struct AbcPriorSpec {
  AbcPriorRegime regime = AbcPriorRegime::StandardNormal;
  std::optional<ModelCoefficients> true_coefficients;
  std::optional<FittedLogistic> fitted;
  double true_centered_variance = 0.2;

  static AbcPriorSpec true_centered(const ModelCoefficients& coef,
                                    double variance = 0.2);
  static AbcPriorSpec standard_normal();
  static AbcPriorSpec logit_fitted(const FittedLogistic& fit);
};

struct AbcConfig {
  int draws = 100000;
  double epsilon = 0.05;
  int min_accepted = 50;
  int max_epsilon_doublings = 3;
  SeedSpec seed;
};

// Full-population and per-subset response rates by arm; an empty cell is an
// empty optional.
struct SummaryStats {
  std::optional<double> full_pop_exp_rate;
  std::optional<double> full_pop_ctrl_rate;
  std::vector<std::optional<double>> subset_exp_rates;
  std::vector<std::optional<double>> subset_ctrl_rates;
};

struct AbcResult {
  double adjusted_estimate = 0.0;
  int accepted_count = 0;
  double effective_epsilon = 0.0;
  std::vector<double> accepted_thetas;  // draw order
  bool failed = false;
};

SummaryStats compute_summary_stats(const TrialData& trial,
                                   const CutoffSet& cutoffs);

// One prior draw: four independent normals per the regime. Throws
// std::invalid_argument for a LogitFitted spec whose fit did not converge
// (callers substitute the standard-normal regime).
ModelCoefficients draw_prior(const AbcPriorSpec& spec, RngStream& rng);
ModelCoefficients draw_prior(const AbcPriorSpec& spec, const SeedSpec& seed);

// True iff every cell that is defined in `observed` is matched by a defined
// simulated cell within epsilon; a defined observed cell with an undefined
// simulated counterpart rejects the draw.
bool abc_accept(const SummaryStats& observed, const SummaryStats& simulated,
                double epsilon);

// Rejection sampler. Per draw: sample coefficients from the prior, simulate
// a synthetic trial of the same total size (biomarker Uniform(0,1), arms
// Bernoulli(0.5)), accept when its summary statistics are within epsilon of
// the observed ones, and record the drawn model's true subset effect at the
// observed selected cutoff. The adjusted estimate is the lower median of
// the accepted effects. When fewer than min_accepted draws pass, epsilon is
// doubled and acceptance re-run over the cached draws, up to
// max_epsilon_doublings times; still short, the result is flagged failed
// and carries the observed estimate unchanged.
AbcResult abc_adjust(const TrialData& trial, const CutoffSet& cutoffs,
                     const SelectionOutcome& observed_selection,
                     const AbcPriorSpec& prior, const AbcConfig& config);

}  // namespace cutbias
