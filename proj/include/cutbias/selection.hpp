#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cutbias/estimators.hpp"

namespace cutbias {

enum class Rule { Rule1, Rule2 };

// Parameters of the posterior-probability rule. Defaults reproduce the
// published rule: P(ORR difference > 0.15) > 0.7 under uniform priors.
struct Rule2Params {
  double effect_threshold = 0.15;
  double probability_threshold = 0.7;
  double prior_alpha = 1.0;
  double prior_beta = 1.0;

  bool operator==(const Rule2Params&) const = default;
};

struct SubsetDiagnostic {
  double cutoff = 0.0;
  std::optional<double> orr_diff;
  std::optional<double> posterior_probability;  // Rule 2 only
  bool eligible = false;
};

// At most one cutoff is ever selected, and it was eligible.
struct SelectionOutcome {
  std::optional<double> selected_cutoff;
  std::optional<std::size_t> selected_index;  // position in the cutoff set
  Rule rule = Rule::Rule1;
  std::vector<SubsetDiagnostic> diagnostics;
};

// Rule 1: among subsets with a defined effect, the one with the largest
// observed effect. Ties go to the smaller cutoff; none when every subset
// is undefined.
SelectionOutcome select_rule1(const std::vector<SubsetSummary>& summaries);

// P(p_E - p_C > effect_threshold | subset counts) under independent
// Beta(prior_alpha, prior_beta) priors per arm. Deterministic composite
// Gauss-Legendre integration of the posterior density product; absolute
// error stays below 1e-6 at the default resolution (panels per interval).
// Throws std::invalid_argument when an arm of the subset is empty.
double posterior_prob_exceeds(const SubsetSummary& summary,
                              const Rule2Params& params,
                              int quadrature_resolution = 32);

// Rule 2: among subsets whose posterior probability clears
// params.probability_threshold, the one with the largest prevalence (the
// smallest cutoff, under nesting); none when no subset passes.
SelectionOutcome select_rule2(const std::vector<SubsetSummary>& summaries,
                              const Rule2Params& params = {});

SelectionOutcome apply_rule(const std::vector<SubsetSummary>& summaries,
                            Rule rule, const Rule2Params& params = {});

}  // namespace cutbias
