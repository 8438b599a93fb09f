#pragma once

#include <optional>
#include <vector>

#include "cutbias/model.hpp"
#include "cutbias/trial.hpp"

namespace cutbias {

struct SelectionOutcome;

// Response counts within one subset {x > cutoff}, split by arm: the 2x2
// table behind the per-subset ORR-difference estimate. orr_diff is defined
// iff both arms of the subset are non-empty.
struct SubsetSummary {
  double cutoff = 0.0;
  int n_exp_responders = 0;
  int n_exp_nonresponders = 0;
  int n_ctrl_responders = 0;
  int n_ctrl_nonresponders = 0;
  std::optional<double> orr_diff;
  double prevalence = 0.0;  // subset size / total n

  int n_experimental() const { return n_exp_responders + n_exp_nonresponders; }
  int n_control() const { return n_ctrl_responders + n_ctrl_nonresponders; }
  int subset_size() const { return n_experimental() + n_control(); }

  bool operator==(const SubsetSummary&) const = default;
};

// One summary per cutoff, in cutoff order. Membership is strict: x > c, so
// a cutoff of 0 reproduces whole-trial response rates.
std::vector<SubsetSummary> summarize_subsets(const TrialData& trial,
                                             const CutoffSet& cutoffs);

// The orr_diff of the selected subset; none when nothing was selected.
// Throws std::invalid_argument when the selection references a cutoff
// absent from summaries.
std::optional<double> mle_selected_estimate(
    const std::vector<SubsetSummary>& summaries,
    const SelectionOutcome& selection);

}  // namespace cutbias
