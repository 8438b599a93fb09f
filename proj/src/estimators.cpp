#include "cutbias/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "cutbias/selection.hpp"

namespace cutbias {

std::vector<SubsetSummary> summarize_subsets(const TrialData& trial,
                                             const CutoffSet& cutoffs) {
  const std::size_t n = trial.size();
  std::vector<SubsetSummary> out(cutoffs.size());
  for (std::size_t k = 0; k < cutoffs.size(); ++k) out[k].cutoff = cutoffs[k];
  for (std::size_t i = 0; i < n; ++i) {
    const double x = trial.biomarker[i];
    const bool exp_arm = trial.arm[i] != 0;
    const bool resp = trial.response[i] != 0;
    // Cutoffs are increasing, so membership stops at the first failure.
    for (std::size_t k = 0; k < cutoffs.size() && x > cutoffs[k]; ++k) {
      SubsetSummary& s = out[k];
      if (exp_arm) {
        resp ? ++s.n_exp_responders : ++s.n_exp_nonresponders;
      } else {
        resp ? ++s.n_ctrl_responders : ++s.n_ctrl_nonresponders;
      }
    }
  }
  for (SubsetSummary& s : out) {
    if (n > 0) s.prevalence = static_cast<double>(s.subset_size()) / n;
    if (s.n_experimental() > 0 && s.n_control() > 0) {
      s.orr_diff = static_cast<double>(s.n_exp_responders) / s.n_experimental() -
                   static_cast<double>(s.n_ctrl_responders) / s.n_control();
    }
  }
  return out;
}

std::optional<double> mle_selected_estimate(
    const std::vector<SubsetSummary>& summaries,
    const SelectionOutcome& selection) {
  if (!selection.selected_cutoff) return std::nullopt;
  const double c = *selection.selected_cutoff;
  if (selection.selected_index && *selection.selected_index < summaries.size()) {
    const SubsetSummary& s = summaries[*selection.selected_index];
    if (s.cutoff == c) return s.orr_diff;
  }
  for (const SubsetSummary& s : summaries)
    if (s.cutoff == c) return s.orr_diff;
  throw std::invalid_argument("selection references a cutoff absent from summaries");
}

}  // namespace cutbias
