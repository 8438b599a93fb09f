#pragma once

#include "cutbias/model.hpp"
#include "cutbias/rng.hpp"
#include "cutbias/trial.hpp"

namespace cutbias {

// FixedEqual: exactly n_per_arm subjects per arm (first block control, then
// experimental). BernoulliHalf: each arm indicator drawn Bernoulli(0.5),
// total still 2*n_per_arm.
enum class Allocation { FixedEqual, BernoulliHalf };

// Draws one trial of 2*n_per_arm subjects: biomarker Uniform(0,1)
// independent of arm, response Bernoulli at the model probability.
// Subjects are generated in order (biomarker, arm indicator when drawn,
// response), so the output depends only on the arguments.
TrialData generate_trial(const ModelCoefficients& coef, int n_per_arm,
                         RngStream& rng,
                         Allocation allocation = Allocation::FixedEqual);

TrialData generate_trial(const ModelCoefficients& coef, int n_per_arm,
                         const SeedSpec& seed,
                         Allocation allocation = Allocation::FixedEqual);

}  // namespace cutbias
