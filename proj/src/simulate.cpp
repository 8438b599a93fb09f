#include "cutbias/simulate.hpp"

#include <stdexcept>

namespace cutbias {

TrialData generate_trial(const ModelCoefficients& coef, int n_per_arm,
                         RngStream& rng, Allocation allocation) {
  if (n_per_arm < 1) throw std::invalid_argument("n_per_arm must be positive");
  const int n = 2 * n_per_arm;
  TrialData trial;
  trial.biomarker.reserve(n);
  trial.arm.reserve(n);
  trial.response.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform01();
    int m;
    if (allocation == Allocation::FixedEqual) {
      m = i < n_per_arm ? 0 : 1;
    } else {
      m = rng.bernoulli(0.5) ? 1 : 0;
    }
    const int y = rng.bernoulli(response_probability(coef, x, m)) ? 1 : 0;
    trial.biomarker.push_back(x);
    trial.arm.push_back(static_cast<std::uint8_t>(m));
    trial.response.push_back(static_cast<std::uint8_t>(y));
  }
  return trial;
}

TrialData generate_trial(const ModelCoefficients& coef, int n_per_arm,
                         const SeedSpec& seed, Allocation allocation) {
  RngStream rng(seed);
  return generate_trial(coef, n_per_arm, rng, allocation);
}

}  // namespace cutbias
