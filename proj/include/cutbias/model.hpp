#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cutbias/trial.hpp"

namespace cutbias {

// Coefficients of the logistic response model
//   logit P(y=1 | x, m) = beta0 + beta1*x + beta2*m + beta3*x*m
struct ModelCoefficients {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;

  bool finite() const;
  bool operator==(const ModelCoefficients&) const = default;
};

enum class EffectName { MoreOrLess1, MoreOrLess2, Custom };

// Named magnitude-of-predictive-effect settings plus a custom escape hatch.
struct EffectSetting {
  EffectName name = EffectName::Custom;
  ModelCoefficients coefficients;

  static EffectSetting more_or_less_1();  // (-0.4, 0, 0.2, 0.2)
  static EffectSetting more_or_less_2();  // (-0.4, 0, 0.2, 0.5)
  static EffectSetting custom(ModelCoefficients coef);
};

// Ordered candidate cutoffs c_1 < ... < c_K. A cutoff of 0 denotes the full
// population (membership is strict, x > c). Values must lie in [0, 1).
class CutoffSet {
 public:
  static CutoffSet from(std::vector<double> values);  // throws invalid_argument

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }

 private:
  std::vector<double> values_;
};

// Result of a maximum-likelihood logistic fit. Standard errors are the
// square roots of the inverse observed-information diagonal and are only
// available when the fit converged.
struct FittedLogistic {
  ModelCoefficients coefficients;
  std::optional<std::array<double, 4>> standard_errors;
  bool converged = false;
  int iterations = 0;
};

double expit(double z);
// Overflow-safe log(1 + e^z).
double softplus(double z);

// P(y=1 | x, m) under the four-coefficient model. m is 0 or 1.
double response_probability(const ModelCoefficients& coef, double x, int m);

// Exact treatment effect in the subset {x > cutoff} with x ~ Uniform(0,1):
//   (1/(1-c)) * Int_c^1 [expit(b0+b2+(b1+b3)x) - expit(b0+b1 x)] dx
// evaluated in closed form via softplus. cutoff = 0 is the full population.
// Throws std::domain_error unless cutoff is in [0, 1).
double true_subset_effect(const ModelCoefficients& coef, double cutoff);

// Same integral by adaptive quadrature (absolute tolerance 1e-12);
// independent cross-check of the closed form.
double true_subset_effect_quadrature(const ModelCoefficients& coef,
                                     double cutoff);

// IRLS maximum-likelihood fit of the four-coefficient model. Never throws on
// degenerate data: separation and rank deficiency yield converged = false.
FittedLogistic fit_logistic(const TrialData& trial);

}  // namespace cutbias
