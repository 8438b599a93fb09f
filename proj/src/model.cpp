#include "cutbias/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cutbias {

bool ModelCoefficients::finite() const {
  return std::isfinite(beta0) && std::isfinite(beta1) && std::isfinite(beta2) &&
         std::isfinite(beta3);
}

EffectSetting EffectSetting::more_or_less_1() {
  return EffectSetting{EffectName::MoreOrLess1,
                       ModelCoefficients{-0.4, 0.0, 0.2, 0.2}};
}

EffectSetting EffectSetting::more_or_less_2() {
  return EffectSetting{EffectName::MoreOrLess2,
                       ModelCoefficients{-0.4, 0.0, 0.2, 0.5}};
}

EffectSetting EffectSetting::custom(ModelCoefficients coef) {
  if (!coef.finite())
    throw std::invalid_argument("effect coefficients must be finite");
  return EffectSetting{EffectName::Custom, coef};
}

CutoffSet CutoffSet::from(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("cutoffs: non-empty required");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] < 1.0))
      throw std::invalid_argument("cutoffs: each value must lie in [0, 1)");
    if (i > 0 && !(values[i] > values[i - 1]))
      throw std::invalid_argument("cutoffs: strictly increasing required");
  }
  CutoffSet set;
  set.values_ = std::move(values);
  return set;
}

double expit(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

double response_probability(const ModelCoefficients& coef, double x, int m) {
  return expit(coef.beta0 + coef.beta1 * x + coef.beta2 * m +
               coef.beta3 * x * m);
}

namespace {

void check_cutoff_domain(double cutoff) {
  if (!(cutoff >= 0.0 && cutoff < 1.0))
    throw std::domain_error("cutoff must lie in [0, 1)");
}

// Int_c^1 expit(a + b x) dx. The softplus antiderivative cancels
// catastrophically as b -> 0, so tiny slopes use the first-order expansion
// around b = 0 instead.
double arm_integral(double a, double b, double c) {
  if (std::fabs(b) < 1e-8) {
    const double p = expit(a);
    return p * (1.0 - c) + b * p * (1.0 - p) * (1.0 - c * c) / 2.0;
  }
  return (softplus(a + b) - softplus(a + b * c)) / b;
}

}  // namespace

double true_subset_effect(const ModelCoefficients& coef, double cutoff) {
  check_cutoff_domain(cutoff);
  const double exp_arm =
      arm_integral(coef.beta0 + coef.beta2, coef.beta1 + coef.beta3, cutoff);
  const double ctrl_arm = arm_integral(coef.beta0, coef.beta1, cutoff);
  return (exp_arm - ctrl_arm) / (1.0 - cutoff);
}

namespace {

template <typename F>
double adaptive_simpson(const F& f, double a, double fa, double b, double fb,
                        double m, double fm, double whole, double tol,
                        int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                          depth - 1) +
         adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                          depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

}  // namespace

double true_subset_effect_quadrature(const ModelCoefficients& coef,
                                     double cutoff) {
  check_cutoff_domain(cutoff);
  const auto diff = [&](double x) {
    return response_probability(coef, x, 1) - response_probability(coef, x, 0);
  };
  return integrate(diff, cutoff, 1.0, 1e-12) / (1.0 - cutoff);
}

namespace {

// Lower-triangular Cholesky factor of a symmetric 4x4 matrix; false on a
// non-positive pivot (rank deficiency).
bool cholesky4(const double a[16], double l[16]) {
  std::fill(l, l + 16, 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i * 4 + j];
      for (int k = 0; k < j; ++k) s -= l[i * 4 + k] * l[j * 4 + k];
      if (i == j) {
        if (!(s > 1e-12)) return false;
        l[i * 4 + i] = std::sqrt(s);
      } else {
        l[i * 4 + j] = s / l[j * 4 + j];
      }
    }
  }
  return true;
}

// Solves L L^T x = b.
void cholesky4_solve(const double l[16], const double b[4], double x[4]) {
  double y[4];
  for (int i = 0; i < 4; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l[i * 4 + k] * y[k];
    y[i] = s / l[i * 4 + i];
  }
  for (int i = 3; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < 4; ++k) s -= l[k * 4 + i] * x[k];
    x[i] = s / l[i * 4 + i];
  }
}

void design_row(const TrialData& trial, std::size_t i, double row[4]) {
  row[0] = 1.0;
  row[1] = trial.biomarker[i];
  row[2] = static_cast<double>(trial.arm[i]);
  row[3] = trial.biomarker[i] * trial.arm[i];
}

}  // namespace

FittedLogistic fit_logistic(const TrialData& trial) {
  const std::size_t n = trial.size();
  FittedLogistic out;
  double beta[4] = {0.0, 0.0, 0.0, 0.0};
  double xtwx[16];
  bool converged = false;
  int iterations = 0;

  const auto accumulate = [&](double score[4]) {
    std::fill(xtwx, xtwx + 16, 0.0);
    if (score) std::fill(score, score + 4, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double row[4];
      design_row(trial, i, row);
      const double eta =
          beta[0] * row[0] + beta[1] * row[1] + beta[2] * row[2] + beta[3] * row[3];
      const double p = expit(eta);
      const double w = p * (1.0 - p);
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k <= j; ++k) xtwx[j * 4 + k] += w * row[j] * row[k];
      if (score) {
        const double resid = trial.response[i] - p;
        for (int j = 0; j < 4; ++j) score[j] += resid * row[j];
      }
    }
    for (int j = 0; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) xtwx[j * 4 + k] = xtwx[k * 4 + j];
  };

  while (iterations < 50) {
    double score[4];
    accumulate(score);
    double l[16];
    if (!cholesky4(xtwx, l)) break;
    double delta[4];
    cholesky4_solve(l, score, delta);
    for (int j = 0; j < 4; ++j) beta[j] += delta[j];
    ++iterations;
    const double step = std::max(std::max(std::fabs(delta[0]), std::fabs(delta[1])),
                                 std::max(std::fabs(delta[2]), std::fabs(delta[3])));
    if (step < 1e-8) {
      converged = true;
      break;
    }
  }

  out.coefficients = ModelCoefficients{beta[0], beta[1], beta[2], beta[3]};
  out.iterations = iterations;

  if (converged) {
    for (int j = 0; j < 4; ++j)
      if (std::fabs(beta[j]) > 15.0) converged = false;
    for (std::size_t i = 0; converged && i < n; ++i) {
      double row[4];
      design_row(trial, i, row);
      const double p = expit(beta[0] * row[0] + beta[1] * row[1] +
                             beta[2] * row[2] + beta[3] * row[3]);
      if (p < 1e-10 || p > 1.0 - 1e-10) converged = false;
    }
  }

  if (converged) {
    accumulate(nullptr);
    double l[16];
    if (cholesky4(xtwx, l)) {
      std::array<double, 4> se{};
      for (int j = 0; j < 4; ++j) {
        double e[4] = {0.0, 0.0, 0.0, 0.0};
        e[j] = 1.0;
        double col[4];
        cholesky4_solve(l, e, col);
        se[j] = std::sqrt(col[j]);
      }
      out.standard_errors = se;
    } else {
      converged = false;
    }
  }

  out.converged = converged;
  return out;
}

}  // namespace cutbias
