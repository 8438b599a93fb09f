#include "cutbias/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

#include <boost/math/special_functions/beta.hpp>

#include "cutbias/rng.hpp"

namespace cutbias {

SelectionOutcome select_rule1(const std::vector<SubsetSummary>& summaries) {
  if (summaries.empty()) throw std::invalid_argument("no subsets to select from");
  SelectionOutcome out;
  out.rule = Rule::Rule1;
  out.diagnostics.reserve(summaries.size());
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const SubsetSummary& s = summaries[i];
    out.diagnostics.push_back(
        SubsetDiagnostic{s.cutoff, s.orr_diff, std::nullopt, s.orr_diff.has_value()});
    if (!s.orr_diff) continue;
    // Strict comparison: ties keep the earlier (smaller) cutoff.
    if (!best || *s.orr_diff > *summaries[*best].orr_diff) best = i;
  }
  if (best) {
    out.selected_index = best;
    out.selected_cutoff = summaries[*best].cutoff;
  }
  return out;
}

namespace {

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr double kGlNode[4] = {0.18343464249564980, 0.52553240991632899,
                               0.79666647741362674, 0.96028985649753623};
constexpr double kGlWeight[4] = {0.36268378337836198, 0.31370664587788729,
                                 0.22238103445337447, 0.10122853629037626};

double beta_cdf(double a, double b, double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, t);
}

// Int over [lo, hi] of f_E(u) * F_C(u - delta) du by composite 8-point
// Gauss-Legendre with `panels` panels; log_norm is -log B(aE, bE).
double panel_integral(double lo, double hi, int panels, double a_exp,
                      double b_exp, double a_ctrl, double b_ctrl, double delta,
                      double log_norm) {
  if (!(hi > lo)) return 0.0;
  const double h = (hi - lo) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double center = lo + (p + 0.5) * h;
    const double half = 0.5 * h;
    double sum = 0.0;
    for (int q = 0; q < 4; ++q) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        const double u = center + sgn * half * kGlNode[q];
        const double logf = (a_exp - 1.0) * std::log(u) +
                            (b_exp - 1.0) * std::log1p(-u) + log_norm;
        sum += kGlWeight[q] * std::exp(logf) *
               beta_cdf(a_ctrl, b_ctrl, u - delta);
      }
    }
    total += half * sum;
  }
  return total;
}

// P(p_E - p_C > delta) for independent p_E ~ Beta(a_exp, b_exp),
// p_C ~ Beta(a_ctrl, b_ctrl).
double beta_diff_exceeds(double a_exp, double b_exp, double a_ctrl,
                         double b_ctrl, double delta, int panels) {
  double lo = std::clamp(delta, 0.0, 1.0);
  double hi = 1.0;
  // The integrand is bounded by the Beta(a_exp, b_exp) density, so the
  // window can shrink to its 12-sigma support once the posterior is tight.
  const double total = a_exp + b_exp;
  if (total >= 30.0) {
    const double mu = a_exp / total;
    const double sigma =
        std::sqrt(a_exp * b_exp / (total * total * (total + 1.0)));
    lo = std::max(lo, mu - 12.0 * sigma);
    hi = std::min(hi, mu + 12.0 * sigma);
  }
  // Empty window: either delta >= 1 or the posterior mass of p_E sits
  // entirely below delta; both give probability ~0.
  if (!(hi > lo)) return 0.0;
  const double log_norm = std::lgamma(a_exp + b_exp) - std::lgamma(a_exp) -
                          std::lgamma(b_exp);
  // F_C flattens to 1 at u = 1 + delta; for delta < 0 that kink sits inside
  // the window and splits the integration range.
  const double kink = 1.0 + delta;
  double result;
  if (delta < 0.0 && kink > lo && kink < hi) {
    result = panel_integral(lo, kink, panels, a_exp, b_exp, a_ctrl, b_ctrl,
                            delta, log_norm) +
             panel_integral(kink, hi, panels, a_exp, b_exp, a_ctrl, b_ctrl,
                            delta, log_norm);
  } else {
    result = panel_integral(lo, hi, panels, a_exp, b_exp, a_ctrl, b_ctrl,
                            delta, log_norm);
  }
  return std::clamp(result, 0.0, 1.0);
}

struct PosteriorKey {
  int r_exp, n_exp, r_ctrl, n_ctrl;
  double delta, alpha, beta;
  int resolution;

  bool operator==(const PosteriorKey&) const = default;
};

struct PosteriorKeyHash {
  static std::uint64_t bits(double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, sizeof u);
    return u;
  }
  std::size_t operator()(const PosteriorKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto fold = [&h](std::uint64_t v) { h = mix_bits(h ^ v); };
    fold(static_cast<std::uint64_t>(k.r_exp));
    fold(static_cast<std::uint64_t>(k.n_exp));
    fold(static_cast<std::uint64_t>(k.r_ctrl));
    fold(static_cast<std::uint64_t>(k.n_ctrl));
    fold(bits(k.delta));
    fold(bits(k.alpha));
    fold(bits(k.beta));
    fold(static_cast<std::uint64_t>(k.resolution));
    return static_cast<std::size_t>(h);
  }
};

// Memoized posterior probabilities. The value is a pure function of the
// key, so caching never changes results, only cost; bootstrap replicates
// revisit a small set of count patterns.
double cached_posterior(const SubsetSummary& s, const Rule2Params& params,
                        int resolution) {
  thread_local std::unordered_map<PosteriorKey, double, PosteriorKeyHash> memo;
  const PosteriorKey key{s.n_exp_responders,  s.n_experimental(),
                         s.n_ctrl_responders, s.n_control(),
                         params.effect_threshold, params.prior_alpha,
                         params.prior_beta,       resolution};
  const auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  const double value = posterior_prob_exceeds(s, params, resolution);
  memo.emplace(key, value);
  return value;
}

}  // namespace

double posterior_prob_exceeds(const SubsetSummary& summary,
                              const Rule2Params& params,
                              int quadrature_resolution) {
  if (summary.n_experimental() == 0 || summary.n_control() == 0)
    throw std::invalid_argument(
        "posterior probability undefined: empty arm in subset");
  if (quadrature_resolution < 1)
    throw std::invalid_argument("quadrature resolution must be positive");
  const double a_exp = params.prior_alpha + summary.n_exp_responders;
  const double b_exp = params.prior_beta + summary.n_exp_nonresponders;
  const double a_ctrl = params.prior_alpha + summary.n_ctrl_responders;
  const double b_ctrl = params.prior_beta + summary.n_ctrl_nonresponders;
  return beta_diff_exceeds(a_exp, b_exp, a_ctrl, b_ctrl,
                           params.effect_threshold, quadrature_resolution);
}

SelectionOutcome select_rule2(const std::vector<SubsetSummary>& summaries,
                              const Rule2Params& params) {
  if (summaries.empty()) throw std::invalid_argument("no subsets to select from");
  SelectionOutcome out;
  out.rule = Rule::Rule2;
  out.diagnostics.reserve(summaries.size());
  std::optional<std::size_t> best;
  double best_prevalence = -1.0;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const SubsetSummary& s = summaries[i];
    SubsetDiagnostic d{s.cutoff, s.orr_diff, std::nullopt, s.orr_diff.has_value()};
    if (s.orr_diff) {
      const double prob = cached_posterior(s, params, 32);
      d.posterior_probability = prob;
      // Strictly-larger prevalence replaces; ties keep the smaller cutoff.
      if (prob > params.probability_threshold && s.prevalence > best_prevalence) {
        best = i;
        best_prevalence = s.prevalence;
      }
    }
    out.diagnostics.push_back(d);
  }
  if (best) {
    out.selected_index = best;
    out.selected_cutoff = summaries[*best].cutoff;
  }
  return out;
}

SelectionOutcome apply_rule(const std::vector<SubsetSummary>& summaries,
                            Rule rule, const Rule2Params& params) {
  return rule == Rule::Rule1 ? select_rule1(summaries)
                             : select_rule2(summaries, params);
}

}  // namespace cutbias
