#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutbias/abc.hpp"
#include "cutbias/bootstrap.hpp"
#include "cutbias/estimators.hpp"
#include "cutbias/experiment.hpp"
#include "cutbias/io.hpp"
#include "cutbias/model.hpp"
#include "cutbias/selection.hpp"
#include "cutbias/simulate.hpp"
#include "cutbias/trial.hpp"

namespace py = pybind11;
using namespace cutbias;

namespace {

Allocation parse_allocation(const std::string& name) {
  if (name == "fixed_equal") return Allocation::FixedEqual;
  if (name == "bernoulli_half") return Allocation::BernoulliHalf;
  throw std::invalid_argument(
      "allocation: expected fixed_equal or bernoulli_half");
}

BootstrapFallback parse_fallback(const std::string& name) {
  if (name == "return_uncorrected") return BootstrapFallback::ReturnUncorrected;
  if (name == "unconditional_bias") return BootstrapFallback::UnconditionalBias;
  throw std::invalid_argument(
      "fallback: expected return_uncorrected or unconditional_bias");
}

AbcPriorSpec build_prior(const std::string& name, const TrialData& trial,
                         const std::optional<ModelCoefficients>& true_coef,
                         double true_centered_variance) {
  if (name == "standard_normal") return AbcPriorSpec::standard_normal();
  if (name == "true_centered") {
    if (!true_coef)
      throw std::invalid_argument(
          "true_centered prior requires true_coefficients");
    return AbcPriorSpec::true_centered(*true_coef, true_centered_variance);
  }
  if (name == "logit_fitted") {
    const FittedLogistic fit = fit_logistic(trial);
    if (fit.converged) return AbcPriorSpec::logit_fitted(fit);
    return AbcPriorSpec::standard_normal();
  }
  throw std::invalid_argument(
      "prior: expected true_centered, standard_normal or logit_fitted");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Simulation engine for quantifying selection bias in subgroup "
      "treatment-effect estimates after data-driven biomarker cutoff "
      "selection, with bootstrap and ABC-rejection corrections.";
  m.attr("__version__") = kToolVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<ModelCoefficients>(m, "ModelCoefficients",
                                "Coefficients of logit P(y=1 | x, m) = "
                                "beta0 + beta1*x + beta2*m + beta3*x*m.")
      .def(py::init<double, double, double, double>(), py::arg("beta0") = 0.0,
           py::arg("beta1") = 0.0, py::arg("beta2") = 0.0,
           py::arg("beta3") = 0.0)
      .def_readwrite("beta0", &ModelCoefficients::beta0)
      .def_readwrite("beta1", &ModelCoefficients::beta1)
      .def_readwrite("beta2", &ModelCoefficients::beta2)
      .def_readwrite("beta3", &ModelCoefficients::beta3)
      .def("__repr__", [](const ModelCoefficients& c) {
        return "ModelCoefficients(" + std::to_string(c.beta0) + ", " +
               std::to_string(c.beta1) + ", " + std::to_string(c.beta2) +
               ", " + std::to_string(c.beta3) + ")";
      });

  py::class_<TrialData>(m, "TrialData",
                        "One trial: biomarker in [0,1), arm indicator "
                        "(1 = experimental) and binary response per subject.")
      .def(py::init<>())
      .def_readwrite("biomarker", &TrialData::biomarker)
      .def_readwrite("arm", &TrialData::arm)
      .def_readwrite("response", &TrialData::response)
      .def("__len__", &TrialData::size);

  py::enum_<Rule>(m, "Rule")
      .value("rule1", Rule::Rule1)
      .value("rule2", Rule::Rule2);

  py::class_<Rule2Params>(m, "Rule2Params")
      .def(py::init([](double effect_threshold, double probability_threshold,
                       double prior_alpha, double prior_beta) {
             return Rule2Params{effect_threshold, probability_threshold,
                                prior_alpha, prior_beta};
           }),
           py::arg("effect_threshold") = 0.15,
           py::arg("probability_threshold") = 0.7,
           py::arg("prior_alpha") = 1.0, py::arg("prior_beta") = 1.0)
      .def_readwrite("effect_threshold", &Rule2Params::effect_threshold)
      .def_readwrite("probability_threshold",
                     &Rule2Params::probability_threshold)
      .def_readwrite("prior_alpha", &Rule2Params::prior_alpha)
      .def_readwrite("prior_beta", &Rule2Params::prior_beta);

  py::class_<SubsetSummary>(m, "SubsetSummary")
      .def_readonly("cutoff", &SubsetSummary::cutoff)
      .def_readonly("n_exp_responders", &SubsetSummary::n_exp_responders)
      .def_readonly("n_exp_nonresponders", &SubsetSummary::n_exp_nonresponders)
      .def_readonly("n_ctrl_responders", &SubsetSummary::n_ctrl_responders)
      .def_readonly("n_ctrl_nonresponders",
                    &SubsetSummary::n_ctrl_nonresponders)
      .def_readonly("orr_diff", &SubsetSummary::orr_diff)
      .def_readonly("prevalence", &SubsetSummary::prevalence)
      .def_property_readonly("n_experimental", &SubsetSummary::n_experimental)
      .def_property_readonly("n_control", &SubsetSummary::n_control)
      .def_property_readonly("subset_size", &SubsetSummary::subset_size);

  py::class_<SubsetDiagnostic>(m, "SubsetDiagnostic")
      .def_readonly("cutoff", &SubsetDiagnostic::cutoff)
      .def_readonly("orr_diff", &SubsetDiagnostic::orr_diff)
      .def_readonly("posterior_probability",
                    &SubsetDiagnostic::posterior_probability)
      .def_readonly("eligible", &SubsetDiagnostic::eligible);

  py::class_<SelectionOutcome>(m, "SelectionOutcome")
      .def_readonly("selected_cutoff", &SelectionOutcome::selected_cutoff)
      .def_readonly("selected_index", &SelectionOutcome::selected_index)
      .def_readonly("rule", &SelectionOutcome::rule)
      .def_readonly("diagnostics", &SelectionOutcome::diagnostics);

  py::class_<FittedLogistic>(m, "FittedLogistic")
      .def_readonly("coefficients", &FittedLogistic::coefficients)
      .def_readonly("standard_errors", &FittedLogistic::standard_errors)
      .def_readonly("converged", &FittedLogistic::converged)
      .def_readonly("iterations", &FittedLogistic::iterations);

  py::class_<BootstrapResult>(m, "BootstrapResult")
      .def_readonly("corrected", &BootstrapResult::corrected)
      .def_readonly("uncorrected", &BootstrapResult::uncorrected)
      .def_readonly("conditional_bias_estimate",
                    &BootstrapResult::conditional_bias_estimate)
      .def_readonly("replicates_matching_selection",
                    &BootstrapResult::replicates_matching_selection)
      .def_readonly("replicates_other_selection",
                    &BootstrapResult::replicates_other_selection)
      .def_readonly("replicates_no_selection",
                    &BootstrapResult::replicates_no_selection)
      .def_readonly("fallback_used", &BootstrapResult::fallback_used);

  py::class_<AbcResult>(m, "AbcResult")
      .def_readonly("adjusted_estimate", &AbcResult::adjusted_estimate)
      .def_readonly("accepted_count", &AbcResult::accepted_count)
      .def_readonly("effective_epsilon", &AbcResult::effective_epsilon)
      .def_readonly("accepted_thetas", &AbcResult::accepted_thetas)
      .def_readonly("failed", &AbcResult::failed);

  m.def("true_subset_effect", &true_subset_effect, py::arg("coefficients"),
        py::arg("cutoff"),
        "Exact treatment effect in the subset {x > cutoff} with "
        "x ~ Uniform(0,1), in closed form.");
  m.def("true_subset_effect_quadrature", &true_subset_effect_quadrature,
        py::arg("coefficients"), py::arg("cutoff"),
        "Same integral by adaptive quadrature; cross-check of the closed "
        "form.");

  m.def(
      "generate_trial",
      [](const ModelCoefficients& coefficients, int n_per_arm,
         std::uint64_t master_seed, std::uint64_t sim_index,
         const std::string& allocation) {
        return generate_trial(coefficients, n_per_arm,
                              SeedSpec{master_seed, sim_index},
                              parse_allocation(allocation));
      },
      py::arg("coefficients"), py::arg("n_per_arm"), py::arg("master_seed"),
      py::arg("sim_index") = 0, py::arg("allocation") = "fixed_equal",
      "Draws one trial of 2*n_per_arm subjects; (master_seed, sim_index) "
      "matches the engine's per-simulation seeding.");

  m.def(
      "fit_logistic", [](const TrialData& trial) { return fit_logistic(trial); },
      py::arg("trial"),
      "IRLS maximum-likelihood fit of the four-coefficient model.");

  m.def(
      "summarize_subsets",
      [](const TrialData& trial, const std::vector<double>& cutoffs) {
        return summarize_subsets(trial, CutoffSet::from(cutoffs));
      },
      py::arg("trial"), py::arg("cutoffs"),
      "Per-cutoff response counts and ORR difference; membership is strict "
      "(x > c).");

  m.def(
      "apply_rule",
      [](const std::vector<SubsetSummary>& summaries, Rule rule,
         const Rule2Params& rule2) { return apply_rule(summaries, rule, rule2); },
      py::arg("summaries"), py::arg("rule"),
      py::arg("rule2") = Rule2Params{},
      "Applies the cutoff selection rule to per-subset summaries.");

  m.def(
      "posterior_prob_exceeds",
      [](int exp_responders, int exp_total, int ctrl_responders,
         int ctrl_total, double effect_threshold, double prior_alpha,
         double prior_beta, int quadrature_resolution) {
        if (exp_responders < 0 || exp_responders > exp_total ||
            ctrl_responders < 0 || ctrl_responders > ctrl_total)
          throw std::invalid_argument("responder counts out of range");
        SubsetSummary summary;
        summary.n_exp_responders = exp_responders;
        summary.n_exp_nonresponders = exp_total - exp_responders;
        summary.n_ctrl_responders = ctrl_responders;
        summary.n_ctrl_nonresponders = ctrl_total - ctrl_responders;
        Rule2Params params;
        params.effect_threshold = effect_threshold;
        params.prior_alpha = prior_alpha;
        params.prior_beta = prior_beta;
        return posterior_prob_exceeds(summary, params, quadrature_resolution);
      },
      py::arg("exp_responders"), py::arg("exp_total"),
      py::arg("ctrl_responders"), py::arg("ctrl_total"),
      py::arg("effect_threshold") = 0.15, py::arg("prior_alpha") = 1.0,
      py::arg("prior_beta") = 1.0, py::arg("quadrature_resolution") = 32,
      "P(p_exp - p_ctrl > effect_threshold) under independent Beta priors "
      "updated with the given response counts.");

  m.def(
      "mle_selected_estimate",
      [](const std::vector<SubsetSummary>& summaries,
         const SelectionOutcome& selection) {
        return mle_selected_estimate(summaries, selection);
      },
      py::arg("summaries"), py::arg("selection"),
      "ORR difference of the selected subset; None when nothing selected.");

  m.def(
      "bootstrap_correct",
      [](const TrialData& trial, const std::vector<double>& cutoffs, Rule rule,
         const SelectionOutcome& selection, double observed_estimate,
         int replicates, const std::string& fallback, const Rule2Params& rule2,
         std::uint64_t seed_master, std::uint64_t seed_stream) {
        BootstrapConfig config;
        config.replicates = replicates;
        config.fallback = parse_fallback(fallback);
        config.seed = SeedSpec{seed_master, seed_stream};
        const CutoffSet cutoff_set = CutoffSet::from(cutoffs);
        py::gil_scoped_release release;
        return bootstrap_correct(trial, cutoff_set, rule, rule2, selection,
                                 observed_estimate, config);
      },
      py::arg("trial"), py::arg("cutoffs"), py::arg("rule"),
      py::arg("selection"), py::arg("observed_estimate"),
      py::arg("replicates") = 2000,
      py::arg("fallback") = "return_uncorrected",
      py::arg("rule2") = Rule2Params{}, py::arg("seed_master") = 0,
      py::arg("seed_stream") = 0,
      "Conditional bootstrap bias correction: corrected = 2*observed - "
      "h_star over replicates that re-select the observed cutoff.");

  m.def(
      "abc_adjust",
      [](const TrialData& trial, const std::vector<double>& cutoffs,
         const SelectionOutcome& selection, const std::string& prior,
         int draws, double epsilon, int min_accepted,
         int max_epsilon_doublings, std::uint64_t seed_master,
         std::uint64_t seed_stream,
         const std::optional<ModelCoefficients>& true_coefficients,
         double true_centered_variance) {
        AbcConfig config;
        config.draws = draws;
        config.epsilon = epsilon;
        config.min_accepted = min_accepted;
        config.max_epsilon_doublings = max_epsilon_doublings;
        config.seed = SeedSpec{seed_master, seed_stream};
        const AbcPriorSpec spec =
            build_prior(prior, trial, true_coefficients, true_centered_variance);
        const CutoffSet cutoff_set = CutoffSet::from(cutoffs);
        py::gil_scoped_release release;
        return abc_adjust(trial, cutoff_set, selection, spec, config);
      },
      py::arg("trial"), py::arg("cutoffs"), py::arg("selection"),
      py::arg("prior") = "standard_normal", py::arg("draws") = 100000,
      py::arg("epsilon") = 0.05, py::arg("min_accepted") = 50,
      py::arg("max_epsilon_doublings") = 3, py::arg("seed_master") = 0,
      py::arg("seed_stream") = 0,
      py::arg("true_coefficients") = std::nullopt,
      py::arg("true_centered_variance") = 0.2,
      "ABC rejection adjustment of the selected-subset estimate; the "
      "logit_fitted prior falls back to standard_normal when the fit does "
      "not converge.");

  m.def(
      "run_config_json",
      [](const std::string& json_text, int threads) {
        const auto configs = parse_config_text(json_text);
        std::vector<GridResult> results;
        {
          py::gil_scoped_release release;
          results = run_grid(configs, threads);
        }
        py::list out;
        for (const auto& result : results) {
          py::dict entry;
          entry["config_hash"] = config_hash_hex(result.config);
          entry["canonical_config"] = canonical_config_json(result.config);
          entry["master_seed"] = result.config.master_seed;
          if (result.error) {
            entry["error"] = *result.error;
            entry["records_csv"] = "";
            entry["report_csv"] = "";
          } else {
            entry["error"] = py::none();
            entry["records_csv"] = records_to_csv(result.records);
            entry["report_csv"] = bias_report_to_csv(result.report);
          }
          out.append(entry);
        }
        return out;
      },
      py::arg("json_text"), py::arg("threads") = 1,
      "Parses a {\"scenarios\": [...]} document (scalar fields may hold "
      "arrays; those expand by Cartesian product), runs every scenario and "
      "returns per-scenario dicts with records and report CSV text.");
}
