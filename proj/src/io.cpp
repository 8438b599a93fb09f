#include "cutbias/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cutbias {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& message) {
  throw ConfigError(pointer + ": " + message);
}

const json& require_key(const json& obj, const std::string& pointer,
                        const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(pointer + "/" + key, "required field missing");
  return *it;
}

double as_number(const json& v, const std::string& pointer) {
  if (!v.is_number()) fail(pointer, "number required");
  return v.get<double>();
}

int as_positive_int(const json& v, const std::string& pointer) {
  if (!v.is_number_integer()) fail(pointer, "integer required");
  const auto n = v.get<std::int64_t>();
  if (n < 1 || n > std::numeric_limits<int>::max())
    fail(pointer, "positive integer required");
  return static_cast<int>(n);
}

std::string as_string(const json& v, const std::string& pointer) {
  if (!v.is_string()) fail(pointer, "string required");
  return v.get<std::string>();
}

void reject_unknown(const json& obj, const std::string& pointer,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) fail(pointer + "/" + key, "unknown field");
  }
}

EffectSetting parse_effect(const json& obj, const std::string& pointer) {
  const std::string name =
      as_string(require_key(obj, pointer, "effect_setting"),
                pointer + "/effect_setting");
  const bool has_coef = obj.contains("coefficients");
  if (name == "more_or_less_1" || name == "more_or_less_2") {
    if (has_coef)
      fail(pointer + "/coefficients",
           "only valid with effect_setting \"custom\"");
    return name == "more_or_less_1" ? EffectSetting::more_or_less_1()
                                    : EffectSetting::more_or_less_2();
  }
  if (name != "custom")
    fail(pointer + "/effect_setting",
         "expected more_or_less_1, more_or_less_2 or custom");
  if (!has_coef)
    fail(pointer + "/coefficients", "required for effect_setting \"custom\"");
  const json& coef = obj["coefficients"];
  if (!coef.is_array() || coef.size() != 4)
    fail(pointer + "/coefficients", "array of 4 numbers required");
  double b[4];
  for (int j = 0; j < 4; ++j) {
    b[j] = as_number(coef[j], pointer + "/coefficients/" + std::to_string(j));
    if (!std::isfinite(b[j]))
      fail(pointer + "/coefficients/" + std::to_string(j), "finite number required");
  }
  return EffectSetting::custom(ModelCoefficients{b[0], b[1], b[2], b[3]});
}

Rule2Params parse_rule2_params(const json& obj, const std::string& pointer) {
  Rule2Params params;
  if (!obj.is_object()) fail(pointer, "object required");
  reject_unknown(obj, pointer,
                 {"effect_threshold", "probability_threshold", "prior_alpha",
                  "prior_beta"});
  if (obj.contains("effect_threshold"))
    params.effect_threshold =
        as_number(obj["effect_threshold"], pointer + "/effect_threshold");
  if (obj.contains("probability_threshold")) {
    params.probability_threshold = as_number(
        obj["probability_threshold"], pointer + "/probability_threshold");
    if (!(params.probability_threshold > 0.0 &&
          params.probability_threshold < 1.0))
      fail(pointer + "/probability_threshold", "value in (0, 1) required");
  }
  if (obj.contains("prior_alpha")) {
    params.prior_alpha = as_number(obj["prior_alpha"], pointer + "/prior_alpha");
    if (!(params.prior_alpha > 0.0))
      fail(pointer + "/prior_alpha", "positive value required");
  }
  if (obj.contains("prior_beta")) {
    params.prior_beta = as_number(obj["prior_beta"], pointer + "/prior_beta");
    if (!(params.prior_beta > 0.0))
      fail(pointer + "/prior_beta", "positive value required");
  }
  return params;
}

BootstrapConfig parse_bootstrap(const json& obj, const std::string& pointer) {
  BootstrapConfig config;
  if (!obj.is_object()) fail(pointer, "object required");
  reject_unknown(obj, pointer, {"replicates", "fallback"});
  if (obj.contains("replicates")) {
    config.replicates =
        as_positive_int(obj["replicates"], pointer + "/replicates");
    // Smaller B makes conditional means unstable; refuse at parse time.
    if (config.replicates < 100)
      fail(pointer + "/replicates", "at least 100 required");
  }
  if (obj.contains("fallback")) {
    const std::string f = as_string(obj["fallback"], pointer + "/fallback");
    if (f == "return_uncorrected")
      config.fallback = BootstrapFallback::ReturnUncorrected;
    else if (f == "unconditional_bias")
      config.fallback = BootstrapFallback::UnconditionalBias;
    else
      fail(pointer + "/fallback",
           "expected return_uncorrected or unconditional_bias");
  }
  return config;
}

void parse_abc(const json& obj, const std::string& pointer,
               ScenarioConfig& out) {
  if (!obj.is_object()) fail(pointer, "object required");
  reject_unknown(obj, pointer,
                 {"draws", "epsilon", "min_accepted", "max_epsilon_doublings",
                  "prior", "true_centered_variance"});
  if (obj.contains("draws"))
    out.abc.draws = as_positive_int(obj["draws"], pointer + "/draws");
  if (obj.contains("epsilon")) {
    out.abc.epsilon = as_number(obj["epsilon"], pointer + "/epsilon");
    if (!(out.abc.epsilon > 0.0 && out.abc.epsilon < 1.0))
      fail(pointer + "/epsilon", "value in (0, 1) required");
  }
  if (obj.contains("min_accepted"))
    out.abc.min_accepted =
        as_positive_int(obj["min_accepted"], pointer + "/min_accepted");
  if (obj.contains("max_epsilon_doublings")) {
    const json& v = obj["max_epsilon_doublings"];
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
      fail(pointer + "/max_epsilon_doublings", "non-negative integer required");
    out.abc.max_epsilon_doublings = static_cast<int>(v.get<std::int64_t>());
  }
  if (out.abc.draws < out.abc.min_accepted)
    fail(pointer + "/draws", "must be at least min_accepted");
  if (obj.contains("prior")) {
    const std::string p = as_string(obj["prior"], pointer + "/prior");
    if (p == "true_centered")
      out.abc_prior = AbcPriorRegime::TrueCentered;
    else if (p == "standard_normal")
      out.abc_prior = AbcPriorRegime::StandardNormal;
    else if (p == "logit_fitted")
      out.abc_prior = AbcPriorRegime::LogitFitted;
    else
      fail(pointer + "/prior",
           "expected true_centered, standard_normal or logit_fitted");
  }
  if (obj.contains("true_centered_variance")) {
    out.abc_true_centered_variance = as_number(
        obj["true_centered_variance"], pointer + "/true_centered_variance");
    if (!(out.abc_true_centered_variance > 0.0))
      fail(pointer + "/true_centered_variance", "positive value required");
  }
}

ScenarioConfig parse_scenario(const json& obj, const std::string& pointer) {
  if (!obj.is_object()) fail(pointer, "object required");
  reject_unknown(obj, pointer,
                 {"effect_setting", "coefficients", "n_per_arm", "cutoffs",
                  "rule", "rule2_params", "n_simulations", "estimators",
                  "bootstrap", "abc", "master_seed", "allocation"});
  ScenarioConfig config;
  config.effect_setting = parse_effect(obj, pointer);
  config.n_per_arm = as_positive_int(require_key(obj, pointer, "n_per_arm"),
                                     pointer + "/n_per_arm");

  const json& cutoffs = require_key(obj, pointer, "cutoffs");
  if (!cutoffs.is_array() || cutoffs.empty())
    fail(pointer + "/cutoffs", "non-empty array of numbers required");
  std::vector<double> values;
  values.reserve(cutoffs.size());
  for (std::size_t i = 0; i < cutoffs.size(); ++i)
    values.push_back(
        as_number(cutoffs[i], pointer + "/cutoffs/" + std::to_string(i)));
  try {
    config.cutoffs = CutoffSet::from(std::move(values));
  } catch (const std::invalid_argument& e) {
    fail(pointer + "/cutoffs", e.what());
  }

  const std::string rule =
      as_string(require_key(obj, pointer, "rule"), pointer + "/rule");
  if (rule == "rule1")
    config.rule = Rule::Rule1;
  else if (rule == "rule2")
    config.rule = Rule::Rule2;
  else
    fail(pointer + "/rule", "expected rule1 or rule2");
  if (obj.contains("rule2_params"))
    config.rule2 = parse_rule2_params(obj["rule2_params"], pointer + "/rule2_params");

  if (obj.contains("n_simulations"))
    config.n_simulations =
        as_positive_int(obj["n_simulations"], pointer + "/n_simulations");

  if (obj.contains("estimators")) {
    const json& est = obj["estimators"];
    if (!est.is_array()) fail(pointer + "/estimators", "array required");
    config.estimators = EstimatorSet{true, false, false};
    for (std::size_t i = 0; i < est.size(); ++i) {
      const std::string name =
          as_string(est[i], pointer + "/estimators/" + std::to_string(i));
      if (name == "mle")
        config.estimators.mle = true;
      else if (name == "bootstrap")
        config.estimators.bootstrap = true;
      else if (name == "abc")
        config.estimators.abc = true;
      else
        fail(pointer + "/estimators/" + std::to_string(i),
             "expected mle, bootstrap or abc");
    }
  }
  if (obj.contains("bootstrap"))
    config.bootstrap = parse_bootstrap(obj["bootstrap"], pointer + "/bootstrap");
  if (obj.contains("abc")) parse_abc(obj["abc"], pointer + "/abc", config);

  const json& seed = require_key(obj, pointer, "master_seed");
  if (!(seed.is_number_unsigned() ||
        (seed.is_number_integer() && seed.get<std::int64_t>() >= 0)))
    fail(pointer + "/master_seed", "unsigned integer required");
  config.master_seed = seed.get<std::uint64_t>();

  if (obj.contains("allocation")) {
    const std::string a = as_string(obj["allocation"], pointer + "/allocation");
    if (a == "fixed_equal")
      config.allocation = Allocation::FixedEqual;
    else if (a == "bernoulli_half")
      config.allocation = Allocation::BernoulliHalf;
    else
      fail(pointer + "/allocation", "expected fixed_equal or bernoulli_half");
  }
  return config;
}

// Scalar fields that may carry an array instead, expanded by Cartesian
// product (field-major, preserving element order).
constexpr const char* kExpandable[] = {"effect_setting", "n_per_arm",
                                       "rule",           "n_simulations",
                                       "master_seed",    "allocation"};

void expand_scenario(const json& obj, const std::string& pointer,
                     std::vector<ScenarioConfig>& out) {
  if (obj.is_object()) {
    for (const char* key : kExpandable) {
      const auto it = obj.find(key);
      if (it == obj.end() || !it->is_array()) continue;
      if (it->empty()) fail(pointer + "/" + key, "empty grid array");
      for (const json& element : *it) {
        json narrowed = obj;
        narrowed[key] = element;
        expand_scenario(narrowed, pointer, out);
      }
      return;
    }
  }
  out.push_back(parse_scenario(obj, pointer));
}

}  // namespace

std::vector<ScenarioConfig> parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("", "top-level object required");
  reject_unknown(root, "", {"scenarios"});
  const auto it = root.find("scenarios");
  if (it == root.end() || !it->is_array() || it->empty())
    fail("/scenarios", "non-empty array required");
  std::vector<ScenarioConfig> out;
  for (std::size_t i = 0; i < it->size(); ++i)
    expand_scenario((*it)[i], "/scenarios/" + std::to_string(i), out);
  return out;
}

std::vector<ScenarioConfig> parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

namespace {

const char* effect_name(const EffectSetting& effect) {
  switch (effect.name) {
    case EffectName::MoreOrLess1:
      return "more_or_less_1";
    case EffectName::MoreOrLess2:
      return "more_or_less_2";
    case EffectName::Custom:
      return "custom";
  }
  return "custom";
}

}  // namespace

std::string canonical_config_json(const ScenarioConfig& config) {
  json j;
  j["effect_setting"] = effect_name(config.effect_setting);
  const ModelCoefficients& c = config.effect_setting.coefficients;
  j["coefficients"] = {c.beta0, c.beta1, c.beta2, c.beta3};
  j["n_per_arm"] = config.n_per_arm;
  j["cutoffs"] = config.cutoffs.values();
  j["rule"] = config.rule == Rule::Rule1 ? "rule1" : "rule2";
  j["rule2_params"] = {{"effect_threshold", config.rule2.effect_threshold},
                       {"probability_threshold", config.rule2.probability_threshold},
                       {"prior_alpha", config.rule2.prior_alpha},
                       {"prior_beta", config.rule2.prior_beta}};
  j["n_simulations"] = config.n_simulations;
  json estimators = json::array();
  if (config.estimators.mle) estimators.push_back("mle");
  if (config.estimators.bootstrap) estimators.push_back("bootstrap");
  if (config.estimators.abc) estimators.push_back("abc");
  j["estimators"] = estimators;
  j["bootstrap"] = {
      {"replicates", config.bootstrap.replicates},
      {"fallback", config.bootstrap.fallback == BootstrapFallback::ReturnUncorrected
                       ? "return_uncorrected"
                       : "unconditional_bias"}};
  const char* prior = config.abc_prior == AbcPriorRegime::TrueCentered
                          ? "true_centered"
                          : config.abc_prior == AbcPriorRegime::StandardNormal
                                ? "standard_normal"
                                : "logit_fitted";
  j["abc"] = {{"draws", config.abc.draws},
              {"epsilon", config.abc.epsilon},
              {"min_accepted", config.abc.min_accepted},
              {"max_epsilon_doublings", config.abc.max_epsilon_doublings},
              {"prior", prior},
              {"true_centered_variance", config.abc_true_centered_variance}};
  j["master_seed"] = config.master_seed;
  j["allocation"] = config.allocation == Allocation::FixedEqual
                        ? "fixed_equal"
                        : "bernoulli_half";
  return j.dump();
}

std::uint64_t config_hash(const ScenarioConfig& config) {
  const std::string text = canonical_config_json(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash_hex(const ScenarioConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, config_hash(config));
  return buf;
}

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_optional_real(std::string& out, const std::optional<double>& v) {
  if (v) out += format_real(*v);
}

void append_optional_flag(std::string& out, const std::optional<bool>& v) {
  if (v) out += *v ? '1' : '0';
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (const char ch : line) {
    if (ch == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (ch != '\r') {
      current += ch;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

double parse_real(const std::string& field, const char* context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string(context) + ": malformed number `" +
                             field + "`");
  }
  if (used != field.size())
    throw std::runtime_error(std::string(context) + ": malformed number `" +
                             field + "`");
  return v;
}

std::optional<double> parse_optional_real(const std::string& field,
                                          const char* context) {
  if (field.empty()) return std::nullopt;
  return parse_real(field, context);
}

std::optional<bool> parse_optional_flag(const std::string& field,
                                        const char* context) {
  if (field.empty()) return std::nullopt;
  if (field == "0") return false;
  if (field == "1") return true;
  throw std::runtime_error(std::string(context) + ": malformed flag `" + field +
                           "`");
}

constexpr const char* kRecordsHeader =
    "sim_index,selected_cutoff,theta_true_selected,estimate_mle,"
    "estimate_bootstrap,bootstrap_fallback,estimate_abc,abc_failed";

constexpr const char* kReportHeader =
    "estimator,selected_cutoff,n_selected,selection_probability,"
    "conditional_bias,sd,se";

std::vector<std::string> non_empty_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (const char ch : text) {
    if (ch == '\n') {
      if (!current.empty()) lines.push_back(std::move(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  return lines;
}

}  // namespace

std::string records_to_csv(const std::vector<SimulationRecord>& records) {
  std::string out = kRecordsHeader;
  out += '\n';
  for (const SimulationRecord& rec : records) {
    out += std::to_string(rec.sim_index);
    out += ',';
    append_optional_real(out, rec.selected_cutoff);
    out += ',';
    append_optional_real(out, rec.theta_true_selected);
    out += ',';
    append_optional_real(out, rec.estimate_mle);
    out += ',';
    append_optional_real(out, rec.estimate_bootstrap);
    out += ',';
    append_optional_flag(out, rec.bootstrap_fallback);
    out += ',';
    append_optional_real(out, rec.estimate_abc);
    out += ',';
    append_optional_flag(out, rec.abc_failed);
    out += '\n';
  }
  return out;
}

std::vector<SimulationRecord> records_from_csv(const std::string& text) {
  const auto lines = non_empty_lines(text);
  if (lines.empty() || lines[0] != kRecordsHeader)
    throw std::runtime_error("records CSV: missing or wrong header");
  std::vector<SimulationRecord> records;
  records.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 8)
      throw std::runtime_error("records CSV: expected 8 fields per row");
    SimulationRecord rec;
    rec.sim_index = static_cast<int>(parse_real(fields[0], "sim_index"));
    rec.selected_cutoff = parse_optional_real(fields[1], "selected_cutoff");
    rec.theta_true_selected =
        parse_optional_real(fields[2], "theta_true_selected");
    rec.estimate_mle = parse_optional_real(fields[3], "estimate_mle");
    rec.estimate_bootstrap =
        parse_optional_real(fields[4], "estimate_bootstrap");
    rec.bootstrap_fallback =
        parse_optional_flag(fields[5], "bootstrap_fallback");
    rec.estimate_abc = parse_optional_real(fields[6], "estimate_abc");
    rec.abc_failed = parse_optional_flag(fields[7], "abc_failed");
    records.push_back(std::move(rec));
  }
  return records;
}

void write_records(const std::vector<SimulationRecord>& records,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << records_to_csv(records);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SimulationRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open records file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return records_from_csv(buffer.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string bias_report_to_csv(const BiasReport& report) {
  std::string out = kReportHeader;
  out += '\n';
  for (const BiasCell& cell : report.cells) {
    out += cell.estimator;
    out += ',';
    out += format_real(cell.selected_cutoff);
    out += ',';
    out += std::to_string(cell.n_selected);
    out += ',';
    out += format_real(cell.selection_probability);
    out += ',';
    append_optional_real(out, cell.conditional_bias);
    out += ',';
    append_optional_real(out, cell.sd);
    out += ',';
    append_optional_real(out, cell.se);
    out += '\n';
  }
  out += "none,,";
  out += std::to_string(report.n_none);
  out += ',';
  out += format_real(report.none_probability);
  out += ",,,\n";
  return out;
}

BiasReport bias_report_from_csv(const std::string& text) {
  const auto lines = non_empty_lines(text);
  if (lines.empty() || lines[0] != kReportHeader)
    throw std::runtime_error("report CSV: missing or wrong header");
  BiasReport report;
  bool saw_none = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 7)
      throw std::runtime_error("report CSV: expected 7 fields per row");
    if (fields[0] == "none") {
      saw_none = true;
      report.n_none = static_cast<int>(parse_real(fields[2], "n_selected"));
      report.none_probability =
          parse_real(fields[3], "selection_probability");
      continue;
    }
    BiasCell cell;
    cell.estimator = fields[0];
    cell.selected_cutoff = parse_real(fields[1], "selected_cutoff");
    cell.n_selected = static_cast<int>(parse_real(fields[2], "n_selected"));
    cell.selection_probability =
        parse_real(fields[3], "selection_probability");
    cell.conditional_bias = parse_optional_real(fields[4], "conditional_bias");
    cell.sd = parse_optional_real(fields[5], "sd");
    cell.se = parse_optional_real(fields[6], "se");
    report.cells.push_back(std::move(cell));
  }
  if (!saw_none) throw std::runtime_error("report CSV: missing none row");
  int n = report.n_none;
  if (!report.cells.empty()) {
    const std::string& first = report.cells.front().estimator;
    for (const BiasCell& cell : report.cells)
      if (cell.estimator == first) n += cell.n_selected;
  }
  report.n_simulations = n;
  return report;
}

void write_bias_report(const BiasReport& report,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << bias_report_to_csv(report);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

BiasReport read_bias_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open report file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return bias_report_from_csv(buffer.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& path) {
  json entries = json::array();
  for (const ManifestEntry& entry : manifest.entries) {
    entries.push_back({{"scenario_index", entry.scenario_index},
                       {"config_hash", entry.config_hash},
                       {"master_seed", entry.master_seed},
                       {"records", entry.records_path},
                       {"report", entry.report_path}});
  }
  const json j = {{"tool_version", manifest.tool_version},
                  {"timestamp", manifest.timestamp},
                  {"scenarios", entries}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace cutbias
