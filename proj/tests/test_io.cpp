#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "cutbias/io.hpp"
#include "doctest.h"

using namespace cutbias;
namespace fs = std::filesystem;

namespace {

const char* kMinimalScenario =
    R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
        "cutoffs": [0.3, 0.6], "rule": "rule1", "master_seed": 7})";

std::string wrap(const std::string& scenario) {
  return "{\"scenarios\": [" + scenario + "]}";
}

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    (void)parse_config_text(text);
    FAIL("expected ConfigError for: " << text);
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find(needle) != std::string::npos,
                  "`" << what << "` lacks `" << needle << "`");
  }
}

struct TempDir {
  fs::path path;

  TempDir() {
    path = fs::temp_directory_path() / "cutbias-io-tests";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

int run_cli(std::vector<const char*> argv) {
  argv.insert(argv.begin(), "cutoff-bias");
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("minimal config parses with documented defaults") {
  const auto configs = parse_config_text(wrap(kMinimalScenario));
  REQUIRE(configs.size() == 1);
  const ScenarioConfig& c = configs[0];
  CHECK(c.effect_setting.name == EffectName::MoreOrLess1);
  CHECK(c.effect_setting.coefficients == ModelCoefficients{-0.4, 0.0, 0.2, 0.2});
  CHECK(c.n_per_arm == 20);
  CHECK(c.cutoffs.values() == std::vector<double>{0.3, 0.6});
  CHECK(c.rule == Rule::Rule1);
  CHECK(c.master_seed == 7);
  CHECK(c.n_simulations == 10000);
  CHECK(c.estimators.mle);
  CHECK_FALSE(c.estimators.bootstrap);
  CHECK_FALSE(c.estimators.abc);
  CHECK(c.rule2 == Rule2Params{});
  CHECK(c.bootstrap.replicates == 2000);
  CHECK(c.bootstrap.fallback == BootstrapFallback::ReturnUncorrected);
  CHECK(c.abc.draws == 100000);
  CHECK(c.abc.epsilon == 0.05);
  CHECK(c.abc_prior == AbcPriorRegime::StandardNormal);
  CHECK(c.allocation == Allocation::FixedEqual);
}

TEST_CASE("full scenario fields parse") {
  const std::string text = wrap(R"({
    "effect_setting": "custom", "coefficients": [-0.4, 0.3, 0.2, 0.2],
    "n_per_arm": 25, "cutoffs": [0.2, 0.4, 0.6], "rule": "rule2",
    "rule2_params": {"effect_threshold": 0.1, "probability_threshold": 0.8,
                     "prior_alpha": 2, "prior_beta": 3},
    "n_simulations": 500, "estimators": ["bootstrap", "abc"],
    "bootstrap": {"replicates": 250, "fallback": "unconditional_bias"},
    "abc": {"draws": 5000, "epsilon": 0.08, "min_accepted": 25,
            "max_epsilon_doublings": 2, "prior": "true_centered",
            "true_centered_variance": 0.1},
    "master_seed": 99, "allocation": "bernoulli_half"})");
  const auto configs = parse_config_text(text);
  REQUIRE(configs.size() == 1);
  const ScenarioConfig& c = configs[0];
  CHECK(c.effect_setting.name == EffectName::Custom);
  CHECK(c.effect_setting.coefficients == ModelCoefficients{-0.4, 0.3, 0.2, 0.2});
  CHECK(c.cutoffs.values() == std::vector<double>{0.2, 0.4, 0.6});
  CHECK(c.rule == Rule::Rule2);
  CHECK(c.rule2.effect_threshold == 0.1);
  CHECK(c.rule2.probability_threshold == 0.8);
  CHECK(c.rule2.prior_alpha == 2);
  CHECK(c.rule2.prior_beta == 3);
  CHECK(c.n_simulations == 500);
  CHECK(c.estimators.mle);  // always on: corrections start from it
  CHECK(c.estimators.bootstrap);
  CHECK(c.estimators.abc);
  CHECK(c.bootstrap.replicates == 250);
  CHECK(c.bootstrap.fallback == BootstrapFallback::UnconditionalBias);
  CHECK(c.abc.draws == 5000);
  CHECK(c.abc.epsilon == 0.08);
  CHECK(c.abc.min_accepted == 25);
  CHECK(c.abc.max_epsilon_doublings == 2);
  CHECK(c.abc_prior == AbcPriorRegime::TrueCentered);
  CHECK(c.abc_true_centered_variance == 0.1);
  CHECK(c.allocation == Allocation::BernoulliHalf);
}

TEST_CASE("scalar grid fields expand by cartesian product") {
  SUBCASE("one array") {
    const std::string text = wrap(
        R"({"effect_setting": "more_or_less_1", "n_per_arm": [20, 40],
            "cutoffs": [0.3, 0.6], "rule": "rule1", "master_seed": 1})");
    const auto configs = parse_config_text(text);
    REQUIRE(configs.size() == 2);
    CHECK(configs[0].n_per_arm == 20);
    CHECK(configs[1].n_per_arm == 40);
    CHECK(configs[0].master_seed == 1);
  }

  SUBCASE("two arrays, field-major order") {
    const std::string text = wrap(
        R"({"effect_setting": "more_or_less_1", "n_per_arm": [20, 40],
            "cutoffs": [0.3, 0.6], "rule": "rule1", "master_seed": [1, 2]})");
    const auto configs = parse_config_text(text);
    REQUIRE(configs.size() == 4);
    const std::pair<int, std::uint64_t> expect[4] = {
        {20, 1}, {20, 2}, {40, 1}, {40, 2}};
    for (int i = 0; i < 4; ++i) {
      CHECK(configs[i].n_per_arm == expect[i].first);
      CHECK(configs[i].master_seed == expect[i].second);
    }
  }

  SUBCASE("effect settings expand too") {
    const std::string text = wrap(
        R"({"effect_setting": ["more_or_less_1", "more_or_less_2"],
            "n_per_arm": 20, "cutoffs": [0.3], "rule": "rule1",
            "master_seed": 1})");
    const auto configs = parse_config_text(text);
    REQUIRE(configs.size() == 2);
    CHECK(configs[0].effect_setting.name == EffectName::MoreOrLess1);
    CHECK(configs[1].effect_setting.name == EffectName::MoreOrLess2);
  }

  SUBCASE("nested fields never expand") {
    const std::string text = wrap(
        R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
            "cutoffs": [0.3], "rule": "rule1", "master_seed": 1,
            "abc": {"prior": ["standard_normal", "logit_fitted"]}})");
    expect_config_error(text, "/scenarios/0/abc/prior: string required");
  }
}

TEST_CASE("config schema violations carry JSON-pointer paths") {
  expect_config_error("not json", "invalid JSON");
  expect_config_error("[1, 2]", "top-level object required");
  expect_config_error(R"({"scenarios": []})", "/scenarios");
  expect_config_error(R"({"scenarios": [{}], "extra": 1})",
                      "/extra: unknown field");
  expect_config_error(wrap("{}"), "/scenarios/0/effect_setting");

  const std::string base =
      R"("n_per_arm": 20, "cutoffs": [0.3, 0.6], "rule": "rule1",
         "master_seed": 1)";
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_3", )" + base + "}"),
      "/scenarios/0/effect_setting");
  expect_config_error(wrap(R"({"effect_setting": "custom", )" + base + "}"),
                      "/scenarios/0/coefficients: required");
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1",
               "coefficients": [0, 0, 0, 0], )" +
           base + "}"),
      "/scenarios/0/coefficients: only valid");
  expect_config_error(
      wrap(R"({"effect_setting": "custom", "coefficients": [1, 2, 3], )" +
           base + "}"),
      "/scenarios/0/coefficients: array of 4 numbers required");

  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1", "cutoffs": [0.3],
               "rule": "rule1", "master_seed": 1})"),
      "/scenarios/0/n_per_arm: required field missing");
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
               "rule": "rule1", "master_seed": 1})"),
      "/scenarios/0/cutoffs: required field missing");
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
               "cutoffs": [0.6, 0.3], "rule": "rule1", "master_seed": 1})"),
      "/scenarios/0/cutoffs");
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
               "cutoffs": [0.3], "rule": "rule3", "master_seed": 1})"),
      "/scenarios/0/rule: expected rule1 or rule2");
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
               "cutoffs": [0.3], "rule": "rule1", "master_seed": -1})"),
      "/scenarios/0/master_seed: unsigned integer required");
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1", "n_per_arm": 0,
               "cutoffs": [0.3], "rule": "rule1", "master_seed": 1})"),
      "/scenarios/0/n_per_arm: positive integer required");
  expect_config_error(
      wrap(R"({"effect_setting": "more_or_less_1", "n_per_arm": [],
               "cutoffs": [0.3], "rule": "rule1", "master_seed": 1})"),
      "/scenarios/0/n_per_arm: empty grid array");

  const std::string head =
      R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
          "cutoffs": [0.3], "rule": "rule1", "master_seed": 1, )";
  expect_config_error(wrap(head + R"("mystery": true})"),
                      "/scenarios/0/mystery: unknown field");
  expect_config_error(wrap(head + R"("estimators": ["bogus"]})"),
                      "/scenarios/0/estimators/0");
  expect_config_error(wrap(head + R"("bootstrap": {"replicates": 50}})"),
                      "/scenarios/0/bootstrap/replicates: at least 100");
  expect_config_error(wrap(head + R"("abc": {"epsilon": 1.5}})"),
                      "/scenarios/0/abc/epsilon");
  expect_config_error(
      wrap(head + R"("abc": {"draws": 10, "min_accepted": 20}})"),
      "/scenarios/0/abc/draws: must be at least min_accepted");
  expect_config_error(
      wrap(head + R"("rule2_params": {"probability_threshold": 1.0}})"),
      "/scenarios/0/rule2_params/probability_threshold");
  expect_config_error(wrap(head + R"("allocation": "alternating"})"),
                      "/scenarios/0/allocation");
}

TEST_CASE("estimator list always keeps the mle") {
  const std::string text = wrap(
      R"({"effect_setting": "more_or_less_1", "n_per_arm": 20,
          "cutoffs": [0.3], "rule": "rule1", "master_seed": 1,
          "estimators": ["bootstrap"]})");
  const auto configs = parse_config_text(text);
  REQUIRE(configs.size() == 1);
  CHECK(configs[0].estimators.mle);
  CHECK(configs[0].estimators.bootstrap);
  CHECK_FALSE(configs[0].estimators.abc);
}

TEST_CASE("config hashes identify the effective configuration") {
  const auto a = parse_config_text(wrap(kMinimalScenario));
  const auto reordered = parse_config_text(wrap(
      R"({"master_seed": 7, "rule": "rule1", "cutoffs": [0.3, 0.6],
          "n_per_arm": 20, "effect_setting": "more_or_less_1"})"));
  REQUIRE(a.size() == 1);
  REQUIRE(reordered.size() == 1);
  CHECK(canonical_config_json(a[0]) == canonical_config_json(reordered[0]));
  CHECK(config_hash(a[0]) == config_hash(reordered[0]));

  ScenarioConfig changed = a[0];
  changed.master_seed = 8;
  CHECK(config_hash(changed) != config_hash(a[0]));

  const std::string hex = config_hash_hex(a[0]);
  CHECK(hex.size() == 16);
  CHECK(hex.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("records survive a CSV round trip bit for bit") {
  std::vector<SimulationRecord> records(3);
  records[0].sim_index = 0;  // nothing selected: every optional stays empty
  records[1].sim_index = 1;
  records[1].selected_cutoff = 0.3;
  records[1].theta_true_selected = 0.1 + 0.2;  // needs all 17 digits
  records[1].estimate_mle = 1.0 / 3.0;
  records[2].sim_index = 2;
  records[2].selected_cutoff = 0.6;
  records[2].theta_true_selected = 0.088690250986769112;
  records[2].estimate_mle = -0.25;
  records[2].estimate_bootstrap = 0.0123456789012345678;
  records[2].bootstrap_fallback = false;
  records[2].estimate_abc = 1e-17;
  records[2].abc_failed = true;

  const std::string csv = records_to_csv(records);
  const auto lines_begin = csv.find('\n');
  CHECK(csv.substr(0, lines_begin) ==
        "sim_index,selected_cutoff,theta_true_selected,estimate_mle,"
        "estimate_bootstrap,bootstrap_fallback,estimate_abc,abc_failed");
  CHECK(csv.find("\n0,,,,,,,\n") != std::string::npos);

  const auto back = records_from_csv(csv);
  REQUIRE(back.size() == records.size());
  CHECK(back == records);
}

TEST_CASE("records CSV rejects malformed input") {
  CHECK_THROWS_AS((void)records_from_csv(""), std::runtime_error);
  CHECK_THROWS_AS((void)records_from_csv("bad,header\n1,2\n"),
                  std::runtime_error);
  const std::string header =
      "sim_index,selected_cutoff,theta_true_selected,estimate_mle,"
      "estimate_bootstrap,bootstrap_fallback,estimate_abc,abc_failed\n";
  CHECK_THROWS_AS((void)records_from_csv(header + "0,,,\n"),
                  std::runtime_error);
  CHECK_THROWS_AS((void)records_from_csv(header + "0,x,,,,,,\n"),
                  std::runtime_error);
  CHECK_THROWS_AS((void)records_from_csv(header + "0,,,,,2,,\n"),
                  std::runtime_error);
}

TEST_CASE("bias reports round trip through CSV") {
  BiasReport report;
  report.n_simulations = 10;
  report.n_none = 4;
  report.none_probability = 0.4;
  BiasCell mle;
  mle.estimator = "mle";
  mle.selected_cutoff = 0.3;
  mle.n_selected = 5;
  mle.selection_probability = 0.5;
  mle.conditional_bias = 0.123;
  mle.sd = 0.05;
  mle.se = 0.05 / std::sqrt(5.0);
  BiasCell sparse;
  sparse.estimator = "mle";
  sparse.selected_cutoff = 0.6;
  sparse.n_selected = 1;
  sparse.selection_probability = 0.1;
  sparse.conditional_bias = -0.01;
  BiasCell boot;
  boot.estimator = "bootstrap";
  boot.selected_cutoff = 0.3;
  boot.n_selected = 5;
  boot.selection_probability = 0.5;
  report.cells = {mle, sparse, boot};

  const std::string csv = bias_report_to_csv(report);
  CHECK(csv.rfind("none,,4,0.40000000000000002,,,\n") != std::string::npos);

  const BiasReport back = bias_report_from_csv(csv);
  CHECK(back.n_none == 4);
  CHECK(back.none_probability == report.none_probability);
  CHECK(back.n_simulations == 10);  // 4 none + 5 + 1 over the mle rows
  REQUIRE(back.cells.size() == 3);
  CHECK(back.cells[0].estimator == "mle");
  CHECK(back.cells[0].selected_cutoff == 0.3);
  CHECK(back.cells[0].n_selected == 5);
  CHECK(back.cells[0].conditional_bias == mle.conditional_bias);
  CHECK(back.cells[0].sd == mle.sd);
  CHECK(back.cells[0].se == mle.se);
  CHECK(back.cells[1].conditional_bias == sparse.conditional_bias);
  CHECK_FALSE(back.cells[1].sd.has_value());
  CHECK_FALSE(back.cells[2].conditional_bias.has_value());

  CHECK_THROWS_AS((void)bias_report_from_csv(
                      "estimator,selected_cutoff,n_selected,"
                      "selection_probability,conditional_bias,sd,se\n"),
                  std::runtime_error);
}

TEST_CASE("record and report files write and read through the filesystem") {
  TempDir dir;
  std::vector<SimulationRecord> records(2);
  records[0].sim_index = 0;
  records[1].sim_index = 1;
  records[1].selected_cutoff = 0.3;
  records[1].theta_true_selected = 0.25;
  records[1].estimate_mle = 0.5;

  const fs::path rec_path = dir.path / "records.csv";
  write_records(records, rec_path);
  CHECK(read_records(rec_path) == records);

  const BiasReport report = aggregate_bias(records, CutoffSet::from({0.3}));
  const fs::path rep_path = dir.path / "report.csv";
  write_bias_report(report, rep_path);
  const BiasReport back = read_bias_report(rep_path);
  CHECK(back.n_simulations == report.n_simulations);
  CHECK(back.cells.size() == report.cells.size());

  CHECK_THROWS_AS((void)read_records(dir.path / "absent.csv"),
                  std::runtime_error);
  CHECK_THROWS_AS((void)read_bias_report(dir.path / "absent.csv"),
                  std::runtime_error);
}

TEST_CASE("manifest files name every output with its config hash") {
  TempDir dir;
  RunManifest manifest;
  manifest.timestamp = "2000-01-01T00:00:00Z";
  ManifestEntry entry;
  entry.scenario_index = 0;
  entry.config_hash = "00deadbeef00cafe";
  entry.master_seed = 42;
  entry.records_path = "records_000.csv";
  entry.report_path = "report_000.csv";
  manifest.entries.push_back(entry);

  const fs::path path = dir.path / "manifest.json";
  write_manifest(manifest, path);
  const std::string text = read_text(path);
  CHECK(text.find("\"tool_version\": \"0.1.0\"") != std::string::npos);
  CHECK(text.find("\"timestamp\": \"2000-01-01T00:00:00Z\"") !=
        std::string::npos);
  CHECK(text.find("\"config_hash\": \"00deadbeef00cafe\"") !=
        std::string::npos);
  CHECK(text.find("\"master_seed\": 42") != std::string::npos);
  CHECK(text.find("\"records\": \"records_000.csv\"") != std::string::npos);
}

TEST_CASE("cli exit codes separate config errors from runtime failures") {
  TempDir dir;

  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"truth", "--effect", "more_or_less_1", "--cutoffs",
                 "0.3,0.6"}) == 0);
  CHECK(run_cli({"truth", "--effect", "bogus", "--cutoffs", "0.3"}) == 1);
  CHECK(run_cli({"truth", "--effect", "more_or_less_1", "--cutoffs",
                 "0.6,0.3"}) == 1);

  const fs::path missing = dir.path / "missing.json";
  const fs::path out_dir = dir.path / "out";
  CHECK(run_cli({"run", missing.string().c_str(), "--out",
                 out_dir.string().c_str(), "--quiet"}) == 1);
  CHECK_FALSE(fs::exists(out_dir));

  const fs::path bad = dir.path / "bad.json";
  write_text(bad, R"({"scenarios": [{"effect_setting": "nope"}]})");
  CHECK(run_cli({"run", bad.string().c_str(), "--out",
                 out_dir.string().c_str(), "--quiet"}) == 1);
  CHECK_FALSE(fs::exists(out_dir));
}

TEST_CASE("cli run writes records, reports and a manifest") {
  TempDir dir;
  const fs::path config_path = dir.path / "config.json";
  write_text(config_path, wrap(
      R"({"effect_setting": "more_or_less_1", "n_per_arm": 10,
          "cutoffs": [0.3, 0.6], "rule": "rule1", "n_simulations": 12,
          "master_seed": 11})"));
  const fs::path out_dir = dir.path / "out";

  CHECK(run_cli({"run", config_path.string().c_str(), "--out",
                 out_dir.string().c_str(), "--threads", "2", "--quiet"}) == 0);

  REQUIRE(fs::exists(out_dir / "records_000.csv"));
  REQUIRE(fs::exists(out_dir / "report_000.csv"));
  REQUIRE(fs::exists(out_dir / "manifest.json"));

  const auto records = read_records(out_dir / "records_000.csv");
  CHECK(records.size() == 12);
  const auto report = read_bias_report(out_dir / "report_000.csv");
  CHECK(report.n_simulations == 12);

  const auto configs = parse_config(config_path);
  REQUIRE(configs.size() == 1);
  const std::string manifest_text = read_text(out_dir / "manifest.json");
  CHECK(manifest_text.find(config_hash_hex(configs[0])) != std::string::npos);
}

TEST_CASE("cli report re-aggregates an existing records file") {
  TempDir dir;
  std::vector<SimulationRecord> records(4);
  for (int i = 0; i < 4; ++i) records[i].sim_index = i;
  records[1].selected_cutoff = 0.3;
  records[1].theta_true_selected = 0.0;
  records[1].estimate_mle = 0.2;
  records[2].selected_cutoff = 0.3;
  records[2].theta_true_selected = 0.0;
  records[2].estimate_mle = 0.4;
  const fs::path rec_path = dir.path / "records.csv";
  write_records(records, rec_path);

  const fs::path out_path = dir.path / "report.csv";
  CHECK(run_cli({"report", "--records", rec_path.string().c_str(),
                 "--cutoffs", "0.3,0.6", "--out",
                 out_path.string().c_str()}) == 0);
  const BiasReport report = read_bias_report(out_path);
  CHECK(report.n_simulations == 4);
  CHECK(report.n_none == 2);
  REQUIRE(report.cells.size() == 2);
  CHECK(report.cells[0].n_selected == 2);
  CHECK(report.cells[1].n_selected == 0);

  // Recomputing truth against a stated effect shifts the conditional bias.
  const fs::path shifted_path = dir.path / "shifted.csv";
  CHECK(run_cli({"report", "--records", rec_path.string().c_str(),
                 "--effect", "more_or_less_1", "--cutoffs", "0.3,0.6",
                 "--out", shifted_path.string().c_str()}) == 0);
  const BiasReport shifted = read_bias_report(shifted_path);
  REQUIRE(shifted.cells[0].conditional_bias.has_value());
  REQUIRE(report.cells[0].conditional_bias.has_value());
  CHECK(*shifted.cells[0].conditional_bias !=
        *report.cells[0].conditional_bias);

  CHECK(run_cli({"report", "--records",
                 (dir.path / "no-such.csv").string().c_str()}) == 1);
}

TEST_CASE("the threads environment variable is validated strictly") {
  TempDir dir;
  const fs::path config_path = dir.path / "config.json";
  write_text(config_path, wrap(
      R"({"effect_setting": "more_or_less_1", "n_per_arm": 8,
          "cutoffs": [0.3], "rule": "rule1", "n_simulations": 4,
          "master_seed": 3})"));
  const fs::path out_dir = dir.path / "out";

  setenv(kThreadsEnvVar, "not-a-number", 1);
  CHECK(run_cli({"run", config_path.string().c_str(), "--out",
                 out_dir.string().c_str(), "--quiet"}) == 1);
  CHECK_FALSE(fs::exists(out_dir));

  setenv(kThreadsEnvVar, "2", 1);
  CHECK(run_cli({"run", config_path.string().c_str(), "--out",
                 out_dir.string().c_str(), "--quiet"}) == 0);
  unsetenv(kThreadsEnvVar);
  CHECK(fs::exists(out_dir / "manifest.json"));
}
