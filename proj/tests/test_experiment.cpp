#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "horolab/error.hpp"
#include "horolab/experiment.hpp"

using namespace horolab;

namespace {

const char* kH3Profile = R"(
manifold:
  model: hyperbolic
  params: {n: 3, k: 1}
experiment: profile
sampling:
  seed: 7
  count: 6
  tolerances: {expected_h: 1.0e-5}
parameters:
  expected_h: 2.0
output:
  path: h3_profile.csv
  format: csv
)";

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "bad.yaml");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    return e.what();
  }
  ADD_FAILURE() << "expected a config error";
  return {};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesAllSections) {
  const ExperimentConfig c = parse_config(kH3Profile, "h3.yaml");
  EXPECT_EQ(c.experiment, "profile");
  EXPECT_EQ(c.manifold.tag, "hyperbolic");
  EXPECT_EQ(c.manifold.params.at("n"), 3.0);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.count, 6);
  EXPECT_EQ(c.tolerances.at("expected_h"), 1e-5);
  EXPECT_EQ(c.parameters.at("expected_h"), 2.0);
  EXPECT_EQ(c.format, "csv");
  EXPECT_FALSE(c.canonical.empty());
}

TEST(Config, JsonDocumentsAreAccepted) {
  const ExperimentConfig c = parse_config(
      R"({"manifold": {"model": "euclidean", "params": {"n": 2}}, "experiment": "jacobi"})");
  EXPECT_EQ(c.experiment, "jacobi");
  EXPECT_EQ(c.output_path, "jacobi.json");
}

TEST(Config, ProductFactors) {
  const ExperimentConfig c = parse_config(R"(
manifold:
  model: product
  factors:
    - {model: hyperbolic, params: {n: 2, k: 1}}
    - {model: euclidean, params: {n: 1}}
experiment: datri-check
)");
  ASSERT_EQ(c.manifold.factors.size(), 2u);
  EXPECT_EQ(c.manifold.factors[1].tag, "euclidean");
}

TEST(Config, NegativeToleranceNamesFieldAndLine) {
  const std::string msg = config_error(R"(manifold: {model: euclidean, params: {n: 2}}
experiment: jacobi
sampling:
  tolerances:
    wronskian: -1.0e-7
)");
  EXPECT_NE(msg.find("bad.yaml:5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("sampling.tolerances.wronskian"), std::string::npos) << msg;
}

TEST(Config, Rejections) {
  const std::string base = "manifold: {model: hyperbolic, params: {n: 3, k: 1}}\n";
  EXPECT_NE(config_error(base + "experiment: nope\n").find("unknown experiment"), std::string::npos);
  EXPECT_NE(config_error(base + "experiment: profile\nextra: 1\n").find("extra: unknown field"),
            std::string::npos);
  EXPECT_NE(config_error(base + "experiment: profile\nsampling: {count: 0}\n").find("sampling.count"),
            std::string::npos);
  EXPECT_NE(config_error(base + "experiment: profile\nsampling: {anchor: [0, 0, -1]}\n")
                .find("outside the chart"),
            std::string::npos);
  EXPECT_NE(config_error(base + "experiment: profile\nsampling: {vector: [1, 0]}\n")
                .find("expected 3 components"),
            std::string::npos);
  EXPECT_NE(config_error(base + "experiment: profile\nparameters: {T: 3}\n").find("parameters.T"),
            std::string::npos);
  EXPECT_NE(config_error(base + "experiment: profile\noutput: {format: xml}\n").find("output.format"),
            std::string::npos);
  EXPECT_NE(config_error("manifold: {model: hyperbolic, params: {n: 3, k: -1}}\nexperiment: profile\n")
                .find("manifold"),
            std::string::npos);
  EXPECT_NE(config_error("manifold: [unclosed\n").find("bad.yaml:"), std::string::npos);
  EXPECT_NE(config_error("experiment: profile\n").find("manifold: required"), std::string::npos);
}

TEST(Experiments, CatalogueIsComplete) {
  std::vector<std::string> names;
  for (const auto& e : experiments()) {
    names.push_back(e.name);
    EXPECT_FALSE(e.pipeline.empty());
    EXPECT_FALSE(e.tolerances.empty());
  }
  for (const char* n : {"curvature-check", "jacobi", "stable-tensor", "profile", "flow-scan",
                        "reversibility-scan", "busemann", "leaf-probe", "conjugate-scan",
                        "datri-check", "sl2-verify"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
}

TEST(Run, HyperbolicProfilePasses) {
  const ExperimentReport r = run_experiment(parse_config(kH3Profile), 2);
  EXPECT_TRUE(r.pass) << (r.failures.empty() ? "" : r.failures.front());
  ASSERT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) EXPECT_NEAR(std::get<double>(row[1]), 2.0, 1e-5);
  EXPECT_LE(r.max_deviation, 1e-5);
  EXPECT_EQ(report_csv(r).substr(0, report_csv(r).find('\n')),
            "v_index,h,det_D,trace_D,rank,norm_bound_ok,det_trace_ok");
}

TEST(Run, WrongExpectationFails) {
  std::string text = kH3Profile;
  text.replace(text.find("expected_h: 2.0"), 15, "expected_h: 1.0");
  const ExperimentReport r = run_experiment(parse_config(text));
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.failures.empty());
}

TEST(Run, ReportsAreDeterministicAcrossJobs) {
  const ExperimentConfig c = parse_config(kH3Profile);
  const ExperimentReport a = run_experiment(c, 1), b = run_experiment(c, 4);
  EXPECT_EQ(report_csv(a), report_csv(b));
  EXPECT_EQ(report_json(a), report_json(b));
}

TEST(Run, JsonLayout) {
  const ExperimentReport r = run_experiment(parse_config(kH3Profile));
  const nlohmann::json j = nlohmann::json::parse(report_json(r));
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["experiment"], "profile");
  EXPECT_EQ(j["config_echo"]["manifold"]["model"], "hyperbolic");
  EXPECT_EQ(j["rows"].size(), 6u);
  EXPECT_EQ(j["summary"]["pass"], true);
  EXPECT_EQ(j["provenance"]["config_hash"].get<std::string>().size(), 16u);
  EXPECT_NEAR(j["rows"][0]["h"].get<double>(), std::get<double>(r.rows[0][1]), 0.0);
}

TEST(Run, WriteReportIsByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "horolab_test_experiment";
  std::filesystem::remove_all(dir);
  const ExperimentConfig c = parse_config(kH3Profile);
  const std::string p1 = write_report(run_experiment(c), c, dir.string());
  const std::string first = slurp(p1);
  const std::string p2 = write_report(run_experiment(c, 3), c, dir.string());
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(first, slurp(p2));
  EXPECT_EQ(std::filesystem::path(p1).filename(), "h3_profile.csv");
  std::filesystem::remove_all(dir);
}

TEST(Run, CurvatureCheckOnProduct) {
  const ExperimentReport r = run_experiment(parse_config(R"(
manifold:
  model: product
  factors:
    - {model: hyperbolic, params: {n: 2, k: 1}}
    - {model: hyperbolic, params: {n: 2, k: 1}}
experiment: curvature-check
sampling: {seed: 3, count: 5}
)"));
  EXPECT_TRUE(r.pass) << (r.failures.empty() ? "" : r.failures.front());
  EXPECT_EQ(r.rows.size(), 5u);
}

TEST(Run, JacobiWronskian) {
  const ExperimentReport r = run_experiment(parse_config(R"(
manifold: {model: heisenberg, params: {b: 1}}
experiment: jacobi
sampling: {seed: 5, count: 3, time_grid: [0.5, 1, 2]}
)"));
  EXPECT_TRUE(r.pass) << (r.failures.empty() ? "" : r.failures.front());
  EXPECT_EQ(r.rows.size(), 9u);
}

TEST(Run, DAtriOnHyperbolic) {
  const ExperimentReport r = run_experiment(parse_config(R"(
manifold: {model: hyperbolic, params: {n: 3, k: 1}}
experiment: datri-check
sampling: {seed: 9, count: 8}
parameters: {require_harmonic: 1}
)"), 2);
  EXPECT_TRUE(r.pass) << (r.failures.empty() ? "" : r.failures.front());
}

TEST(Run, ConjugateScanExpectation) {
  const ExperimentReport r = run_experiment(parse_config(R"(
manifold: {model: euclidean, params: {n: 3}}
experiment: conjugate-scan
sampling: {seed: 1, count: 2}
parameters: {T: 5, dt: 0.05}
)"));
  EXPECT_TRUE(r.pass);
  ASSERT_EQ(r.summary_extras.front().first, "first_conjugate_time");
  EXPECT_TRUE(std::holds_alternative<std::monostate>(r.summary_extras.front().second));
}

TEST(Run, LeafProbeOnHyperbolic) {
  const ExperimentReport r = run_experiment(parse_config(R"(
manifold: {model: hyperbolic, params: {n: 3, k: 1}}
experiment: leaf-probe
parameters: {horo_offset: 1, expected_rate: -1}
)"));
  EXPECT_TRUE(r.pass) << (r.failures.empty() ? "" : r.failures.front());
}

TEST(Run, Sl2VerifyReportsEveryCheck) {
  const ExperimentReport r = run_experiment(parse_config(R"(
manifold: {model: sl2r, params: {a: -2, b: 1}}
experiment: sl2-verify
)"));
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(std::get<bool>(r.rows[0][4]), true);  // closed form solves its ODE system
  EXPECT_EQ(std::get<bool>(r.rows[2][4]), true);  // R(V1,V3)V3 = (b/2) V1
  EXPECT_FALSE(r.pass);  // the metric's conjugate time and the V2 sign differ
}

TEST(Run, Sl2VerifyNeedsSl2Model) {
  EXPECT_THROW(run_experiment(parse_config(
                   "manifold: {model: euclidean, params: {n: 3}}\nexperiment: sl2-verify\n")),
               Error);
}

TEST(Csv, QuotesText) {
  ExperimentReport r;
  r.columns = {"a", "b", "c"};
  r.rows = {{Cell{std::string("x,y")}, Cell{0.1}, Cell{}}, {Cell{std::string("q\"t")}, Cell{true}, Cell{std::int64_t{3}}}};
  EXPECT_EQ(report_csv(r), "a,b,c\n\"x,y\",0.10000000000000001,\n\"q\"\"t\",true,3\n");
}

TEST(Hash, Fnv1a) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}
