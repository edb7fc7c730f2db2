#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cvbn-cli-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cvbn(const std::string& args, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / "cvbn-cli-last.txt";
  const std::string cmd = env + " '" CVBN_CLI "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(Cli, InferPrintsDistribution) {
  const Outcome r = cvbn("infer --model isig --query SC");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("variable,state,p\nSC,none,", 0), 0u) << r.out;
}

TEST(Cli, InferTableHasOneRowPerGivenState) {
  const Outcome r = cvbn("infer --model isig --query SC --table RSE");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("RSE,none,low,med,high,cri\nlow,", 0), 0u) << r.out;
}

TEST(Cli, UnknownVariableIsValidationError) {
  const Outcome r = cvbn("infer --model isig --query XYZ");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("UnknownVariable: XYZ"), std::string::npos) << r.out;
  EXPECT_EQ(cvbn("infer --model isig --query SC -e RSE=extreme").code, 2);
  EXPECT_EQ(cvbn("infer --model nosuchmodel --query SC").code, 2);
  EXPECT_EQ(cvbn("--format xml infer --model isig --query SC").code, 2);
  EXPECT_EQ(cvbn("frobnicate").code, 2);
}

TEST(Cli, ZeroProbabilityEvidenceExits3) {
  const Outcome r = cvbn("infer --model isig --query RSE -e SC=cri");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("InconsistentEvidence"), std::string::npos);
}

TEST(Cli, ModelSearchPathOverride) {
  const fs::path d = scratch("models");
  // a file under the override shadows the zoo: here a one-variable network named isig
  write(d / "isig.json", R"({"format": "cvbn-network", "name": "tiny", "version": 1,
    "variables": [{"id": "SC", "name": "SC", "states": ["none", "low"]}],
    "cpts": [{"child": "SC", "parents": [], "table": [[0.25, 0.75]]}]})");
  const Outcome r = cvbn("infer --model isig --query SC", "CVBN_MODEL_PATH='" + d.string() + "'");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("SC,low,0.75"), std::string::npos) << r.out;
}

TEST(Cli, SeedIsMandatory) {
  const fs::path d = scratch("seed");
  write(d / "s.json", R"({"name": "s", "model": "isig", "mc": {"cycles": 5, "replications": 2}})");
  EXPECT_EQ(cvbn("--out " + (d / "o").string() + " mc " + (d / "s.json").string()).code, 2);
  EXPECT_EQ(cvbn("sim isig-isolated --volume 500").code, 2);
  EXPECT_EQ(cvbn("--seed 4 --out " + (d / "o").string() + " mc " + (d / "s.json").string()).code, 0);
}

TEST(Cli, ScenarioTyposAreRejected) {
  const fs::path d = scratch("typo");
  write(d / "s.json", R"({"name": "s", "seed": 1, "model": "isig", "mc": {"cylces": 5}})");
  const Outcome r = cvbn("mc " + (d / "s.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("cylces"), std::string::npos) << r.out;
  write(d / "b.json", "{ not json");
  EXPECT_EQ(cvbn("mc " + (d / "b.json").string()).code, 2);
}

TEST(Cli, FailedReplicationsExit4WithPartialOutputs) {
  const fs::path d = scratch("fail");
  write(d / "s.json", R"({"name": "s", "seed": 1, "model": "isig",
    "mc": {"cycles": 3, "replications": 4, "evidence": {"PB": "low"}}})");
  const Outcome r = cvbn("--out " + (d / "o").string() + " mc " + (d / "s.json").string());
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_TRUE(fs::exists(d / "o" / "failures.csv"));
  EXPECT_TRUE(fs::exists(d / "o" / "manifest.json"));
  EXPECT_NE(slurp(d / "o" / "manifest.json").find("replications-failed"), std::string::npos);
}

TEST(Cli, CollisionExits5WithDiagnostics) {
  const fs::path d = scratch("crash");
  const Outcome r = cvbn("--seed 1 --out " + d.string() +
                     " sim cacc --low 'N(-300,10)' --episode-mean 30 --seeds 1 --horizon 300");
  EXPECT_EQ(r.code, 5) << r.out;
  EXPECT_NE(slurp(d / "diagnostics.txt").find("CollisionDetected"), std::string::npos);
}

TEST(Cli, ReportVerifiesHashes) {
  const fs::path d = scratch("report");
  ASSERT_EQ(cvbn("--seed 2 --out " + (d / "a").string() + " sim isig-isolated --volume 600 --seeds 2").code, 0);
  ASSERT_EQ(cvbn("--seed 2 --out " + (d / "b").string() + " sim cacc --seeds 1 --horizon 300").code, 0);
  const Outcome ok = cvbn("report " + d.string());
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_TRUE(fs::exists(d / "report.json"));
  EXPECT_TRUE(fs::exists(d / "plot_sim.csv"));

  std::ofstream(d / "a" / "sim.csv", std::ios::app) << "tampered\n";
  const Outcome bad = cvbn("report " + d.string());
  EXPECT_EQ(bad.code, 6);
  EXPECT_NE(bad.out.find("sim.csv (hash mismatch)"), std::string::npos) << bad.out;

  write(d / "b" / "manifest.json", "{");
  EXPECT_EQ(cvbn("report " + d.string()).code, 6);
}

TEST(Cli, ManifestRecordsResolvedConfig) {
  const fs::path d = scratch("manifest");
  ASSERT_EQ(cvbn("--seed 9 --out " + d.string() + " sim isig-isolated --volumes 500:700:100 --seeds 1").code, 0);
  const std::string m = slurp(d / "manifest.json");
  for (const char* key : {"\"seed\": 9", "\"config_hash\"", "\"sha256\"", "\"volumes_resolved\"", "\"sim.csv\""})
    EXPECT_NE(m.find(key), std::string::npos) << key;
}

TEST(Cli, JsonFormatTables) {
  const Outcome r = cvbn("--format json infer --model isig --query SC");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"state\": \"none\""), std::string::npos) << r.out;
}

TEST(Cli, ValidateChecksShippedModels) {
  const Outcome r = cvbn("validate");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("matches the zoo"), std::string::npos);
  const fs::path d = scratch("validate");
  ASSERT_EQ(cvbn("validate --regenerate --models " + d.string()).code, 0);
  std::ofstream(d / "isig.json", std::ios::app) << " ";
  EXPECT_EQ(cvbn("validate --models " + d.string()).code, 2);
}

}  // namespace
