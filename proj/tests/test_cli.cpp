#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Result ims(const std::string& args) {
  const std::string cmd = std::string(IMS_BINARY) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ims-cli-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, PresetsListsBuiltins) {
  const auto r = ims("presets");
  EXPECT_EQ(r.code, 0);
  for (const char* name : {"equilibrium", "two-species-mode-1", "two-species-mode-2", "three-species-2d",
                           "cfl-violation", "random-small"})
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
}

TEST(Cli, CertificateOfConfigFile) {
  const auto r = ims("certificate " + std::string(IMS_SOURCE_DIR) + "/configs/minimal.json");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("certificate.lambda_A = 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("certificate.delta_s = "), std::string::npos);
}

TEST(Cli, EquilibriumRunWritesArtifacts) {
  const auto dir = scratch("eq");
  const auto r = ims("run equilibrium --quiet --output-dir " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(r.out.empty()) << r.out;
  const auto csv = slurp(dir / "diagnostics.csv");
  EXPECT_EQ(csv.rfind("# ims diagnostics v1\nt,h_s_norm,", 0), 0u);
  EXPECT_NE(slurp(dir / "summary.txt").find("status = completed"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, CflViolationExitsNonzeroWithReason) {
  const auto dir = scratch("cfl");
  const auto r = ims("run cfl-violation --output-dir " + dir.string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("CflViolated"), std::string::npos);
  EXPECT_NE(slurp(dir / "summary.txt").find("termination.reason = CflViolated"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, SeedAndSnapshotFlags) {
  const auto dir = scratch("flags");
  const auto r = ims("run random-small --quiet --seed 5 --snapshot-every 0.5 --output-dir " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(slurp(dir / "summary.txt").find("seed = 5\n"), std::string::npos);
  for (const char* t : {"t_0.000000.bin", "t_0.500000.bin", "t_1.000000.bin", "t_1.500000.bin", "t_2.000000.bin"})
    EXPECT_TRUE(fs::exists(dir / "snapshots" / t)) << t;
  fs::remove_all(dir);
}

TEST(Cli, ValidationErrorsNameKeys) {
  const auto dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"grid":{"dim":1,"M":64},"species":{"N":2,"c_bar":[1,0],"delta":-1}})";
  const auto r = ims("run " + (dir / "bad.json").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("species.c_bar: strictly positive required"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("species.delta: must be positive"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, UnknownTargetAndUsage) {
  EXPECT_EQ(ims("run no-such-thing").code, 1);
  EXPECT_NE(ims("").code, 0);
  EXPECT_NE(ims("run").code, 0);
}
