// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

// Drives the gp-sbc executable as a subprocess and inspects what it writes.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Result {
  int code = -1;
  std::string output;  // stdout and stderr together
};

Result run(const std::string& args) {
  const std::string cmd = std::string(GPSBC_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("gpsbc_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

TEST_F(Cli, VersionAndUsage) {
  const auto v = run("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_FALSE(v.output.empty());
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("sbc --out x").code, 1);  // --config missing
  EXPECT_EQ(run("bogus").code, 1);
}

TEST_F(Cli, SbcPassWritesArtifacts) {
  const auto cfg = config("c.json", R"({"sbc": {"N": 300, "L": 100}})");
  const auto r = run("sbc --config " + cfg + " --out " + out("o") + " --threads 2");
  EXPECT_EQ(r.code, 0) << r.output;
  const fs::path o = out("o");
  // One row per (test point, output, rank) plus the header: 4 * 1 * 101.
  EXPECT_EQ(count_lines(read_all(o / "tally.csv")), 4 * 101 + 1);
  const auto report = json::parse(read_all(o / "report.json"));
  EXPECT_EQ(report.at("verdict"), "pass");
  EXPECT_EQ(report.at("N_completed"), 300);
  EXPECT_TRUE(fs::exists(o / "histogram_single.svg"));
  EXPECT_TRUE(fs::exists(o / "histogram_output_0.svg"));
}

TEST_F(Cli, ManifestChecksumsMatchFiles) {
  const auto cfg = config("c.json", R"({"sbc": {"N": 50, "L": 9}})");
  ASSERT_EQ(run("sbc --config " + cfg + " --out " + out("o") + " --seed 4").code, 0);
  const fs::path o = out("o");
  const auto manifest = json::parse(read_all(o / "manifest.json"));
  EXPECT_EQ(manifest.at("command"), "sbc");
  EXPECT_EQ(manifest.at("base_seed"), 4);
  ASSERT_GE(manifest.at("files").size(), 3u);
  for (const auto& f : manifest.at("files")) {
    const fs::path path = o / f.at("path").get<std::string>();
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(f.at("bytes").get<std::uintmax_t>(), fs::file_size(path));
    FILE* pipe = popen(("sha256sum " + path.string()).c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    char digest[65] = {};
    ASSERT_EQ(fread(digest, 1, 64, pipe), 64u);
    pclose(pipe);
    EXPECT_EQ(f.at("sha256").get<std::string>(), std::string(digest)) << path;
  }
}

TEST_F(Cli, PlantedFaultFails) {
  const auto cfg = config("c.json", R"({"sbc": {"N": 400, "L": 100},
      "model": {"fault": {"type": "scaled_posterior_variance", "factor": 0.25}}})");
  const auto r = run("sbc --config " + cfg + " --out " + out("o"));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_EQ(json::parse(read_all(fs::path(out("o")) / "report.json")).at("verdict"), "fail");
}

TEST_F(Cli, RerunAndThreadCountAreByteIdentical) {
  const auto cfg = config("c.json", R"({"sbc": {"N": 200, "L": 19}, "diagnostics": {"mc_reps": 999}})");
  ASSERT_EQ(run("sbc --config " + cfg + " --out " + out("a") + " --threads 1").code, 0);
  ASSERT_EQ(run("sbc --config " + cfg + " --out " + out("b") + " --threads 8").code, 0);
  for (const char* f : {"tally.csv", "report.json", "histogram_single.svg"}) {
    EXPECT_EQ(read_all(fs::path(out("a")) / f), read_all(fs::path(out("b")) / f)) << f;
  }
}

TEST_F(Cli, DemoBugPreconditions) {
  const auto none = run("demo-bug --config " + config("a.json", "{}") + " --out " + out("a"));
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.output.find("arms indistinguishable"), std::string::npos) << none.output;

  const auto sym = run("demo-bug --config " +
                       config("b.json", R"({"model": {"fault": {"type": "transposed_mixing_matrix"}}})") + " --out " +
                       out("b"));
  EXPECT_EQ(sym.code, 1);
  EXPECT_NE(sym.output.find("symmetric W"), std::string::npos) << sym.output;
}

TEST_F(Cli, DemoBugContrast) {
  const auto cfg = config("c.json", R"({"sbc": {"N": 300, "L": 100},
      "model": {"fault": {"type": "scaled_posterior_variance", "factor": 0.25}}})");
  const auto r = run("demo-bug --config " + cfg + " --out " + out("o"));
  EXPECT_EQ(r.code, 0) << r.output;
  const auto report = json::parse(read_all(fs::path(out("o")) / "report.json"));
  EXPECT_EQ(report.at("contrast_detected"), true);
  EXPECT_TRUE(fs::exists(fs::path(out("o")) / "demo_bug.svg"));
  EXPECT_TRUE(fs::exists(fs::path(out("o")) / "tally_faulted.csv"));
}

TEST_F(Cli, DemoBugTransposedMixing) {
  const auto cfg = config("c.json", R"({"sbc": {"N": 300},
      "model": {"kernel": {"type": "linear_coregionalization",
                           "latent_kernels": [{"type": "squared_exponential", "lengthscales": [0.5]},
                                              {"type": "squared_exponential", "signal_variance": 0.5, "lengthscales": [0.4]}],
                           "mixing": [[1.0, 0.9], [-0.4, 1.0]]},
                "fault": {"type": "transposed_mixing_matrix"}}})");
  const auto r = run("demo-bug --config " + cfg + " --out " + out("o"));
  EXPECT_EQ(r.code, 0) << r.output;
}

// A point-mass hyperparameter prior at the template and no optimizer steps
// make marg-check rank exactly like plain SBC.
TEST_F(Cli, MargCheckReducesToSbc) {
  std::ofstream(dir_ / "data.csv") << "x_1,y_1\n0.0,0.1\n0.2,0.5\n0.4,0.3\n0.6,-0.2\n0.8,-0.6\n1.0,-0.1\n";
  const std::string common = R"("model": {"kernel": {"type": "squared_exponential", "signal_variance": 1.0, "lengthscales": [0.5]},
      "noise_variance": 0.1}, "diagnostics": {"mc_reps": 999})";
  const auto marg = config("m.json", "{" + common + R"(, "sbc": {"N": 150, "L": 19},
      "marg_check": {"data_csv": "data.csv",
        "hyper_prior": {"signal_variance": {"mu": 0, "sigma": 0}, "lengthscales": {"mu": -0.6931471805599453, "sigma": 0},
                        "noise_variance": {"mu": -2.3025850929940455, "sigma": 0}},
        "optimizer": {"max_iterations": 0}}})");
  const auto sbc = config("s.json", "{" + common + R"(, "sbc": {"N": 150, "L": 19,
      "X": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]}})");
  const auto m = run("marg-check --config " + marg + " --out " + out("m"));
  ASSERT_TRUE(m.code == 0 || m.code == 2) << m.output;
  ASSERT_EQ(run("sbc --config " + sbc + " --out " + out("s")).code, 0);
  EXPECT_EQ(read_all(fs::path(out("m")) / "tally.csv"), read_all(fs::path(out("s")) / "tally.csv"));
  const auto trace = read_all(fs::path(out("m")) / "theta_trace.csv");
  EXPECT_EQ(count_lines(trace), 151);
}

TEST_F(Cli, BadConfigIsAnError) {
  const auto r = run("sbc --config " + config("c.json", R"({"sbc": {"L": 0}})") + " --out " + out("o"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("sbc.L"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(fs::path(out("o")) / "manifest.json"));
}

}  // namespace
