#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace gdifs;
using namespace testing_support;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(GDIFS_CLI) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gdifs_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spill(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

double value_after(const std::string& text, const std::string& key) {
  const auto at = text.find(key);
  if (at == std::string::npos) return std::nan("");
  return std::stod(text.substr(at + key.size()));
}

}  // namespace

TEST(Cli, DimCantor) {
  const CliRun r = run("dim --config " + fixture("cantor"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(value_after(r.out, "dimension "), std::log(2.0) / std::log(3.0), 1e-9);
}

TEST(Cli, DimFullShiftHalves) {
  const auto cfg = scratch("full_shift.json");
  spill(cfg, R"({"kind":"sft","dim":1,"matrix":[[1,1],[1,1]],
    "maps":[{"ratio":0.5,"translation":[0]},{"ratio":0.5,"translation":[0.5]}]})");
  const CliRun r = run("dim --config " + cfg.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(value_after(r.out, "dimension "), 1.0, 1e-9);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("dim --config " + fixture("disconnected")).code, 2);
  EXPECT_EQ(run("dim --config /nonexistent.json").code, 1);
  EXPECT_EQ(run("dim").code, 1);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("approximate --config " + fixture("planar_irrational") +
                " --mode exact --target-rotation 0 --epsilon 0.2 --out " + scratch("x.json").string())
                .code,
            3);
  EXPECT_EQ(run("approximate --config " + fixture("cantor") + " --mode bogus --epsilon 0.2 --out " +
                scratch("x.json").string())
                .code,
            1);
}

TEST(Cli, ApproximateDenseCantorAndVerify) {
  const auto cert = scratch("cantor_dense.json");
  const CliRun r = run("approximate --config " + fixture("cantor") + " --epsilon 0.05 --out " + cert.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_GT(value_after(r.out, "achieved "), 0.5809);
  const CliRun v = run("verify --config " + fixture("cantor") + " --certificate " + cert.string());
  EXPECT_EQ(v.code, 0) << v.out;
  for (const char* check : {"hash", "provenance", "separation", "dimension", "group"})
    EXPECT_NE(v.out.find(std::string("ok   ") + check), std::string::npos) << check;
}

TEST(Cli, UniformCantorIdentity) {
  const auto cert = scratch("cantor_uniform.json");
  const CliRun r = run("approximate --config " + fixture("cantor") +
                    " --mode uniform --target-rotation '[[1]]' --epsilon 0.1 --out " + cert.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(run("verify --config " + fixture("cantor") + " --certificate " + cert.string()).code, 0);
}

TEST(Cli, VerifyCatchesMutations) {
  const auto cert = scratch("cantor_mut.json");
  ASSERT_EQ(run("approximate --config " + fixture("cantor") + " --epsilon 0.1 --out " + cert.string()).code, 0);
  const Json good = Json::parse(slurp(cert));

  auto verify_mutant = [&](const Json& j) {
    const auto p = scratch("mutant.json");
    spill(p, j.dump());
    return run("verify --config " + fixture("cantor") + " --certificate " + p.string());
  };

  Json a = good;
  a["ssifs"][0]["ratio"] = a["ssifs"][0]["ratio"].get<double>() * 1.001;
  CliRun r = verify_mutant(a);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("FAIL provenance"), std::string::npos) << r.out;

  Json b = good;
  b["separation"][0]["gap"] = b["separation"][0]["gap"].get<double>() * 10.0;
  r = verify_mutant(b);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("FAIL separation"), std::string::npos) << r.out;

  Json c = good;
  auto& e = c["ssifs"][0]["provenance_edges"][0];
  e = 1 - e.get<int>();
  r = verify_mutant(c);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("FAIL provenance"), std::string::npos) << r.out;

  // Verifying against a different config fails the hash check.
  const auto other = scratch("cantor_other.json");
  spill(other, R"({"kind":"gdifs","dim":1,"vertices":1,"edges":[
    {"from":0,"to":0,"map":{"ratio":0.3333333333333333,"translation":[0.0]}},
    {"from":0,"to":0,"map":{"ratio":0.3333333333333333,"translation":[0.6666666666666666]}}],"version":"v1"})");
  r = run("verify --config " + other.string() + " --certificate " + cert.string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("FAIL hash"), std::string::npos) << r.out;
}

TEST(Cli, RenderIsDeterministic) {
  const auto a = scratch("a.ppm"), b = scratch("b.ppm");
  const std::string args = "render --config " + fixture("three_vertex_ssc") + " --width 64 --height 64 --iterations 5000 --out ";
  ASSERT_EQ(run(args + a.string()).code, 0);
  ASSERT_EQ(run(args + b.string()).code, 0);
  const std::string x = slurp(a);
  EXPECT_EQ(x, slurp(b));
  EXPECT_EQ(x.substr(0, 3), "P6\n");
}

TEST(Cli, LogRatioCheck) {
  const CliRun r = run("log-ratio-check --config " + fixture("cantor") + " --config-b " + fixture("cantor") +
                    " --max-length 2");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("not a proof"), std::string::npos);
}
