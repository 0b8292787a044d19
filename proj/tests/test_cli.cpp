// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "stochgrid/config.hpp"
#include "stochgrid/experiment.hpp"

using namespace stochgrid;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "stochgrid_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

const char* kCountConfig = R"(# constant intensity, N/n -> 2
[run]
kind  = count-asymptotics
paths = 20
n     = 10000
mesh_steps = 20000

[model]
preset = brownian

[theta]
strategy = constant
value    = 2
)";

int cli(const std::string& args) {
  const int status = std::system((std::string(STOCHGRID_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(ConfigFile, ParsesSectionsListsAndComments) {
  const ConfigFile f = ConfigFile::parse("[a]\nx = 1 ; trailing\n# full line\ny = 1.5, 2,3\n[b]\nz = word\n");
  EXPECT_EQ(f.integer("a", "x", 0), 1u);
  EXPECT_EQ(f.reals("a", "y", {}), (std::vector<double>{1.5, 2.0, 3.0}));
  EXPECT_EQ(f.text("b", "z", ""), "word");
  EXPECT_EQ(f.text("b", "missing", "dflt"), "dflt");
}

TEST(ConfigFile, RoundTripsThroughText) {
  const ConfigFile f = ConfigFile::parse("[b]\nz = 1, 2\n[a]\nx = word # note\n");
  const ConfigFile g = ConfigFile::parse(f.to_text());
  EXPECT_EQ(g.to_text(), f.to_text());
  EXPECT_EQ(g.text("a", "x", ""), "word");
  EXPECT_EQ(g.reals("b", "z", {}), (std::vector<double>{1.0, 2.0}));
}

TEST(ConfigFile, ErrorsCarryLinePositions) {
  EXPECT_EQ(message_of([] { ConfigFile::parse("[a]\nx 1\n", "f.ini"); }), "f.ini:2: expected 'key = value'");
  EXPECT_EQ(message_of([] { ConfigFile::parse("x = 1\n", "f.ini"); }), "f.ini:1: key outside of any section");
  EXPECT_EQ(message_of([] { ConfigFile::parse("[a]\nx = 1\nx = 2\n", "f.ini"); }),
            "f.ini:3: duplicate key 'x' in [a]");
  const ConfigFile f = ConfigFile::parse("[run]\n\nseed = abc\n", "f.ini");
  EXPECT_EQ(message_of([&] { f.integer("run", "seed", 0); }),
            "f.ini:3: [run] seed: 'abc' is not a non-negative integer");
  EXPECT_THROW(ConfigFile::parse("[a\n"), ConfigError);
}

TEST(ExperimentConfig, RejectsUnknownKeysAndPresets) {
  auto load = [](const std::string& text) { return experiment_from(ConfigFile::parse(text, "e.ini")); };
  EXPECT_EQ(message_of([&] { load("[run]\nkind = convergence\nbogus = 1\n"); }),
            "e.ini:3: unknown key 'bogus' in [run]");
  EXPECT_THROW(load("[run]\nkind = convergence\n[extra]\nk = 1\n"), ConfigError);
  EXPECT_THROW(load("[run]\nkind = nonsense\n"), ConfigError);
  EXPECT_THROW(load("[run]\nlabel = x\n"), ConfigError);
  EXPECT_THROW(load("[run]\nkind = hedge\n[model]\npreset = heston\n"), ConfigError);
  EXPECT_THROW(load("[run]\nkind = hedge\n[model]\npreset = black-scholes\n[integrand]\npreset = square\n"),
               ConfigError);
  EXPECT_THROW(load("[run]\nkind = hedge\n[model]\npreset = black-scholes\nV = 1.5\n"), ConfigError);
  EXPECT_THROW(load("[run]\nkind = convergence\nn = 0.5\n"), ConfigError);
}

TEST(ExperimentConfig, NoBadDaysConstants) {
  auto load = [](const std::string& text) { return experiment_from(ConfigFile::parse(text)); };
  EXPECT_TRUE(load("[run]\nkind = hedge\n[model]\npreset = black-scholes\n[theta]\nc = none\n").theta.c.empty());
  EXPECT_EQ(load("[run]\nkind = hedge\n[model]\npreset = black-scholes\n[theta]\nc = 1, 2, 4\n").theta.c,
            (std::vector<double>{1.0, 2.0, 4.0}));
  EXPECT_THROW(load("[run]\nkind = convergence\n[theta]\nstrategy = no-bad-days\nc = none\n"), ConfigError);
  EXPECT_THROW(load("[run]\nkind = hedge\n[model]\npreset = black-scholes\n[theta]\nc = 1, -2\n"), ConfigError);
}

TEST(ExperimentConfig, DefaultsAndBlackScholesHorizon) {
  const ExperimentConfig c =
      experiment_from(ConfigFile::parse("[run]\nkind = hedge\n[model]\npreset = black-scholes\nT = 2\n"));
  EXPECT_EQ(c.integrand, "bs-hedge");
  EXPECT_DOUBLE_EQ(c.model.bs.V, 1.9);
  EXPECT_DOUBLE_EQ(c.effective_horizon(), 1.9);
  EXPECT_DOUBLE_EQ(c.effective_tolerance(), 0.10);
}

TEST(Csv, FormatIsLocaleFreeWithLfEndings) {
  const fs::path dir = scratch("csv");
  {
    CsvWriter w(dir / "a.csv", {"x", "y"});
    w.row({0.1, -2.5e-7});
    w.row("key", std::vector<double>{3.0});
    EXPECT_THROW(w.row({1.0}), ConfigError);
  }
  EXPECT_EQ(read_file(dir / "a.csv"), "x,y\n0.1,-2.5e-07\nkey,3\n");
  EXPECT_EQ(format_number(NAN), "nan");
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST(Run, CountAsymptoticsExample) {
  ExperimentConfig c = experiment_from(ConfigFile::parse(kCountConfig));
  c.out = scratch("count");
  const RunReport r = run(c);
  EXPECT_TRUE(r.pass);
  const double ratio = r.report["summary"]["mean_count_over_n"].get<double>();
  EXPECT_NEAR(ratio, 2.0, 0.002);
  EXPECT_TRUE(fs::exists(c.out / "report.json"));
  EXPECT_TRUE(fs::exists(c.out / "manifest.json"));
  EXPECT_TRUE(fs::exists(c.out / "counts_n10000.csv"));
}

TEST(Run, ReportsAreByteIdenticalAcrossJobCounts) {
  ExperimentConfig c = experiment_from(ConfigFile::parse(
      "[run]\nkind = convergence\npaths = 64\nn = 16, 32\nidentity_instances = 6\n[model]\npreset = gbm\n"
      "[integrand]\npreset = square\n"));
  c.out = scratch("det1");
  c.jobs = 1;
  const RunReport a = run(c);
  c.out = scratch("det3");
  c.jobs = 3;
  const RunReport b = run(c);
  EXPECT_EQ(read_file(a.out / "report.json"), read_file(b.out / "report.json"));
  ASSERT_EQ(a.manifest.size(), b.manifest.size());
  for (std::size_t i = 0; i < a.manifest.size(); ++i) {
    EXPECT_EQ(a.manifest[i].file, b.manifest[i].file);
    EXPECT_EQ(a.manifest[i].fnv1a64, b.manifest[i].fnv1a64);
  }
}

TEST(Run, ModuleErrorsAreWrapped) {
  ExperimentConfig c = experiment_from(ConfigFile::parse(
      "[run]\nkind = lemma-psi\npaths = 10\n[model]\npreset = gbm\n"));
  c.out = scratch("wrapped");
  try {
    run(c);
    FAIL();
  } catch (const ExperimentError& e) {
    EXPECT_THROW(std::rethrow_if_nested(e), Error);
  }
}

TEST(Sweep, RunsEachConfigAndWritesOneRowPerValue) {
  const ConfigFile base = ConfigFile::parse(kCountConfig);
  const auto files = expand_axis(base, "run.n", {"1000", "2000"});
  const fs::path dir = scratch("sweep");
  const SweepResult s = sweep(files, "run.n", dir, 5);
  ASSERT_EQ(s.runs.size(), 2u);
  EXPECT_TRUE(s.pass);
  const std::string csv = read_file(s.csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.rfind("run.n,pass", 0), 0u);

  ConfigFile other = base;
  other.set("run", "paths", "21");
  EXPECT_THROW(sweep({base, other}, "run.n", scratch("sweep_bad")), ConfigError);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "ok.ini") << kCountConfig;
    std::ofstream(dir / "bad.ini") << "[run]\nkind = count-asymptotics\nwhat = 1\n";
    std::ofstream(dir / "fail.ini") << "[run]\nkind = count-asymptotics\npaths = 5\nn = 3\nmesh_steps = 64\n"
                                       "tolerance = 0.0000001\n[theta]\nstrategy = affine\nslope = 1\n";
  }
  const std::string out = " --out " + (dir / "o").string();
  EXPECT_EQ(cli("run --config " + (dir / "ok.ini").string() + out), 0);
  EXPECT_EQ(cli("run --config " + (dir / "bad.ini").string() + out), 2);
  EXPECT_EQ(cli("run --config " + (dir / "fail.ini").string() + out), 1);
  EXPECT_EQ(cli("run --config " + (dir / "missing.ini").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("run --config " + (dir / "ok.ini").string() + " --jobs 0" + out), 2);
}
