#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

using namespace uep;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
  io::json summary() const { return io::json::parse(out); }
};

CliResult uep_run(std::vector<std::string> args) {
  args.insert(args.begin(), "uep");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(::testing::TempDir()) / "uep_cli" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  // synth -> densify -> counts into `prefix`.
  void make_counts(const std::string& prefix, std::uint64_t seed, const std::string& jobs = "1") {
    ASSERT_EQ(uep_run({"synth", "--images", "6", "--points-range", "50,400", "--layout",
                       "clusters:3:12", "--width", "96", "--height", "80", "--seed",
                       std::to_string(seed), "--prefix", prefix, "--out", at(prefix + "_ann.json")})
                  .code,
              0);
    ASSERT_EQ(uep_run({"densify", "--annotations", at(prefix + "_ann.json"), "--sigma", "3",
                       "--out", at(prefix + "_density"), "--jobs", jobs})
                  .code,
              0);
    ASSERT_EQ(uep_run({"counts", "--density", at(prefix + "_density"), "--patch-size", "8", "--out",
                       at(prefix + "_counts"), "--jobs", jobs})
                  .code,
              0);
  }

  fs::path dir_;
};

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  }
  return files;
}

}  // namespace

TEST_F(Cli, ExitCodes) {
  make_counts("x", 1);
  EXPECT_EQ(
      uep_run({"partition", "--counts", at("x_counts"), "--m", "1", "--out", at("p.json")}).code,
      2);
  EXPECT_EQ(uep_run({"partition", "--counts", at("missing"), "--out", at("p.json")}).code, 1);
  EXPECT_EQ(
      uep_run({"partition", "--counts", at("x_counts"), "--m", "60000", "--out", at("p.json")})
          .code,
      3);
  EXPECT_EQ(uep_run({"partition", "--counts", at("x_counts"), "--strategy", "bogus", "--out",
                     at("p.json")})
                .code,
            2);
  EXPECT_EQ(uep_run({"bogus"}).code, 2);
  EXPECT_EQ(uep_run({"partition", "--out", at("p.json")}).code, 2);
  EXPECT_EQ(uep_run({"simulate", "--counts", at("x_counts"), "--partition", at("none.json"),
                     "--noise", "adjacent:2", "--out", at("s")})
                .code,
            2);
  EXPECT_EQ(uep_run({"--help"}).code, 0);

  io::write_text(at("v2.json"), R"({"format":"uep-partition/2"})");
  EXPECT_EQ(uep_run({"proxies", "--counts", at("x_counts"), "--partition", at("v2.json"), "--out",
                     at("d.json")})
                .code,
            1);
}

TEST_F(Cli, PipelineMatchesLibrary) {
  make_counts("x", 2);
  ASSERT_EQ(uep_run({"partition", "--counts", at("x_counts"), "--out", at("p.json")}).code, 0);
  ASSERT_EQ(uep_run({"proxies", "--counts", at("x_counts"), "--partition", at("p.json"), "--out",
                     at("d.json")})
                .code,
            0);
  ASSERT_EQ(uep_run({"quantize", "--counts", at("x_counts"), "--partition", at("p.json"), "--out",
                     at("cls")})
                .code,
            0);
  const CliResult analyze =
      uep_run({"analyze", "--counts", at("x_counts"), "--partition", at("p.json"), "--proxies",
               at("d.json"), "--out", at("report.json")});
  ASSERT_EQ(analyze.code, 0) << analyze.err;

  const auto anns = io::load_annotations(at("x_ann.json"));
  KernelSpec kernel;
  kernel.mode = FixedSigma{3.0};
  std::vector<LocalCountMap> maps;
  for (const auto& a : anns)
    maps.push_back(extract_local_counts(generate_density_map(a, kernel), 8));
  EXPECT_EQ(io::load_local_count_maps(at("x_counts")), maps);
  const CountCollection t = collect_counts(maps);
  const Partition p = partition_uep(t, 25, 1.6e-4).partition;
  EXPECT_EQ(io::partition_from_json(io::read_json(at("p.json"))), p);
  const ProxyTable d = compute_mcp(t, p);
  EXPECT_EQ(io::proxies_from_json(io::read_json(at("d.json"))), d);
  std::vector<ClassMap> classes;
  for (const auto& m : maps) classes.push_back(encode_class_map(m, p));
  EXPECT_EQ(io::load_class_maps(at("cls")), classes);
  EXPECT_EQ(io::error_report_from_json(io::read_json(at("report.json"))),
            discretization_error(maps, p, d));

  // MCP on its own fitting data: pooled discretization error vanishes.
  EXPECT_LE(std::abs(analyze.summary()["pooled_error"].get<double>()),
            1e-9 * static_cast<double>(t.size()));
}

TEST_F(Cli, CsvAnnotationsAndGrids) {
  ASSERT_EQ(uep_run({"synth", "--images", "2", "--points", "30", "--out", at("a.csv"), "--dims",
                     at("dims.csv")})
                .code,
            0);
  ASSERT_EQ(uep_run({"densify", "--annotations", at("a.csv"), "--dims", at("dims.csv"), "--csv",
                     "--out", at("dens")})
                .code,
            0);
  ASSERT_EQ(uep_run({"counts", "--density", at("dens"), "--csv", "--out", at("counts")}).code, 0);
  const auto maps = io::load_local_count_maps(at("counts"));
  ASSERT_EQ(maps.size(), 2u);
  EXPECT_NEAR(detail::map_total(maps[0]), 30.0, 1e-9);
  EXPECT_EQ(uep_run({"densify", "--annotations", at("a.csv"), "--out", at("d2")}).code, 2);
}

TEST_F(Cli, CompareOutputsRecomputeFromPerImageRows) {
  make_counts("train", 3);
  make_counts("eval", 4);
  const CliResult r =
      uep_run({"compare", "--train", at("train_counts"), "--eval", at("eval_counts"), "--m", "12",
               "--seeds", "3", "--noise", "adjacent:0.1", "--out", at("cmp")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto set = io::comparison_set_from_json(io::read_json(at("cmp/comparison.json")));
  ASSERT_EQ(set.size(), 3u);

  std::map<std::string, std::pair<double, int>> abs_err;  // seed/strategy/proxies -> sum, n
  std::istringstream in(io::read_text(at("cmp/per_image.csv")));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    auto& acc = abs_err[f[0] + "/" + f[1] + "/" + f[2]];
    acc.first += std::abs(std::stod(f[4]) - std::stod(f[5]));
    acc.second += 1;
  }
  for (const auto& cm : set) {
    for (const auto& c : cm.cells) {
      const auto& acc =
          abs_err.at(std::to_string(cm.seed) + "/" + std::string(to_string(c.strategy)) + "/" +
                     std::string(to_string(c.method)));
      EXPECT_NEAR(acc.first / acc.second, c.mae, 1e-9);
    }
  }
  ASSERT_EQ(uep_run({"report", "--in", at("cmp/comparison.json"), "--out", at("cmp.md")}).code, 0);
  EXPECT_NE(io::read_text(at("cmp.md")).find("| uep | mcp |"), std::string::npos);
}

TEST_F(Cli, IphAndSimulate) {
  make_counts("x", 5);
  ASSERT_EQ(
      uep_run({"partition", "--counts", at("x_counts"), "--m", "10", "--out", at("p.json")}).code,
      0);
  ASSERT_EQ(uep_run({"iph", "--counts", at("x_counts"), "--partition", at("p.json"), "--out",
                     at("iph.json")})
                .code,
            0);
  const IphPair pair = io::iph_from_json(io::read_json(at("iph.json")));
  EXPECT_EQ(pair.head1.partition.m(), 11u);
  const CliResult single =
      uep_run({"simulate", "--counts", at("x_counts"), "--partition", at("p.json"), "--noise",
               "adjacent:0", "--out", at("sim0"), "--plot-data", at("plot.csv")});
  ASSERT_EQ(single.code, 0) << single.err;
  const CliResult analyze = uep_run(
      {"analyze", "--counts", at("x_counts"), "--partition", at("p.json"), "--out", at("a.json")});
  EXPECT_DOUBLE_EQ(single.summary()["mae"].get<double>(),
                   analyze.summary()["discretization_error"].get<double>());
  const CliResult iph = uep_run({"simulate", "--counts", at("x_counts"), "--iph", at("iph.json"),
                                 "--noise", "adjacent:0.1", "--seed", "2", "--out", at("simi")});
  ASSERT_EQ(iph.code, 0) << iph.err;
  EXPECT_TRUE(iph.summary()["iph"].get<bool>());
  const CliResult ablation =
      uep_run({"compare", "--train", at("x_counts"), "--eval", at("x_counts"), "--iph", "--m", "10",
               "--seeds", "2", "--out", at("abl")});
  ASSERT_EQ(ablation.code, 0) << ablation.err;
  EXPECT_TRUE(fs::exists(at("abl/iph_ablation.json")));
}

TEST_F(Cli, RerunsAreBitIdenticalAcrossJobCounts) {
  std::map<std::string, std::string> first;
  for (const std::string jobs : {"1", "8"}) {
    const fs::path root = dir_ / ("run" + jobs);
    fs::create_directories(root);
    auto p = [&](const std::string& n) { return (root / n).string(); };
    auto ok = [](const CliResult& r) { ASSERT_EQ(r.code, 0) << r.err; };
    ok(uep_run({"synth", "--images", "8", "--points-range", "20,300", "--layout", "clusters:2:10",
                "--width", "64", "--height", "64", "--seed", "9", "--out", p("ann.json"), "--jobs",
                jobs}));
    ok(uep_run({"--jobs", jobs, "densify", "--annotations", p("ann.json"), "--adaptive", "3,0.3",
                "--out", p("dens")}));
    ok(uep_run({"counts", "--density", p("dens"), "--out", p("counts"), "--jobs", jobs}));
    ok(uep_run({"partition", "--counts", p("counts"), "--m", "8", "--out", p("p.json")}));
    ok(uep_run(
        {"proxies", "--counts", p("counts"), "--partition", p("p.json"), "--out", p("d.json")}));
    ok(uep_run(
        {"iph", "--counts", p("counts"), "--partition", p("p.json"), "--out", p("iph.json")}));
    ok(uep_run({"quantize", "--counts", p("counts"), "--partition", p("p.json"), "--out", p("cls"),
                "--decoded", p("dec"), "--jobs", jobs}));
    ok(uep_run({"analyze", "--counts", p("counts"), "--partition", p("p.json"), "--out",
                p("a.json"), "--csv", p("a.csv"), "--plot-data", p("plot.csv")}));
    ok(uep_run({"simulate", "--counts", p("counts"), "--partition", p("p.json"), "--seed", "4",
                "--out", p("sim"), "--predictions", p("pred"), "--jobs", jobs}));
    ok(uep_run({"compare", "--train", p("counts"), "--eval", p("counts"), "--m", "8", "--seeds",
                "4", "--out", p("cmp"), "--jobs", jobs}));
    ok(uep_run({"report", "--in", p("cmp/comparison.json"), "--out", p("cmp.md")}));
    const auto files = snapshot(root);
    if (first.empty()) {
      first = files;
    } else {
      EXPECT_EQ(files, first);
    }
  }
  EXPECT_GT(first.size(), 20u);
}
