#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "uep/noise.hpp"
#include "uep/synth.hpp"

using namespace uep;

namespace {

ClassMap uniform_classes(std::size_t rows, std::size_t cols, std::size_t m, std::uint64_t seed) {
  ClassMap c{"cells", m, Grid<std::uint16_t>(rows, cols, 0)};
  rng::Stream s(seed, 0);
  for (auto& v : c.values.flat()) v = static_cast<std::uint16_t>(s.below(m));
  return c;
}

LocalCountMap total_map(std::string id, double total) {
  return {std::move(id), 8, Grid<double>(1, 1, total)};
}

}  // namespace

TEST(ParseNoise, RoundTrip) {
  const NoiseModel a = parse_noise("adjacent:0.1", 4);
  EXPECT_DOUBLE_EQ(a.p(), 0.1);
  EXPECT_EQ(a.seed, 4u);
  EXPECT_EQ(format_noise(a), "adjacent:0.1");
  const NoiseModel g = parse_noise("geometric:0.2:0.5");
  EXPECT_EQ(format_noise(g), "geometric:0.2:0.5");
  EXPECT_THROW(parse_noise("adjacent:1.5"), ParameterError);
  EXPECT_THROW(parse_noise("adjacent"), ParameterError);
  EXPECT_THROW(parse_noise("gaussian:0.1"), ParameterError);
  EXPECT_THROW(parse_noise("geometric:0.1:1.0"), ParameterError);
}

TEST(Simulate, ZeroNoiseIsIdentity) {
  const ClassMap c = uniform_classes(50, 50, 25, 1);
  EXPECT_EQ(simulate_classifier(c, NoiseModel{AdjacentFlip{0.0}, 9}), c);
  EXPECT_EQ(simulate_classifier(c, NoiseModel{GeometricHop{0.0, 0.5}, 9}), c);
}

TEST(Simulate, DeterministicPerSeedAndSalt) {
  const ClassMap c = uniform_classes(40, 40, 25, 2);
  const NoiseModel n{AdjacentFlip{0.3}, 5};
  EXPECT_EQ(simulate_classifier(c, n), simulate_classifier(c, n));
  EXPECT_NE(simulate_classifier(c, n, 0), simulate_classifier(c, n, 1));
  EXPECT_NE(simulate_classifier(c, n), simulate_classifier(c, NoiseModel{AdjacentFlip{0.3}, 6}));
}

TEST(Simulate, AdjacentFlipFractionAndStep) {
  const ClassMap c = uniform_classes(1000, 1000, 25, 3);
  const ClassMap out = simulate_classifier(c, NoiseModel{AdjacentFlip{0.1}, 11});
  std::size_t flipped = 0;
  for (std::size_t k = 0; k < c.values.size(); ++k) {
    const int a = c.values.flat()[k], b = out.values.flat()[k];
    if (a != b) {
      ++flipped;
      ASSERT_EQ(std::abs(a - b), 1);
    }
  }
  // 99% binomial interval around 0.1 for 10^6 cells is +/- 0.00077.
  const double frac = static_cast<double>(flipped) / static_cast<double>(c.values.size());
  EXPECT_GE(frac, 0.099);
  EXPECT_LE(frac, 0.101);
}

TEST(Simulate, BoundaryClassesMoveInward) {
  ClassMap c{"edge", 4, Grid<std::uint16_t>(100, 100, 0)};
  for (std::size_t k = 0; k < c.values.size(); k += 2) c.values.flat()[k] = 3;
  const ClassMap out = simulate_classifier(c, NoiseModel{AdjacentFlip{1.0}, 1});
  for (std::size_t k = 0; k < c.values.size(); ++k) {
    EXPECT_EQ(out.values.flat()[k], c.values.flat()[k] == 0 ? 1 : 2);
  }
}

TEST(Simulate, GeometricHopsStayInRange) {
  const ClassMap c = uniform_classes(200, 200, 25, 4);
  const ClassMap out = simulate_classifier(c, NoiseModel{GeometricHop{0.5, 0.5}, 2});
  std::size_t long_hops = 0;
  for (std::size_t k = 0; k < c.values.size(); ++k) {
    EXPECT_LT(out.values.flat()[k], 25);
    if (std::abs(out.values.flat()[k] - c.values.flat()[k]) > 1) ++long_hops;
  }
  EXPECT_GT(long_hops, 0u);
}

TEST(EvaluateCounts, Examples) {
  const std::vector<LocalCountMap> truth{total_map("a", 10), total_map("b", 10)};
  EXPECT_EQ(evaluate_counts(truth, truth).mae, 0.0);
  EXPECT_EQ(evaluate_counts(truth, truth).mse, 0.0);
  const std::vector<LocalCountMap> pred{total_map("a", 7), total_map("b", 14)};
  const CountMetrics m = evaluate_counts(pred, truth);
  EXPECT_DOUBLE_EQ(m.mae, 3.5);
  EXPECT_DOUBLE_EQ(m.mse, std::sqrt(12.5));
  EXPECT_THROW(evaluate_counts(std::vector<LocalCountMap>{}, std::vector<LocalCountMap>{}),
               DataError);
}

TEST(EvaluateCounts, RmsNeverBelowMae) {
  rng::Stream s(1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LocalCountMap> truth, pred;
    for (int i = 0; i < 5; ++i) {
      truth.push_back(total_map(std::to_string(i), 50.0));
      pred.push_back(total_map(std::to_string(i), 50.0 + 10.0 * s.normal()));
    }
    const CountMetrics m = evaluate_counts(pred, truth);
    EXPECT_GE(m.mse, m.mae);
  }
}

class Comparison : public ::testing::Test {
 protected:
  void SetUp() override {
    train_ = collect_counts(synth_lognormal_maps(10, 24, 24, -1.0, 1.0, 0.3, 1, "train"));
    eval_ = synth_lognormal_maps(6, 24, 24, -1.0, 1.0, 0.3, 2, "eval");
  }
  CountCollection train_;
  std::vector<LocalCountMap> eval_;
  const std::vector<Strategy> strategies_{Strategy::uep, Strategy::uniform_num,
                                          Strategy::uniform_len};
  const std::vector<ProxyMethod> methods_{ProxyMethod::mcp, ProxyMethod::midpoint};
};

TEST_F(Comparison, ZeroNoiseMaeIsDiscretization) {
  const auto cm = compare_strategies(train_, eval_, {}, NoiseModel{AdjacentFlip{0.0}, 0},
                                     strategies_, methods_);
  ASSERT_EQ(cm.cells.size(), 6u);
  for (const auto& cell : cm.cells) {
    ASSERT_TRUE(cell.feasible);
    for (const auto& im : cell.images) {
      EXPECT_NEAR(std::abs(im.truth - im.predicted), im.discretization, 1e-9);
    }
    EXPECT_NEAR(cell.mae, cell.discretization, 1e-9);
  }
}

TEST_F(Comparison, SingleCellEqualsManualPipeline) {
  const NoiseModel noise{AdjacentFlip{0.1}, 7};
  const std::vector<Strategy> s{Strategy::uep};
  const std::vector<ProxyMethod> pm{ProxyMethod::mcp};
  const auto cm = compare_strategies(train_, eval_, {}, noise, s, pm);
  ASSERT_EQ(cm.cells.size(), 1u);

  const Partition p = partition_uep(train_, 25, 1.6e-4).partition;
  const ProxyTable d = compute_mcp(train_, p);
  std::vector<LocalCountMap> pred;
  for (const auto& lc : eval_) {
    pred.push_back(decode_count_map(simulate_classifier(encode_class_map(lc, p), noise), d, 8));
  }
  const CountMetrics m = evaluate_counts(pred, eval_);
  EXPECT_NEAR(cm.cells[0].mae, m.mae, 1e-9);
  EXPECT_NEAR(cm.cells[0].mse, m.mse, 1e-9);
}

TEST_F(Comparison, InfeasibleStrategyMarkedAndRunContinues) {
  const PartitionConfig cfg{5000, 1.6e-4, std::nullopt};
  const auto cm = compare_strategies(train_, eval_, cfg, NoiseModel{AdjacentFlip{0.1}, 1},
                                     strategies_, methods_);
  EXPECT_FALSE(cm.find(Strategy::uep, ProxyMethod::mcp)->feasible);
  EXPECT_FALSE(cm.find(Strategy::uep, ProxyMethod::mcp)->error.empty());
  EXPECT_TRUE(cm.find(Strategy::uniform_len, ProxyMethod::mcp)->feasible);
}

TEST_F(Comparison, IphZeroNoiseAndDegenerateCase) {
  const auto zero = iph_ablation(train_, eval_, {}, NoiseModel{AdjacentFlip{0.0}, 0});
  EXPECT_EQ(zero.both_correct, 1.0);

  const NoiseModel noise{AdjacentFlip{0.1}, 3};
  const auto pph = iph_ablation(train_, eval_, {}, noise, {false, true});
  EXPECT_EQ(pph.iph_mae, pph.single_mae);
  EXPECT_EQ(pph.iph_mse, pph.single_mse);
  EXPECT_EQ(pph.head0_only + pph.head1_only, 0.0);

  const auto iph = iph_ablation(train_, eval_, {}, noise);
  EXPECT_EQ(iph.single_mae, pph.single_mae);
  EXPECT_NEAR(iph.both_correct + iph.head0_only + iph.head1_only + iph.neither, 1.0, 1e-12);
}
