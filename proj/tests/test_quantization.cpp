#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "uep/noise.hpp"
#include "uep/quantization.hpp"
#include "uep/synth.hpp"

using namespace uep;

namespace {

const Partition kP({0, 1e-4, 0.4, 3.2}, Strategy::explicit_borders);
const CountCollection kRaw({0.00005, 0.2, 0.2, 0.4, 0.8, 1.6, 3.2});

LocalCountMap row(std::string id, std::vector<double> v) {
  const std::size_t n = v.size();
  return {std::move(id), 8, Grid<double>(1, n, std::move(v))};
}

}  // namespace

TEST(Encode, Membership) {
  EncodeStats st;
  const ClassMap c = encode_class_map(row("a", {0.0, 0.00005, 0.2, 0.4, 3.2}), kP, &st);
  EXPECT_EQ(std::vector<std::uint16_t>(c.values.flat().begin(), c.values.flat().end()),
            (std::vector<std::uint16_t>{0, 0, 1, 2, 2}));
  EXPECT_EQ(st.clamped, 0u);
  EXPECT_EQ(c.m, 3u);
}

TEST(Encode, ClampsAboveTopBorder) {
  EncodeStats st;
  const ClassMap c = encode_class_map(row("a", {4.0}), kP, &st);
  EXPECT_EQ(c.values.flat()[0], 2);
  EXPECT_EQ(st.clamped, 1u);
}

TEST(Encode, RejectsNegativeAndNaN) {
  EXPECT_THROW(encode_class_map(row("a", {1.0, -0.5}), kP), DataError);
  EXPECT_THROW(encode_class_map(row("a", {std::nan("")}), kP), DataError);
}

TEST(Decode, TableLookup) {
  const ProxyTable d = compute_mcp(kRaw, kP);
  const LocalCountMap bg = decode_count_map(encode_class_map(row("z", {0, 0, 0}), kP), d);
  for (double v : bg.values.flat()) EXPECT_EQ(v, d.proxies[0]);
  const LocalCountMap r =
      decode_count_map(encode_class_map(row("f", {0.00005, 0.2, 0.4, 3.2}), kP), d, 8);
  EXPECT_EQ(std::vector<double>(r.values.flat().begin(), r.values.flat().end()),
            (std::vector<double>{d.proxies[0], d.proxies[1], d.proxies[2], d.proxies[2]}));
  EXPECT_DOUBLE_EQ(r.values.flat()[2], 1.5);
  EXPECT_EQ(r.patch_size, 8);
}

TEST(Decode, RejectsOutOfRangeClass) {
  ClassMap c{"x", 5, Grid<std::uint16_t>(1, 2, std::vector<std::uint16_t>{1, 4})};
  EXPECT_THROW(decode_count_map(c, compute_mcp(kRaw, kP)), DataError);
}

TEST(Decode, McpRoundTripPreservesTotal) {
  const auto maps = synth_lognormal_maps(5, 40, 40, -1.0, 1.2, 0.3, 2);
  const CountCollection t = collect_counts(maps);
  const Partition p = partition_uep(t, 25, 1.6e-4).partition;
  const ProxyTable d = compute_mcp(t, p);
  CompensatedSum truth, decoded;
  for (const auto& m : maps) {
    truth.add(detail::map_total(m));
    decoded.add(detail::map_total(decode_count_map(encode_class_map(m, p), d)));
  }
  EXPECT_NEAR(decoded.value(), truth.value(), 1e-9 * static_cast<double>(t.size()));
}

TEST(DecodeIph, Averages) {
  const Partition p0 = Partition({0, 1e-4, 0.4, 1.6, 3.2}, Strategy::explicit_borders);
  const IphPair pair = derive_iph(kRaw, Head{p0, compute_mcp(kRaw, p0)});
  ClassMap c0{"a", 4, Grid<std::uint16_t>(1, 2, std::vector<std::uint16_t>{0, 2})};
  ClassMap c1{"a", 5, Grid<std::uint16_t>(1, 2, std::vector<std::uint16_t>{0, 3})};
  const LocalCountMap out = decode_iph(c0, c1, pair);
  EXPECT_DOUBLE_EQ(out.values.flat()[0],
                   (pair.head0.proxies.proxies[0] + pair.head1.proxies.proxies[0]) / 2);
  EXPECT_DOUBLE_EQ(out.values.flat()[1], (0.6 + 1.2) / 2);
  ClassMap wide{"a", 5, Grid<std::uint16_t>(1, 3, 0)};
  EXPECT_THROW(decode_iph(c0, wide, pair), DataError);
}

TEST(DecodeIph, PerfectHeadsPreserveTotals) {
  const auto maps = synth_lognormal_maps(4, 30, 30, -1.0, 1.0, 0.3, 6);
  const CountCollection t = collect_counts(maps);
  const Partition p0 = partition_uep(t, 25, 1.6e-4).partition;
  const IphPair pair = derive_iph(t, Head{p0, compute_mcp(t, p0)});
  CompensatedSum truth, decoded;
  for (const auto& m : maps) {
    truth.add(detail::map_total(m));
    const auto out = decode_iph(encode_class_map(m, pair.head0.partition),
                                encode_class_map(m, pair.head1.partition), pair);
    decoded.add(detail::map_total(out));
  }
  EXPECT_NEAR(decoded.value(), truth.value(), 1e-9 * static_cast<double>(t.size()));
}

TEST(Discretization, MidpointFixture) {
  const std::vector<LocalCountMap> one{row("fixture", {0.00005, 0.2, 0.2, 0.4, 0.8, 1.6, 3.2})};
  const ErrorReport r = discretization_error(one, kP, compute_midpoint_proxies(kP));
  EXPECT_NEAR(r.mae, 1.2001, 1e-12);
  EXPECT_NEAR(r.intervals[0].discretization_signed, 0.0, 1e-18);
  EXPECT_NEAR(r.intervals[1].discretization_signed, -0.0001, 1e-12);
  EXPECT_NEAR(r.intervals[2].discretization_signed, -1.2, 1e-12);
}

TEST(Discretization, McpPooledIsZeroOnFittingData) {
  const auto maps = synth_lognormal_maps(10, 32, 32, -1.0, 1.0, 0.4, 1);
  const CountCollection t = collect_counts(maps);
  const Partition p = partition_uep(t, 25, 1.6e-4).partition;
  const ErrorReport r = discretization_error(maps, p, compute_mcp(t, p));
  EXPECT_LE(r.pooled_abs, 1e-9 * static_cast<double>(t.size()));
  for (const auto& ie : r.intervals) {
    EXPECT_LE(std::abs(ie.discretization_signed), 1e-9 * static_cast<double>(t.size()));
    EXPECT_LE(std::abs(ie.signed_sum), 1e-9 * static_cast<double>(t.size()));
  }
}

TEST(Discretization, McpBeatsMidpointOnHeldOutSplit) {
  const auto train = synth_lognormal_maps(20, 32, 32, -1.0, 1.0, 0.4, 10, "train");
  const auto eval = synth_lognormal_maps(20, 32, 32, -1.0, 1.0, 0.4, 20, "eval");
  const CountCollection t = collect_counts(train);
  const Partition p = partition_uep(t, 25, 1.6e-4).partition;
  EXPECT_LT(discretization_error(eval, p, compute_mcp(t, p)).mae,
            discretization_error(eval, p, compute_midpoint_proxies(p)).mae);
}

TEST(Discretization, EmptySetIsAnError) {
  EXPECT_THROW(discretization_error(std::vector<LocalCountMap>{}, kP, compute_midpoint_proxies(kP)),
               DataError);
}

TEST(ErrorDecomposition, SingleMisclassifiedCell) {
  const ProxyTable d = compute_mcp(kRaw, kP);
  const LocalCountMap truth = row("a", {0.2, 0.2, 0.8});
  ClassMap pred = encode_class_map(truth, kP);
  pred.values.flat()[0] = 2;  // interval 1 -> 2
  const std::vector<ClassMap> preds{pred};
  const std::vector<LocalCountMap> truths{truth};
  const ErrorReport r = error_decomposition(preds, truths, kP, d);
  EXPECT_DOUBLE_EQ(r.intervals[1].misclass_signed, d.proxies[2] - d.proxies[1]);
  EXPECT_EQ(r.intervals[2].misclass_signed, 0.0);
  // Decomposition: truth - prediction = discretization - misclassification.
  for (const auto& ie : r.intervals) {
    EXPECT_NEAR(ie.signed_sum, ie.discretization_signed - ie.misclass_signed, 1e-12);
  }
}

TEST(ErrorDecomposition, ShapeAndIdMismatch) {
  const ProxyTable d = compute_mcp(kRaw, kP);
  const std::vector<LocalCountMap> a{row("a", {1, 2})}, b{row("a", {1, 2, 3})}, c{row("c", {1, 2})};
  EXPECT_THROW(error_decomposition(std::span<const LocalCountMap>(a), b, kP, d), DataError);
  EXPECT_THROW(error_decomposition(std::span<const LocalCountMap>(a), c, kP, d), DataError);
}

TEST(ErrorDecomposition, ReportAggregatesMatchImages) {
  const auto maps = synth_lognormal_maps(8, 20, 20, -1.0, 1.0, 0.3, 4);
  const CountCollection t = collect_counts(maps);
  const Partition p = partition_uep(t, 10, 1.6e-4).partition;
  const ProxyTable d = compute_mcp(t, p);
  std::vector<LocalCountMap> pred;
  const NoiseModel noise{AdjacentFlip{0.2}, 3};
  for (const auto& m : maps) {
    pred.push_back(decode_count_map(simulate_classifier(encode_class_map(m, p), noise), d, 8));
  }
  const ErrorReport r = error_decomposition(std::span<const LocalCountMap>(pred), maps, p, d);
  double abs_sum = 0.0, signed_sum = 0.0, interval_signed = 0.0;
  for (const auto& im : r.images) {
    abs_sum += im.abs_error;
    signed_sum += im.signed_diff;
  }
  for (const auto& ie : r.intervals) interval_signed += ie.signed_sum;
  EXPECT_NEAR(r.mae, abs_sum / 8, 1e-9);
  EXPECT_NEAR(r.total_signed, signed_sum, 1e-9);
  EXPECT_NEAR(interval_signed, signed_sum, 1e-9);
  EXPECT_GE(r.mse, r.mae);
}
