#include <gtest/gtest.h>

#include <set>

#include "sparity/parity_data.hpp"
#include "sparity/rng.hpp"

using namespace sparity;

TEST(Rng, EngineMatchesStandardCheckValue) {
  std::mt19937_64 engine;
  engine.discard(9999);
  EXPECT_EQ(engine(), 9981545732273789042ULL);
}

TEST(Rng, SeedDerivationIsFrozen) {
  EXPECT_EQ(splitmix64(0), 16294208416658607535ULL);
  EXPECT_EQ(derive_seed(0, StreamDomain::init, 0), 18107481136802472779ULL);
  EXPECT_EQ(derive_seed(7, StreamDomain::batch, 3), 16822671678307532864ULL);
}

TEST(Rng, DomainsSeparateStreams) {
  std::set<std::uint64_t> seen;
  for (auto dom : {StreamDomain::run, StreamDomain::init, StreamDomain::batch,
                   StreamDomain::evaluation, StreamDomain::probe})
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(1, dom, i));
  EXPECT_EQ(seen.size(), 250U);
}

TEST(Rng, UniformInUnitInterval) {
  SignStream s(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.next_uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(ParityTask, CanonicalSupport) {
  const auto t = ParityTask::canonical(8, 3);
  EXPECT_EQ(t.dim(), 8);
  EXPECT_EQ(t.sparsity(), 3);
  EXPECT_EQ(t.support(), (std::vector<int>{0, 1, 2}));
  EXPECT_TRUE(t.is_feature(2));
  EXPECT_FALSE(t.is_feature(3));
}

TEST(ParityTask, RejectsBadSupport) {
  EXPECT_THROW(ParityTask(4, {0, 0}), RangeError);
  EXPECT_THROW(ParityTask(4, {4}), RangeError);
  EXPECT_THROW(ParityTask(4, {-1}), RangeError);
  EXPECT_THROW(ParityTask(4, {}), RangeError);
  EXPECT_THROW(ParityTask::canonical(3, 4), RangeError);
}

TEST(Label, ProductOverSupport) {
  const ParityTask t(4, {1, 3});
  const std::vector<double> x{1, -1, 1, 1};
  EXPECT_EQ(label(t, x), -1.0);
  const std::vector<double> z{-1, -1, -1, -1};
  EXPECT_EQ(label(t, z), 1.0);
}

TEST(Label, FullSupportIsProductOfAll) {
  const auto t = ParityTask::canonical(3, 3);
  const std::vector<double> x{-1, -1, -1};
  EXPECT_EQ(label(t, x), -1.0);
}

TEST(Label, RejectsShapeAndValues) {
  const auto t = ParityTask::canonical(3, 2);
  const std::vector<double> short_x{1, 1};
  EXPECT_THROW(label(t, short_x), DimensionError);
  const std::vector<double> bad{1, 0.5, 1};
  EXPECT_THROW(label(t, bad), RangeError);
}

TEST(SampleBatch, ShapesAndLabels) {
  const auto t = ParityTask::canonical(6, 2);
  SignStream s(11);
  const Batch b = sample_batch(t, 100, s);
  ASSERT_EQ(b.size(), 100U);
  ASSERT_EQ(b.x.size(), 600U);
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(b.y[i], label(t, b.input(i)));
    for (double v : b.input(i)) EXPECT_TRUE(v == 1.0 || v == -1.0);
  }
  SignStream empty(1);
  EXPECT_THROW(sample_batch(t, 0, empty), RangeError);
}

TEST(SampleBatch, SameSeedSameBatch) {
  const auto t = ParityTask::canonical(5, 3);
  SignStream a(9), b(9);
  EXPECT_EQ(sample_batch(t, 32, a).x, sample_batch(t, 32, b).x);
}

TEST(SampleBatch, LabelsBalanced) {
  const auto t = ParityTask::canonical(10, 3);
  SignStream s(5);
  const Batch b = sample_batch(t, 20000, s);
  double sum = 0.0;
  for (double y : b.y) sum += y;
  EXPECT_LT(std::abs(sum / 20000.0), 0.03);
}

TEST(Hypercube, LexicographicOrder) {
  std::vector<double> x(3);
  hypercube_point(0, 3, x);
  EXPECT_EQ(x, (std::vector<double>{1, 1, 1}));
  hypercube_point(1, 3, x);
  EXPECT_EQ(x, (std::vector<double>{1, 1, -1}));
  hypercube_point(4, 3, x);
  EXPECT_EQ(x, (std::vector<double>{-1, 1, 1}));
  hypercube_point(7, 3, x);
  EXPECT_EQ(x, (std::vector<double>{-1, -1, -1}));
}

TEST(Hypercube, EnumerateAllBalanced) {
  const auto t = ParityTask::canonical(8, 2);
  const auto all = enumerate_all(t);
  ASSERT_EQ(all.size(), 256U);
  int pos = 0;
  std::set<std::vector<double>> distinct;
  for (const auto& s : all) {
    pos += s.y > 0;
    distinct.insert(s.x);
  }
  EXPECT_EQ(pos, 128);
  EXPECT_EQ(distinct.size(), 256U);
}

TEST(Hypercube, BatchMatchesSamples) {
  const auto t = ParityTask::canonical(4, 2);
  const auto all = enumerate_all(t);
  const Batch b = enumerate_batch(t);
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(b.sample(i).x, all[i].x);
    EXPECT_EQ(b.y[i], all[i].y);
  }
}

TEST(Hypercube, ForEachPointReversed) {
  const auto t = ParityTask::canonical(3, 1);
  std::vector<std::uint64_t> order;
  for_each_point(t, [&](std::uint64_t i, auto, double) { order.push_back(i); }, true);
  EXPECT_EQ(order, (std::vector<std::uint64_t>{7, 6, 5, 4, 3, 2, 1, 0}));
}

TEST(Hypercube, RefusesHugeDimension) {
  EXPECT_THROW(require_enumerable(kMaxEnumerationDim + 1), RangeError);
  EXPECT_NO_THROW(require_enumerable(kMaxEnumerationDim));
}

TEST(SampleBatch, MillionSampleBalance) {
  const auto t = ParityTask::canonical(8, 3);
  SignStream s(2024);
  const Batch b = sample_batch(t, 1000000, s);
  std::vector<double> mean(8, 0.0);
  std::size_t positive = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto x = b.input(i);
    for (int j = 0; j < 8; ++j) mean[j] += x[j];
    positive += b.y[i] > 0;
  }
  for (double m : mean) EXPECT_LE(std::abs(m / 1e6), 0.01);
  EXPECT_GE(positive / 1e6, 0.497);
  EXPECT_LE(positive / 1e6, 0.503);
}

TEST(Label, AllOnesIsPositive) {
  const ParityTask t(6, {5, 0, 3});
  EXPECT_EQ(label(t, std::vector<double>(6, 1.0)), 1.0);
}

TEST(Hypercube, SmallestCases) {
  const auto one = enumerate_all(ParityTask::canonical(1, 1));
  ASSERT_EQ(one.size(), 2U);
  EXPECT_EQ(one[0].x, std::vector<double>{1});
  EXPECT_EQ(one[0].y, 1.0);
  EXPECT_EQ(one[1].x, std::vector<double>{-1});
  EXPECT_EQ(one[1].y, -1.0);
  int pos = 0;
  for (const auto& s : enumerate_all(ParityTask::canonical(3, 2))) pos += s.y > 0;
  EXPECT_EQ(pos, 4);
}
