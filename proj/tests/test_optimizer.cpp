#include <gtest/gtest.h>

#include <cmath>

#include "sparity/optimizer.hpp"
#include "sparity/oracle.hpp"

using namespace sparity;

namespace {

// Rational-valued network whose enumeration averages were evaluated
// independently in exact arithmetic.
Network fixture_net() {
  return Network(2, 4, 3, {0.5, -0.75, 0.125, 2, -1, 0.25, 1.5, -0.5}, {1, -1});
}

const ParityTask kFixtureTask(4, {0, 1, 3});

}  // namespace

TEST(TildeSign, DeadZone) {
  EXPECT_EQ(tilde_sign(0.3, 0.3), 1);
  EXPECT_EQ(tilde_sign(-0.3, 0.3), -1);
  EXPECT_EQ(tilde_sign(0.2999, 0.3), 0);
  EXPECT_EQ(tilde_sign(0.0, 0.3), 0);
  EXPECT_EQ(tilde_sign(5.0, 1.0), 1);
  EXPECT_THROW(tilde_sign(NAN, 0.3), NonFiniteError);
  EXPECT_THROW(tilde_sign(1.0, 0.0), RangeError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.eta = -1;
  EXPECT_THROW(c.validate(), RangeError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), RangeError);
  c = {};
  c.lambda = 20;
  EXPECT_THROW(c.validate(), RangeError);
}

TEST(Enums, RoundTrip) {
  EXPECT_EQ(parse_train_mode("population"), TrainMode::population);
  EXPECT_EQ(parse_second_layer_statistic("without_label"), SecondLayerStatistic::without_label);
  EXPECT_THROW(parse_train_mode("full"), RangeError);
}

TEST(Moments, HypercubeMoments) {
  const std::vector<double> w{1, 2, 3};
  EXPECT_DOUBLE_EQ(hypercube_moment(w, 1), 0.0);
  EXPECT_DOUBLE_EQ(hypercube_moment(w, 2), 14.0);
  EXPECT_DOUBLE_EQ(hypercube_moment(w, 3), 0.0);
  EXPECT_DOUBLE_EQ(hypercube_moment(w, 4), 392.0);
}

TEST(PopulationGradient, FrozenFixture) {
  const auto g = population_gradient(fixture_net(), kFixtureTask);
  EXPECT_EQ(g.first, (std::vector<double>{-9, 6, 0, -2.25, 0.75, -3, 0, 1.5}));
}

TEST(PopulationGradient, MatchesEnumerationOnFixture) {
  const auto g = exact_gradient(fixture_net(), kFixtureTask);
  EXPECT_EQ(g.first, (std::vector<double>{-9, 6, 0, -2.25, 0.75, -3, 0, 1.5}));
}

TEST(PopulationGradient, BinaryWeightsTwoSparse) {
  // k = 2: g_r1 = 2 a_r w_r2, g_r2 = 2 a_r w_r1, zero elsewhere.
  const Network net(1, 4, 2, {1, -1, 1, 1}, {-1});
  const auto g = population_gradient(net, ParityTask::canonical(4, 2));
  EXPECT_EQ(g.first, (std::vector<double>{2, -2, 0, 0}));
}

TEST(PopulationGradient, SecondLayerStatistics) {
  const Network net = fixture_net();
  const auto with = population_gradient(net, kFixtureTask, true, SecondLayerStatistic::with_label);
  EXPECT_DOUBLE_EQ(with.second[0], 6 * 0.5 * -0.75 * 2);
  const auto without =
      population_gradient(net, kFixtureTask, true, SecondLayerStatistic::without_label);
  EXPECT_DOUBLE_EQ(without.second[0], 0.0);  // odd moment of a symmetric sum
  const Batch all = enumerate_batch(kFixtureTask);
  const auto batch = batch_gradient(net, all, true, SecondLayerStatistic::with_label);
  EXPECT_NEAR(batch.second[0], with.second[0], 1e-12);
  EXPECT_NEAR(batch.second[1], with.second[1], 1e-12);
}

TEST(BatchGradient, FullHypercubeEqualsPopulation) {
  const ParityTask t = ParityTask::canonical(6, 2);
  const Network net = init_uniform(4, 6, 2, 8);
  const auto pop = population_gradient(net, t);
  const auto batch = batch_gradient(net, enumerate_batch(t));
  for (std::size_t i = 0; i < pop.first.size(); ++i)
    EXPECT_NEAR(batch.first[i], pop.first[i], 1e-12);
}

TEST(BatchGradient, SingleSampleHandComputed) {
  // k = 2, w = (1, 1), a = 1, x = (1, -1), y = -1: <w,x> = 0 -> zero gradient.
  const Network net(1, 2, 2, {1, 1}, {1});
  Batch b{2, {1, -1}, {-1}};
  EXPECT_EQ(batch_gradient(net, b).first, (std::vector<double>{0, 0}));
  // x = (1, 1), y = 1: 2 * 2 * 1 * 1 * x_j = 4.
  Batch c{2, {1, 1}, {1}};
  EXPECT_EQ(batch_gradient(net, c).first, (std::vector<double>{4, 4}));
}

TEST(SgdStep, DecayPlusSign) {
  const Network net(1, 3, 2, {1, -1, 0.5}, {1});
  GradientEstimate g{1, 3, {2, -0.1, -5}, {}};
  TrainConfig cfg;
  const Network next = sgd_step(net, g, cfg);
  EXPECT_DOUBLE_EQ(next.weight(0, 0), 0.9 + 0.1);
  EXPECT_DOUBLE_EQ(next.weight(0, 1), -0.9);
  EXPECT_DOUBLE_EQ(next.weight(0, 2), 0.45 - 0.1);
  EXPECT_EQ(next.output_weight(0), 1.0);
}

TEST(SgdStep, SecondLayerMovesByEta2) {
  const Network net(2, 2, 2, {1, 1, 1, -1}, {1, -1});
  GradientEstimate g{2, 2, {0, 0, 0, 0}, {1.0, 0.1}};
  TrainConfig cfg;
  cfg.eta2 = 0.01;
  const Network next = sgd_step(net, g, cfg);
  EXPECT_EQ(next.mode(), SecondLayerMode::trainable);
  EXPECT_DOUBLE_EQ(next.output_weight(0), 1.01);
  EXPECT_DOUBLE_EQ(next.output_weight(1), -1.0);
}

TEST(SgdStep, ShapeMismatch) {
  const Network net(1, 2, 2, {1, 1}, {1});
  GradientEstimate g{1, 3, {0, 0, 0}, {}};
  EXPECT_THROW(sgd_step(net, g, TrainConfig{}), DimensionError);
}

TEST(Training, PopulationNoiseDecaysGeometrically) {
  const ParityTask t = ParityTask::canonical(8, 2);
  const Network net0 = init_binary(12, 8, 2, 4);
  TrainConfig cfg;
  const Network out = run_training(t, net0, cfg, TrainMode::population);
  double factor = 1.0;
  for (int i = 0; i < 25; ++i) factor *= 0.9;
  for (int r = 0; r < 12; ++r)
    for (int j = 2; j < 8; ++j) EXPECT_EQ(out.weight(r, j), factor * net0.weight(r, j));
}

TEST(Training, Deterministic) {
  const ParityTask t = ParityTask::canonical(8, 2);
  const Network net0 = init_binary(12, 8, 2, 4);
  TrainConfig cfg;
  cfg.seed = 99;
  EXPECT_EQ(train(t, net0, cfg).network, train(t, net0, cfg).network);
  TrainConfig other = cfg;
  other.seed = 100;
  EXPECT_NE(run_training(t, net0, cfg), run_training(t, net0, other));
}

TEST(Training, ZeroIterationsIsIdentity) {
  const ParityTask t = ParityTask::canonical(8, 2);
  const Network net0 = init_binary(12, 8, 2, 4);
  TrainConfig cfg;
  cfg.iterations = 0;
  const auto out = train(t, net0, cfg);
  EXPECT_EQ(out.network, net0);
  EXPECT_EQ(out.summary.samples_consumed, 0U);
}

TEST(Training, SamplesConsumedIsBT) {
  const ParityTask t = ParityTask::canonical(8, 2);
  TrainConfig cfg;
  const auto out = train(t, init_binary(12, 8, 2, 1), cfg);
  EXPECT_EQ(out.summary.samples_consumed, 64U * 25U);
  EXPECT_DOUBLE_EQ(out.summary.margin_threshold, 0.25 * 2 * 12);
  EXPECT_EQ(out.summary.neurons.good + out.summary.neurons.bad, 12);
}

TEST(Training, ObserverSeesEveryStep) {
  struct Counter : StepObserver {
    int calls = 0, nulls = 0;
    void observe(int, const Network&, const GradientEstimate* g) override {
      ++calls;
      nulls += g == nullptr;
    }
  } counter;
  TrainConfig cfg;
  cfg.iterations = 7;
  run_training(ParityTask::canonical(8, 2), init_binary(4, 8, 2, 1), cfg,
               TrainMode::stochastic, &counter);
  EXPECT_EQ(counter.calls, 8);
  EXPECT_EQ(counter.nulls, 1);
}

TEST(Training, LearnsTwoSparseParity) {
  const ParityTask t = ParityTask::canonical(8, 2);
  TrainConfig cfg;
  cfg.seed = 3;
  const auto out = train(t, init_binary(12, 8, 2, 17), cfg);
  EXPECT_GE(out.summary.test_accuracy, 0.99);
}

TEST(Condition, ShippedConfigWarns) {
  TrainConfig cfg;
  const auto warnings = validate_condition(ParityTask::canonical(8, 2), 12, cfg);
  EXPECT_FALSE(warnings.empty());
  bool threshold = false;
  for (const auto& w : warnings) threshold = threshold || w.rfind("threshold", 0) == 0;
  EXPECT_TRUE(threshold);
}

TEST(Factorial, SmallValues) {
  EXPECT_EQ(factorial(0), 1.0);
  EXPECT_EQ(factorial(4), 24.0);
  EXPECT_EQ(factorial(10), 3628800.0);
}

TEST(BatchGradient, LinearActivationSingleSample) {
  const Network net(2, 3, 1, {0.3, -2, 5, 1, 1, 1}, {1, -1});
  Batch b{3, {1, -1, 1}, {-1}};
  EXPECT_EQ(batch_gradient(net, b).first, (std::vector<double>{-1, 1, -1, 1, -1, 1}));
}

TEST(BatchGradient, DuplicatedBatchUnchanged) {
  const ParityTask t = ParityTask::canonical(8, 3);
  const Network net = init_binary(6, 8, 3, 2);
  SignStream s(8);
  const Batch b = sample_batch(t, 50, s);
  Batch twice = b;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto x = b.input(i);
    twice.x.insert(twice.x.end(), x.begin(), x.end());
    twice.y.push_back(b.y[i]);
  }
  const auto g1 = batch_gradient(net, b), g2 = batch_gradient(net, twice);
  for (std::size_t i = 0; i < g1.first.size(); ++i) EXPECT_NEAR(g1.first[i], g2.first[i], 1e-12);
}

TEST(PopulationGradient, AllOnesTwoSparse) {
  const Network net(1, 3, 2, {1, 1, 1}, {1});
  EXPECT_EQ(population_gradient(net, ParityTask::canonical(3, 2)).first,
            (std::vector<double>{2, 2, 0}));
}

TEST(SgdStep, DeadZoneIsPureDecay) {
  const Network net = init_uniform(3, 4, 2, 1);
  GradientEstimate g{3, 4, std::vector<double>(12, 0.1), {}};
  TrainConfig cfg;
  const Network next = sgd_step(net, g, cfg);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(next.weights()[i], 0.9 * net.weights()[i]);
}

TEST(SgdStep, ZeroStepLeavesNetwork) {
  const Network net = init_binary(3, 4, 2, 1);
  GradientEstimate g{3, 4, std::vector<double>(12, 5.0), {}};
  TrainConfig cfg;
  cfg.eta = 0.0;
  EXPECT_EQ(sgd_step(net, g, cfg), net);
}

TEST(SgdStep, GoodNeuronFeatureFixedPoint) {
  const ParityTask t = ParityTask::canonical(4, 3);
  const Network net(1, 4, 3, {1, -1, -1, 1}, {1});
  TrainConfig cfg;
  cfg.rho = 1.0;
  const Network next = sgd_step(net, population_gradient(net, t), cfg);
  EXPECT_EQ(next.weight(0, 0), 1.0);
  EXPECT_EQ(next.weight(0, 1), -1.0);
  EXPECT_EQ(next.weight(0, 2), -1.0);
  EXPECT_DOUBLE_EQ(next.weight(0, 3), 0.9);
}

TEST(Condition, SatisfyingInstantiationIsQuiet) {
  TrainConfig cfg;
  cfg.eta = 0.01;
  cfg.rho = 0.2;
  cfg.batch_size = 100000000000ULL;
  EXPECT_TRUE(validate_condition(ParityTask::canonical(2000, 2), 100, cfg).empty());
}

TEST(Condition, WeightDecayBullet) {
  TrainConfig cfg;
  cfg.lambda = 0.5;
  bool found = false;
  for (const auto& w : validate_condition(ParityTask::canonical(8, 2), 12, cfg))
    found = found || w.rfind("weight decay", 0) == 0;
  EXPECT_TRUE(found);
}

TEST(Training, PopulationReachesSmallNoise) {
  const ParityTask t = ParityTask::canonical(8, 2);
  TrainConfig cfg;
  cfg.iterations = static_cast<int>(std::ceil(3 / 0.1 * std::log(8.0)));
  cfg.rho = 0.2;
  const Network net0 = init_binary(12, 8, 2, 21);
  const auto out = train(t, net0, cfg, TrainMode::population);
  EXPECT_LE(out.summary.neurons.max_good_noise, std::pow(8.0, -3));
  EXPECT_LE(out.summary.neurons.max_bad_coordinate, std::pow(8.0, -3));
  if (out.summary.neurons.good > 0) EXPECT_EQ(out.summary.neurons.min_good_feature, 1.0);
}
