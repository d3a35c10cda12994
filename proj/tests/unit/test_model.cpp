#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "pcam/model.hpp"
#include "test_support.hpp"

using namespace pcam;
using testing_support::random_vector;
using testing_support::rel_err;

namespace {

WriteConfig with_std(double s) {
  WriteConfig c;
  c.weight_init_std = s;
  return c;
}

struct Case {
  MemoryModel m;
  Eigen::VectorXd x, h, h_prev;
};

Case random_case(std::uint64_t seed, std::size_t H, std::size_t L, Activation f = Activation::tanh,
                 Activation g = Activation::tanh) {
  Case c{init_model(H, L, f, g, seed, with_std(0.5)), {}, {}, {}};
  std::mt19937_64 rng(seed + 1000);
  c.x = random_vector(rng, Eigen::Index(L));
  c.h = random_vector(rng, Eigen::Index(H), 0.5);
  c.h_prev = random_vector(rng, Eigen::Index(H), 0.5);
  return c;
}

}  // namespace

TEST(InitModel, DimensionsAtFullScale) {
  const MemoryModel m = init_model(1600, 3200, Activation::tanh, Activation::tanh, 1, WriteConfig{});
  EXPECT_EQ(m.w_hidden.rows(), 1600);
  EXPECT_EQ(m.w_hidden.cols(), 1600);
  EXPECT_EQ(m.w_out.rows(), 3200);
  EXPECT_EQ(m.w_out.cols(), 1600);
  EXPECT_EQ(m.cue.size(), 1600);
  EXPECT_NEAR(m.w_out.squaredNorm() / double(m.w_out.size()), 1.0 / 1600.0, 1e-5);
}

TEST(InitModel, SameSeedIsBitIdenticalAndSeedsDiffer) {
  const auto a = init_model(32, 8, Activation::tanh, Activation::tanh, 5, WriteConfig{});
  const auto b = init_model(32, 8, Activation::tanh, Activation::tanh, 5, WriteConfig{});
  const auto c = init_model(32, 8, Activation::tanh, Activation::tanh, 6, WriteConfig{});
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
}

TEST(InitModel, ZeroStdGivesZeroWeights) {
  const auto m = init_model(16, 4, Activation::tanh, Activation::tanh, 5, with_std(0.0));
  EXPECT_TRUE(m.w_hidden.isZero(0.0));
  EXPECT_TRUE(m.w_out.isZero(0.0));
}

TEST(InitModel, ZeroCueOption) {
  WriteConfig c;
  c.cue_init = CueInit::zeros;
  const auto m = init_model(16, 4, Activation::tanh, Activation::tanh, 5, c);
  EXPECT_TRUE(m.cue.isZero(0.0));
  // Weights do not depend on the cue choice.
  EXPECT_EQ(m.w_out, init_model(16, 4, Activation::tanh, Activation::tanh, 5, WriteConfig{}).w_out);
}

TEST(InitModel, RejectsBadArguments) {
  EXPECT_THROW(init_model(0, 4, Activation::tanh, Activation::tanh, 0, WriteConfig{}), ConfigError);
  EXPECT_THROW(init_model(4, 0, Activation::tanh, Activation::tanh, 0, WriteConfig{}), ConfigError);
  EXPECT_THROW(init_model(4, 4, Activation::tanh, Activation::tanh, 0, with_std(-1.0)), ConfigError);
}

TEST(Energy, ZeroAtExactPredictions) {
  Case c = random_case(1, 6, 3);
  c.h = detail::predict_hidden(c.m, c.h_prev);
  c.x = c.m.w_out * c.h.array().tanh().matrix();
  EXPECT_NEAR(energy(c.m, c.x, c.h, c.h_prev), 0.0, 1e-24);
  const ErrorPair e = error_pair(c.m, c.x, c.h, c.h_prev);
  EXPECT_NEAR(e.e_x.norm(), 0.0, 1e-12);
  EXPECT_EQ(e.e_h.norm(), 0.0);
}

TEST(Energy, ZeroWeightsIdentityReducesToSignalPower) {
  const auto m = init_model(4, 3, Activation::identity, Activation::identity, 0, with_std(0.0));
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  const Eigen::VectorXd h = Eigen::VectorXd::Zero(4);
  EXPECT_DOUBLE_EQ(energy(m, x, h, h), 5.25);
  EXPECT_EQ(error_pair(m, x, h, h).e_x, x);
}

TEST(Energy, MatchesLoopOracleOnRandomInstances) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    for (Activation a : {Activation::tanh, Activation::identity}) {
      const Case c = random_case(s, 7, 5, a, a);
      const double expect = oracle::energy(testing_support::to_instance(c.m, c.x, c.h, c.h_prev));
      EXPECT_NEAR(energy(c.m, c.x, c.h, c.h_prev), expect, 1e-12 * std::max(1.0, expect));
      const ErrorPair e = error_pair(c.m, c.x, c.h, c.h_prev);
      EXPECT_NEAR(e.e_x.squaredNorm() + e.e_h.squaredNorm(), expect, 1e-12 * std::max(1.0, expect));
    }
  }
}

TEST(Energy, DimensionMismatchThrows) {
  const Case c = random_case(1, 6, 3);
  const Eigen::VectorXd bad_x = Eigen::VectorXd::Zero(4);
  const Eigen::VectorXd bad_h = Eigen::VectorXd::Zero(5);
  EXPECT_THROW(energy(c.m, bad_x, c.h, c.h_prev), DimensionError);
  EXPECT_THROW(energy(c.m, c.x, bad_h, c.h_prev), DimensionError);
  EXPECT_THROW(infer_hidden_step(c.m, c.x, c.h, bad_h, 0.1), DimensionError);
  EXPECT_THROW(weight_update(c.m, bad_x, c.h, c.h_prev, 0.1), DimensionError);
}

TEST(InferHiddenStep, FixedPointWhenErrorsVanish) {
  Case c = random_case(2, 6, 3);
  c.h = detail::predict_hidden(c.m, c.h_prev);
  c.x = c.m.w_out * c.h.array().tanh().matrix();
  EXPECT_LT((infer_hidden_step(c.m, c.x, c.h, c.h_prev, 0.3) - c.h).norm(), 1e-12);
}

TEST(InferHiddenStep, IdentityOutputWithoutHiddenError) {
  Case c = random_case(3, 6, 3, Activation::identity, Activation::tanh);
  c.h = detail::predict_hidden(c.m, c.h_prev);
  const Eigen::VectorXd e_x = c.x - c.m.w_out * c.h;
  const Eigen::VectorXd step = infer_hidden_step(c.m, c.x, c.h, c.h_prev, 0.2) - c.h;
  EXPECT_LT((step - 0.2 * c.m.w_out.transpose() * e_x).norm(), 1e-13);
}

TEST(InferHiddenStep, MatchesFiniteDifferenceGradient) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Case c = random_case(s, 8, 4);
    const Eigen::VectorXd dir = infer_hidden_step(c.m, c.x, c.h, c.h_prev, 1.0) - c.h;
    const Eigen::VectorXd fd = -0.5 * testing_support::to_eigen(oracle::grad_h(testing_support::to_instance(c.m, c.x, c.h, c.h_prev)));
    EXPECT_LE(rel_err(dir, fd), 1e-5) << "seed " << s;
  }
}

TEST(WeightUpdate, MatchesFiniteDifferenceGradient) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    for (Activation a : {Activation::tanh, Activation::identity}) {
      const Case c = random_case(s, 8, 4, a, a);
      const MemoryModel u = weight_update(c.m, c.x, c.h, c.h_prev, 1.0);
      const auto inst = testing_support::to_instance(c.m, c.x, c.h, c.h_prev);
      const Eigen::MatrixXd fd_out = -0.5 * testing_support::to_eigen(oracle::grad_w_out(inst));
      const Eigen::MatrixXd fd_hid = -0.5 * testing_support::to_eigen(oracle::grad_w_hidden(inst));
      EXPECT_LE(rel_err(u.w_out - c.m.w_out, fd_out), 1e-5) << "seed " << s;
      EXPECT_LE(rel_err(u.w_hidden - c.m.w_hidden, fd_hid), 1e-5) << "seed " << s;
    }
  }
}

TEST(WeightUpdate, NoChangeAtZeroError) {
  Case c = random_case(4, 6, 3);
  c.h = detail::predict_hidden(c.m, c.h_prev);
  c.x = c.m.w_out * c.h.array().tanh().matrix();
  const MemoryModel u = weight_update(c.m, c.x, c.h, c.h_prev, 0.5);
  EXPECT_LT((u.w_out - c.m.w_out).norm(), 1e-12);
  EXPECT_EQ(u.w_hidden, c.m.w_hidden);
}

TEST(WeightUpdate, ZeroPreviousStateLeavesTransitionUntouched) {
  Case c = random_case(5, 6, 3);
  c.h_prev.setZero();
  const MemoryModel u = weight_update(c.m, c.x, c.h, c.h_prev, 0.5);
  EXPECT_EQ(u.w_hidden, c.m.w_hidden);
  EXPECT_FALSE(u.w_out == c.m.w_out);
}

TEST(WeightUpdate, KeepsMetadata) {
  const Case c = random_case(6, 6, 3, Activation::relu, Activation::identity);
  const MemoryModel u = weight_update(c.m, c.x, c.h, c.h_prev, 0.5);
  EXPECT_EQ(u.output_activation, Activation::relu);
  EXPECT_EQ(u.hidden_activation, Activation::identity);
  EXPECT_EQ(u.seed, c.m.seed);
  EXPECT_EQ(u.cue, c.m.cue);
}

// A small enough step along any of the three update directions never raises
// the energy; halving the step until it decreases must terminate.
TEST(Property, UpdatesAreDescentDirections) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Case c = random_case(s, 10, 6);
    const double e0 = energy(c.m, c.x, c.h, c.h_prev);
    bool h_ok = false, w_ok = false;
    for (double eta = 1.0; eta > 1e-12 && !(h_ok && w_ok); eta *= 0.5) {
      if (!h_ok) h_ok = energy(c.m, c.x, infer_hidden_step(c.m, c.x, c.h, c.h_prev, eta), c.h_prev) < e0;
      if (!w_ok) w_ok = energy(weight_update(c.m, c.x, c.h, c.h_prev, eta), c.x, c.h, c.h_prev) < e0;
    }
    EXPECT_TRUE(h_ok) << "seed " << s;
    EXPECT_TRUE(w_ok) << "seed " << s;
  }
}

TEST(Property, RepeatedHiddenStepsConverge) {
  const Case c = random_case(9, 12, 6);
  Eigen::VectorXd h = c.h;
  double prev = energy(c.m, c.x, h, c.h_prev);
  for (int i = 0; i < 200; ++i) {
    h = infer_hidden_step(c.m, c.x, h, c.h_prev, 0.05);
    const double e = energy(c.m, c.x, h, c.h_prev);
    EXPECT_LE(e, prev + 1e-12);
    prev = e;
  }
}

TEST(Activation, DerivativesMatchFiniteDifferences) {
  for (Activation a : {Activation::tanh, Activation::identity, Activation::relu}) {
    for (double z : {-1.3, -0.2, 0.4, 2.1}) {
      Eigen::VectorXd v(1), vp(1), vm(1);
      v << z;
      vp << z + 1e-6;
      vm << z - 1e-6;
      const double fd = (apply(a, vp)(0) - apply(a, vm)(0)) / 2e-6;
      EXPECT_NEAR(derivative(a, v)(0), fd, 1e-8) << to_string(a);
    }
  }
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  EXPECT_EQ(derivative(Activation::relu, zero)(0), 0.0);
  EXPECT_EQ(parse_activation("relu"), Activation::relu);
  EXPECT_THROW(parse_activation("sigmoid"), ConfigError);
}
