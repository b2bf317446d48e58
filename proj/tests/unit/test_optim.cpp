#include <doctest.h>

#include <cmath>
#include <limits>

#include "fromage/optim.hpp"
#include "fromage/random.hpp"
#include "support/oracles.hpp"

using namespace fromage;
using fromage::testing::reference_norm;
using fromage::testing::ulp_distance;

namespace {

Mlp single_layer(Matrix w) {
  MlpConfig config;
  config.widths = {w.cols(), w.rows()};
  return Mlp(config, {std::move(w)});
}

Mlp random_net(std::uint64_t seed, std::size_t depth = 3) {
  MlpConfig config;
  config.widths = {5};
  for (std::size_t k = 0; k < depth; ++k) config.widths.push_back(4 + k);
  config.nonlinearity = Nonlinearity::leaky_relu(0.5);
  config.seed = seed;
  return Mlp::initialize(config);
}

GradientSet random_grads(const Mlp& net, Rng& rng) {
  std::vector<Matrix> g;
  for (const Matrix& w : net.weights()) g.push_back(gaussian_matrix(w.rows(), w.cols(), rng));
  return GradientSet(std::move(g));
}

GradientSet zero_grads(const Mlp& net) {
  std::vector<Matrix> g;
  for (const Matrix& w : net.weights()) g.emplace_back(w.rows(), w.cols());
  return GradientSet(std::move(g));
}

// Gaussian gradient with its component along W projected out.
Matrix orthogonal_gradient(const Matrix& w, Rng& rng) {
  Matrix g = gaussian_matrix(w.rows(), w.cols(), rng);
  const double coef = inner_product_frobenius(g, w) / inner_product_frobenius(w, w);
  return axpy(g, -coef, w);
}

}  // namespace

TEST_CASE("relative update has relative size eta in every layer") {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Mlp net = random_net(trial);
    const GradientSet g = random_grads(net, rng);
    for (double eta : {1e-4, 0.01, 0.1, 1.0}) {
      const auto deltas = relative_update(net, g, eta, 1e-12);
      for (std::size_t k = 0; k < net.depth(); ++k)
        CHECK(std::abs(reference_norm(deltas[k]) / reference_norm(net.weight(k)) - eta) <=
              1e-12 * eta);
    }
  }
}

TEST_CASE("fromage leaves zero-gradient layers bitwise unchanged") {
  const Mlp net = random_net(2);
  OptimizerState state = OptimizerState::create(OptimizerKind::fromage, 0.01, net);
  CHECK(fromage_step(net, zero_grads(net), state).weights() == net.weights());

  Rng rng = make_rng(3);
  GradientSet mixed = random_grads(net, rng);
  mixed.grads[1] = Matrix(mixed.grads[1].rows(), mixed.grads[1].cols());
  mixed = GradientSet(mixed.grads);
  const Mlp next = fromage_step(net, mixed, state);
  CHECK(next.weight(1) == net.weight(1));
  CHECK_FALSE(next.weight(0) == net.weight(0));
}

TEST_CASE("orthogonal gradient: fromage keeps the norm, lars grows it") {
  SUBCASE("hand example") {
    const Mlp net = single_layer(Matrix::from_rows({{1.0, 0.0}}));
    const GradientSet g({Matrix::from_rows({{0.0, 1.0}})});
    OptimizerState f = OptimizerState::create(OptimizerKind::fromage, 0.01, net);
    OptimizerState l = OptimizerState::create(OptimizerKind::lars, 0.01, net);
    CHECK(ulp_distance(frobenius_norm(fromage_step(net, g, f).weight(0)), 1.0) <= 4);
    CHECK(ulp_distance(frobenius_norm(lars_step(net, g, l).weight(0)), std::sqrt(1.0001)) <= 4);
  }
  SUBCASE("random layers") {
    Rng rng = make_rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      const Matrix w = gaussian_matrix(6, 5, rng);
      const Mlp net = single_layer(w);
      const GradientSet g({orthogonal_gradient(w, rng)});
      const double eta = 0.01;
      OptimizerState f = OptimizerState::create(OptimizerKind::fromage, eta, net);
      OptimizerState l = OptimizerState::create(OptimizerKind::lars, eta, net);
      const double n0 = reference_norm(w);
      CHECK(ulp_distance(reference_norm(fromage_step(net, g, f).weight(0)), n0) <= 4);
      CHECK(ulp_distance(reference_norm(lars_step(net, g, l).weight(0)),
                         n0 * std::sqrt(1.0 + eta * eta)) <= 4);
    }
  }
}

TEST_CASE("lars without decay is fromage times the prefactor inverse") {
  Rng rng = make_rng(5);
  const Mlp net = random_net(6);
  const GradientSet g = random_grads(net, rng);
  const double eta = 0.05;
  OptimizerState f = OptimizerState::create(OptimizerKind::fromage, eta, net);
  OptimizerState l = OptimizerState::create(OptimizerKind::lars, eta, net);
  const Mlp a = fromage_step(net, g, f);
  const Mlp b = lars_step(net, g, l);
  for (std::size_t k = 0; k < net.depth(); ++k)
    CHECK(testing::relative_frobenius_error(scale(a.weight(k), std::sqrt(1.0 + eta * eta)),
                                            b.weight(k)) < 1e-15);
}

TEST_CASE("lars decoupled weight decay shrinks before the update") {
  const Mlp net = single_layer(Matrix::from_rows({{2.0, 0.0}}));
  const GradientSet g({Matrix::from_rows({{0.0, 1.0}})});
  OptimizerHyper hyper;
  hyper.weight_decay = 0.5;
  OptimizerState s = OptimizerState::create(OptimizerKind::lars, 0.1, net, hyper);
  // (1 - 0.05) * [2, 0] - 0.1 * (2 / 1) * [0, 1]
  const Matrix w = lars_step(net, g, s).weight(0);
  CHECK(w(0, 0) == doctest::Approx(1.9).epsilon(1e-15));
  CHECK(w(0, 1) == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("sgd is gradient descent without momentum and heavy ball with it") {
  Rng rng = make_rng(7);
  const Mlp net = random_net(8);
  const GradientSet g = random_grads(net, rng);
  OptimizerHyper plain;
  plain.momentum = 0.0;
  OptimizerState s = OptimizerState::create(OptimizerKind::sgd, 0.1, net, plain);
  const Mlp next = sgd_step(net, g, s);
  for (std::size_t k = 0; k < net.depth(); ++k)
    CHECK(next.weight(k) == axpy(net.weight(k), -0.1, g.grads[k]));

  OptimizerState m = OptimizerState::create(OptimizerKind::sgd, 0.1, net);
  const Mlp one = sgd_step(net, g, m);
  const Mlp two = sgd_step(one, g, m);
  // v1 = g, v2 = 0.9 g + g
  for (std::size_t k = 0; k < net.depth(); ++k) {
    CHECK(m.velocity[k] == axpy(g.grads[k], 0.9, g.grads[k]));
    CHECK(testing::relative_frobenius_error(
              two.weight(k), axpy(net.weight(k), -0.1 * 2.9, g.grads[k])) < 1e-14);
  }
}

TEST_CASE("adam first step moves each weight by about eta against the gradient sign") {
  const Mlp net = single_layer(Matrix::from_rows({{1.0, -1.0, 0.5}}));
  const GradientSet g({Matrix::from_rows({{0.3, -2.0, 1e-3}})});
  OptimizerState s = OptimizerState::create(OptimizerKind::adam, 0.01, net);
  const Mlp next = adam_step(net, g, s);
  CHECK(s.steps == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    const double gi = g.grads[0].values()[i];
    const double expected = -0.01 * gi / (std::abs(gi) + 1e-8);
    CHECK(next.weight(0).values()[i] - net.weight(0).values()[i] ==
          doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("adam with zero gradient decays moments and keeps weights") {
  Rng rng = make_rng(9);
  const Mlp net = random_net(10);
  OptimizerState s = OptimizerState::create(OptimizerKind::adam, 0.01, net);
  const Mlp moved = adam_step(net, random_grads(net, rng), s);
  const auto m1 = s.first_moment;
  const auto v1 = s.second_moment;
  const Mlp still = adam_step(moved, zero_grads(net), s);
  CHECK(s.steps == 2);
  for (std::size_t k = 0; k < net.depth(); ++k) {
    CHECK(s.first_moment[k] == scale(m1[k], 0.9));
    CHECK(s.second_moment[k] == scale(v1[k], 0.999));
  }
  // The bias-corrected first moment is still nonzero, so weights move; with
  // fresh moments they must not.
  OptimizerState fresh = OptimizerState::create(OptimizerKind::adam, 0.01, net);
  CHECK(adam_step(net, zero_grads(net), fresh).weights() == net.weights());
  CHECK(fresh.steps == 1);
}

TEST_CASE("cold-start updates point downhill for every optimizer") {
  Rng rng = make_rng(11);
  for (OptimizerKind kind :
       {OptimizerKind::fromage, OptimizerKind::lars, OptimizerKind::sgd, OptimizerKind::adam}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Mlp net = random_net(100 + trial);
      const GradientSet g = random_grads(net, rng);
      OptimizerState s = OptimizerState::create(kind, 0.01, net);
      const Mlp next = optimizer_step(net, g, s);
      for (std::size_t k = 0; k < net.depth(); ++k)
        CHECK(inner_product_frobenius(sub(next.weight(k), net.weight(k)), g.grads[k]) <= 0.0);
    }
  }
}

TEST_CASE("fromage step magnitude scales with the weights") {
  Rng rng = make_rng(12);
  const Mlp net = random_net(13);
  const GradientSet g = random_grads(net, rng);
  std::vector<Matrix> scaled;
  for (const Matrix& w : net.weights()) scaled.push_back(scale(w, 3.0));
  const Mlp big(net.config(), scaled);
  const auto d = relative_update(net, g, 0.01, 1e-12);
  const auto db = relative_update(big, g, 0.01, 1e-12);
  for (std::size_t k = 0; k < net.depth(); ++k) {
    CHECK(frobenius_norm(db[k]) == doctest::Approx(3.0 * frobenius_norm(d[k])).epsilon(1e-13));
    const double cos_a = -inner_product_frobenius(d[k], g.grads[k]) /
                         (frobenius_norm(d[k]) * frobenius_norm(g.grads[k]));
    const double cos_b = -inner_product_frobenius(db[k], g.grads[k]) /
                         (frobenius_norm(db[k]) * frobenius_norm(g.grads[k]));
    CHECK(cos_a == doctest::Approx(cos_b).epsilon(1e-13));
  }
}

TEST_CASE("norm clamp is a projection") {
  const Mlp net = single_layer(Matrix::from_rows({{2.0, 0.0}}));
  const std::vector<double> cap{1.0};
  const Mlp clamped = apply_norm_clamp(net, cap);
  CHECK(frobenius_norm(clamped.weight(0)) == 1.0);
  CHECK(apply_norm_clamp(clamped, cap).weights() == clamped.weights());
  const std::vector<double> loose{5.0};
  CHECK(apply_norm_clamp(net, loose).weights() == net.weights());

  Rng rng = make_rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const Mlp r = random_net(200 + trial);
    std::vector<double> caps;
    for (double n : r.weight_norms()) caps.push_back(n * std::uniform_real_distribution(0.5, 1.5)(rng));
    // The rescaled norm lands within rounding of the cap, so a second pass may
    // rescale again by a factor within a few ulps of one.
    const Mlp once = apply_norm_clamp(r, caps);
    const Mlp twice = apply_norm_clamp(once, caps);
    const double eps = std::numeric_limits<double>::epsilon();
    for (std::size_t k = 0; k < r.depth(); ++k) {
      CHECK(frobenius_norm(once.weight(k)) <= frobenius_norm(r.weight(k)));
      CHECK(frobenius_norm(once.weight(k)) <= caps[k] * (1.0 + 4.0 * eps));
      CHECK(testing::relative_frobenius_error(twice.weight(k), once.weight(k)) <= 4.0 * eps);
    }
  }
  CHECK_THROWS_AS(apply_norm_clamp(net, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("clamped optimizer state caps norms at their initial values") {
  Rng rng = make_rng(16);
  const Mlp net = single_layer(gaussian_matrix(4, 4, rng));
  const double cap = frobenius_norm(net.weight(0));
  OptimizerState s = OptimizerState::create(OptimizerKind::lars, 0.1, net, {}, true);
  Mlp cur = net;
  for (int i = 0; i < 10; ++i) {
    const GradientSet g({orthogonal_gradient(cur.weight(0), rng)});
    cur = optimizer_step(cur, g, s);
    CHECK(frobenius_norm(cur.weight(0)) <= cap * (1.0 + 1e-15));
  }
}

TEST_CASE("bad gradients are rejected before anything changes") {
  const Mlp net = random_net(15);
  GradientSet g = zero_grads(net);
  g.grads[2].values()[0] = std::numeric_limits<double>::quiet_NaN();
  for (OptimizerKind kind :
       {OptimizerKind::fromage, OptimizerKind::lars, OptimizerKind::sgd, OptimizerKind::adam}) {
    OptimizerState s = OptimizerState::create(kind, 0.01, net);
    const OptimizerState before = s;
    CHECK_THROWS_AS(optimizer_step(net, g, s), NonFiniteError);
    CHECK(s.steps == before.steps);
    CHECK(s.velocity == before.velocity);
    CHECK(s.first_moment == before.first_moment);
  }
  OptimizerState s = OptimizerState::create(OptimizerKind::fromage, 0.01, net);
  CHECK_THROWS_AS(fromage_step(net, GradientSet({Matrix(2, 2)}), s), ShapeError);
  CHECK_THROWS_AS(lars_step(net, zero_grads(net), s), std::invalid_argument);
  CHECK_THROWS_AS(OptimizerState::create(OptimizerKind::sgd, 0.0, net), std::invalid_argument);
}

TEST_CASE("tiny weights hit the floor and are counted") {
  const Mlp net = single_layer(Matrix::from_rows({{1e-14, 0.0}}));
  const GradientSet g({Matrix::from_rows({{1.0, 1.0}})});
  OptimizerState s = OptimizerState::create(OptimizerKind::fromage, 0.01, net);
  const Mlp next = fromage_step(net, g, s);
  CHECK(s.weight_floor_hits == 1);
  CHECK(all_finite(next.weight(0)));
}

TEST_CASE("learning-rate schedules") {
  Schedule constant;
  CHECK(schedule_eta(constant, {}, 3, 0.01) == 0.01);

  Schedule exp;
  exp.kind = Schedule::Kind::exponential;
  exp.gamma = 0.9;
  double eta = 0.01;
  for (int epoch = 0; epoch < 2; ++epoch) eta = schedule_eta(exp, {}, epoch, eta);
  CHECK(eta == doctest::Approx(0.0081).epsilon(1e-15));

  Schedule plateau;
  plateau.kind = Schedule::Kind::decay_on_plateau;
  plateau.patience = 3;
  const std::vector<double> falling{1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  CHECK(schedule_eta(plateau, falling, 6, 0.1) == 0.1);
  const std::vector<double> flat{1.0, 0.5, 0.5, 0.4999, 0.5};
  CHECK(schedule_eta(plateau, flat, 5, 0.1) == doctest::Approx(0.01).epsilon(1e-15));
  const std::vector<double> short_history{1.0, 1.0, 1.0};
  CHECK(schedule_eta(plateau, short_history, 3, 0.1) == 0.1);

  Schedule bad;
  bad.kind = Schedule::Kind::exponential;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(parse_schedule_kind("plateau") == Schedule::Kind::decay_on_plateau);
  CHECK_THROWS_AS(parse_schedule_kind("cosine"), std::invalid_argument);
}
