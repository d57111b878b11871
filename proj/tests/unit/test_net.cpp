#include <doctest.h>

#include <cmath>

#include "../oracles.hpp"
#include "relulab/errors.hpp"
#include "relulab/net.hpp"

using namespace relulab;

namespace {

Params one_one_one() {
  Params p({1, 1, 1});
  p.weight(0)(0, 0) = 2.0;
  p.bias(0)(0) = -1.0;
  p.weight(1)(0, 0) = 3.0;
  p.bias(1)(0) = 0.0;
  return p;
}

Vector vec1(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST_SUITE("net") {
  TEST_CASE("counts") {
    const std::vector<int> dims{4, 8, 8, 1};
    CHECK(layer_count(dims) == 3);
    CHECK(hidden_count(dims) == 16);
    CHECK(raw_param_count(dims) == 8 * 5 + 8 * 9 + 1 * 9);
    CHECK(lifted_param_count(dims) == 9 * 5 + 9 * 9 + 2 * 9);
    CHECK(Params(dims).size() == raw_param_count(dims));
  }

  TEST_CASE("config validation") {
    CHECK_THROWS_AS(NetConfig({{3}, 1.0, 0}).validate(), ConfigError);
    CHECK_THROWS_AS(NetConfig({{3, 0, 1}, 1.0, 0}).validate(), ConfigError);
    CHECK_THROWS_AS(NetConfig({{3, 1}, 0.0, 0}).validate(), ConfigError);
    CHECK_NOTHROW(NetConfig({{3, 1}, 1.0, 0}).validate());
  }

  TEST_CASE("zero network") {
    Params p({3, 4, 2});
    const auto r = forward(p, Vector::Constant(3, 1.7));
    CHECK(r.output.isZero(0.0));
    for (const auto& z : r.preacts) CHECK(z.isZero(0.0));
    Dataset d{Matrix::Random(3, 5), Matrix::Zero(2, 5), LossKind::squared_error};
    const auto lg = loss_and_grad(p, d);
    CHECK(lg.loss == 0.0);
    CHECK(lg.grad.vec().isZero(0.0));
    CHECK(lipschitz_estimate(p) == 0.0);
  }

  TEST_CASE("hand-evaluated 1-1-1 net") {
    const Params p = one_one_one();
    auto r = forward(p, vec1(1.0));
    CHECK(r.preacts[0](0) == 1.0);
    CHECK(r.output(0) == 3.0);
    r = forward(p, vec1(0.0));
    CHECK(r.preacts[0](0) == -1.0);
    CHECK(r.output(0) == 0.0);
    const auto pat = activation_pattern(p, vec1(1.0));
    CHECK(pat.bits == std::vector<std::uint8_t>{1});
    CHECK(pat.active == 1);
  }

  TEST_CASE("z exactly zero is inactive with zero subgradient") {
    const Params p = one_one_one();
    const auto pat = activation_pattern(p, vec1(0.5));
    CHECK(pat.bits[0] == 0);
    Dataset d{Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0), LossKind::squared_error};
    const auto lg = loss_and_grad(p, d);
    CHECK(lg.grad.weight(0)(0, 0) == 0.0);
    CHECK(lg.grad.bias(0)(0) == 0.0);
    CHECK(margin(p, d.inputs) == 0.0);
  }

  TEST_CASE("all biases -10 switch every unit off") {
    NetConfig c{{3, 5, 4, 1}, 0.01, 3};
    Params p = init_params(c);
    for (std::size_t l = 0; l + 1 < p.layers(); ++l) p.bias(l).setConstant(-10.0);
    const auto pat = activation_pattern(p, Vector::Zero(3));
    CHECK(pat.active == 0);
    CHECK(pat.bits.size() == 9);
  }

  TEST_CASE("shape and domain errors") {
    const Params p = one_one_one();
    CHECK_THROWS_AS(forward(p, Vector::Zero(2)), ShapeError);
    CHECK_THROWS_AS(forward(p, vec1(NAN)), DomainError);
    Dataset bad{Matrix::Zero(1, 2), Matrix::Zero(1, 3), LossKind::squared_error};
    CHECK_THROWS_AS(loss_and_grad(p, bad), ShapeError);
  }

  TEST_CASE("forward agrees with a naive loop implementation") {
    NetConfig c{{5, 7, 6, 3}, 1.0, 42};
    const Params p = init_params(c);
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(5);
      for (auto& v : x) v = rng.normal();
      const auto expect = oracle::naive_forward(p, x);
      const auto got = forward(p, Eigen::Map<Vector>(x.data(), 5));
      for (int i = 0; i < 3; ++i) CHECK(got.output(i) == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-13));
    }
  }

  TEST_CASE("margin examples") {
    Params p({1, 1, 1});
    p.weight(0)(0, 0) = 1.0;
    Matrix x(1, 2);
    x << 0.3, -0.5;
    CHECK(margin(p, x) == doctest::Approx(0.3));

    NetConfig c{{3, 6, 1}, 1.0, 5};
    Params q = init_params(c);
    const Matrix probes = Matrix::Random(3, 10);
    const double m1 = margin(q, probes);
    q.weight(0) *= 2.0;
    q.bias(0) *= 2.0;
    CHECK(margin(q, probes) == doctest::Approx(2.0 * m1).epsilon(1e-14));
  }

  TEST_CASE("spectral norm and lipschitz estimate") {
    Params id({2, 2});
    id.weight(0) = RowMatrix::Identity(2, 2);
    CHECK(lipschitz_estimate(id) == doctest::Approx(1.0).epsilon(1e-6));
    Params diag({2, 2});
    diag.weight(0)(0, 0) = 3.0;
    diag.weight(0)(1, 1) = 1.0;
    CHECK(lipschitz_estimate(diag) == doctest::Approx(3.0).epsilon(1e-6));
    const Matrix m = Matrix::Random(6, 4);
    Eigen::JacobiSVD<Matrix> svd(m);
    bool converged = false;
    CHECK(spectral_norm(m, &converged) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-8));
    CHECK(converged);
  }

  TEST_CASE("gradient matches finite differences for both losses") {
    for (auto kind : {LossKind::squared_error, LossKind::cross_entropy_with_logits}) {
      NetConfig c{{3, 5, 4, 3}, 1.0, 17};
      const Params p = init_params(c);
      const Dataset d = oracle::random_dataset(3, 3, 6, 23, kind);
      if (oracle::min_abs_preact(p, d.inputs) < 1e-3) continue;
      const auto lg = loss_and_grad(p, d);
      const Vector fd = oracle::finite_difference_grad(p, d, 1e-6);
      const double rel = (lg.grad.vec() - fd).norm() / std::max(fd.norm(), 1e-12);
      CHECK(rel < 1e-5);
      CHECK(lg.loss == doctest::Approx(loss_value(p, d)).epsilon(1e-14));
    }
  }

  TEST_CASE("duplicated and permuted data leave loss and gradient unchanged") {
    NetConfig c{{2, 6, 1}, 1.0, 4};
    const Params p = init_params(c);
    const Dataset d = oracle::random_dataset(2, 1, 7, 5);
    Dataset dup{Matrix(2, 14), Matrix(1, 14), d.loss_kind};
    dup.inputs << d.inputs, d.inputs;
    dup.targets << d.targets, d.targets;
    Dataset perm = d;
    for (int i = 0; i < 7; ++i) {
      perm.inputs.col(i) = d.inputs.col(6 - i);
      perm.targets.col(i) = d.targets.col(6 - i);
    }
    const auto a = loss_and_grad(p, d);
    for (const Dataset* other : {&dup, &perm}) {
      const auto b = loss_and_grad(p, *other);
      CHECK(std::abs(a.loss - b.loss) < 1e-12);
      CHECK((a.grad.vec() - b.grad.vec()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("per-example gradients average to the full gradient") {
    NetConfig c{{3, 4, 2}, 1.0, 8};
    const Params p = init_params(c);
    const Dataset d = oracle::random_dataset(3, 2, 9, 2);
    const Matrix g = per_example_grads(p, d);
    CHECK(g.rows() == static_cast<Eigen::Index>(p.size()));
    CHECK((g.rowwise().mean() - loss_and_grad(p, d).grad.vec()).norm() < 1e-13);
  }

  TEST_CASE("output is affine in the last layer within a fixed pattern") {
    NetConfig c{{3, 5, 2}, 1.0, 12};
    const Params a = init_params(c);
    Params b = a;
    b.weight(1).setRandom();
    b.bias(1).setRandom();
    const Vector x = Vector::Random(3);
    const auto fa = forward(a, x).output;
    const auto fb = forward(b, x).output;
    for (double s : {0.25, 0.5, 0.9}) {
      Params m = a;
      m.vec() = (1.0 - s) * a.vec() + s * b.vec();
      CHECK((forward(m, x).output - ((1.0 - s) * fa + s * fb)).norm() < 1e-12);
    }
  }

  TEST_CASE("patterns survive perturbations inside margin / lipschitz") {
    Rng rng(31);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      NetConfig c{{3, 6, 5, 1}, 1.0, seed};
      const Params p = init_params(c);
      const Matrix probes = Matrix::Random(3, 8);
      const double m = margin(p, probes);
      const double L = parameter_sensitivity(p, probes);
      Vector dir(static_cast<Eigen::Index>(p.size()));
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
      Params q = p;
      q.vec() += dir.normalized() * (0.99 * m / L);
      for (Eigen::Index col = 0; col < probes.cols(); ++col) {
        CHECK(activation_pattern(p, probes.col(col)) == activation_pattern(q, probes.col(col)));
      }
    }
  }

  TEST_CASE("init is deterministic and within its range") {
    NetConfig c{{4, 8, 1}, 0.5, 99};
    const Params a = init_params(c);
    CHECK(a == init_params(c));
    CHECK(a.weight(0).cwiseAbs().maxCoeff() <= 0.5 / 2.0);
    CHECK(a.bias(0).cwiseAbs().maxCoeff() <= 0.5);
    c.seed = 100;
    CHECK_FALSE(a == init_params(c));
  }

  TEST_CASE("pattern hash is FNV-1a") {
    const std::vector<std::uint8_t> empty;
    CHECK(pattern_hash(empty) == 0xcbf29ce484222325ULL);
    const std::vector<std::uint8_t> one{1};
    CHECK(pattern_hash(one) == ((0xcbf29ce484222325ULL ^ 1ULL) * 0x100000001b3ULL));
  }
}
