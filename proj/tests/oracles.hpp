#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "relulab/arrangement.hpp"
#include "relulab/net.hpp"
#include "relulab/rng.hpp"

namespace oracle {

using relulab::Dataset;
using relulab::Matrix;
using relulab::Params;
using relulab::Vector;

/// Central finite differences of the mean loss, one coordinate at a time.
inline Vector finite_difference_grad(const Params& p, const Dataset& data, double h) {
  Vector g(static_cast<Eigen::Index>(p.size()));
  Params q = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p.flat()[i];
    q.flat()[i] = x + h;
    const double up = relulab::loss_value(q, data);
    q.flat()[i] = x - h;
    const double down = relulab::loss_value(q, data);
    q.flat()[i] = x;
    g(static_cast<Eigen::Index>(i)) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Plain loop forward pass written without Eigen expressions.
inline std::vector<double> naive_forward(const Params& p, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const auto W = p.weight(l);
    const auto b = p.bias(l);
    std::vector<double> z(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      double s = b(i);
      for (Eigen::Index j = 0; j < W.cols(); ++j) s += W(i, j) * h[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = s;
    }
    if (l + 1 < p.layers()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    h = z;
  }
  return h;
}

/// Distinct sign vectors hit by uniform samples in [-box, box]^d.
inline std::set<relulab::SignVector> sampled_sign_vectors(const relulab::Arrangement& arr, long samples, double box,
                                                          std::uint64_t seed) {
  relulab::Rng rng(seed);
  std::set<relulab::SignVector> seen;
  std::vector<double> x(static_cast<std::size_t>(arr.dim));
  for (long s = 0; s < samples; ++s) {
    for (auto& v : x) v = rng.uniform(-box, box);
    relulab::SignVector sv;
    bool on_plane = false;
    for (const auto& h : arr.planes) {
      double z = -h.offset;
      for (std::size_t k = 0; k < x.size(); ++k) z += h.normal[k] * x[k];
      if (z == 0.0) on_plane = true;
      sv.push_back(z > 0.0 ? 1 : -1);
    }
    if (!on_plane) seen.insert(sv);
  }
  return seen;
}

/// Composite Simpson rule on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, long n) {
  if (n % 2) ++n;
  const double h = (b - a) / static_cast<double>(n);
  double s = f(a) + f(b);
  for (long i = 1; i < n; ++i) s += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Midpoint rule, usable when f is singular at an endpoint.
inline double midpoint(const std::function<double(double)>& f, double a, double b, long n) {
  const double h = (b - a) / static_cast<double>(n);
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += f(a + h * (static_cast<double>(i) + 0.5));
  return s * h;
}

/// Random dataset with Gaussian inputs and targets.
inline Dataset random_dataset(int d0, int dn, long n, std::uint64_t seed,
                              relulab::LossKind kind = relulab::LossKind::squared_error) {
  relulab::Rng rng(seed);
  Dataset d;
  d.inputs.resize(d0, n);
  d.targets.resize(dn, n);
  for (Eigen::Index i = 0; i < d.inputs.size(); ++i) d.inputs.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < d.targets.size(); ++i) d.targets.data()[i] = rng.normal();
  if (kind == relulab::LossKind::cross_entropy_with_logits) {
    for (Eigen::Index c = 0; c < n; ++c) {
      Vector p = d.targets.col(c).array().exp();
      d.targets.col(c) = p / p.sum();
    }
  }
  d.loss_kind = kind;
  return d;
}

/// Smallest |z| over every hidden and output pre-activation.
inline double min_abs_preact(const Params& p, const Matrix& inputs) {
  double m = INFINITY;
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    const auto fr = relulab::forward(p, inputs.col(c));
    for (std::size_t l = 0; l + 1 < fr.preacts.size(); ++l) m = std::min(m, fr.preacts[l].cwiseAbs().minCoeff());
  }
  return m;
}

}  // namespace oracle
