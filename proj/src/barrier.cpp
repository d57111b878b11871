#include "relulab/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "relulab/errors.hpp"

namespace relulab {

SegmentBarrier segment_barrier(const Vector& a, const Vector& b, const Objective& f, int resolution) {
  if (resolution < 2) throw DomainError("resolution", "must be >= 2");
  if (a.size() != b.size()) throw ShapeError("segment endpoints differ in dimension");
  SegmentBarrier r;
  r.max_loss = -std::numeric_limits<double>::infinity();
  double fa = 0.0;
  double fb = 0.0;
  for (int i = 0; i <= resolution; ++i) {
    const double alpha = static_cast<double>(i) / resolution;
    const double v = i == 0 ? f(a) : i == resolution ? f(b) : f((1.0 - alpha) * a + alpha * b);
    if (i == 0) fa = v;
    if (i == resolution) fb = v;
    if (v > r.max_loss) {
      r.max_loss = v;
      r.argmax_alpha = alpha;
    }
  }
  r.endpoint_max = std::max(fa, fb);
  return r;
}

ObjectiveGrad network_objective(const Params& like, const Dataset& data) {
  return [shape = Params::zeros_like(like), &data](const Vector& theta, Vector* grad) mutable {
    if (theta.size() != static_cast<Eigen::Index>(shape.size())) {
      throw ShapeError("parameter vector has wrong length");
    }
    shape.vec() = theta;
    if (!grad) return loss_value(shape, data);
    LossGrad lg = loss_and_grad(shape, data);
    *grad = lg.grad.vec();
    return lg.loss;
  };
}

SegmentBarrier segment_barrier(const Params& a, const Params& b, const Dataset& data, int resolution) {
  if (!a.same_shape(b)) throw ShapeError("segment endpoints differ in shape");
  auto obj = network_objective(a, data);
  return segment_barrier(a.vec(), b.vec(), [&obj](const Vector& x) { return obj(x, nullptr); },
                         resolution);
}

PathBarrier path_barrier(const std::vector<Vector>& waypoints, const ObjectiveGrad& f, int resolution) {
  if (waypoints.size() < 2) throw DomainError("waypoints", "a path needs at least two waypoints");
  if (resolution < 2) throw DomainError("resolution", "must be >= 2");
  PathBarrier r;
  r.max_loss = -std::numeric_limits<double>::infinity();
  Vector grad;
  auto eval = [&](const Vector& x) {
    const double v = f(x, &grad);
    r.grad_max = std::max(r.grad_max, grad.norm());
    return v;
  };
  for (std::size_t s = 0; s + 1 < waypoints.size(); ++s) {
    const Vector& a = waypoints[s];
    const Vector& b = waypoints[s + 1];
    if (a.size() != b.size()) throw ShapeError("waypoints differ in dimension");
    r.path_length += (b - a).norm();
    SegmentBarrier seg = segment_barrier(a, b, eval, resolution);
    r.max_loss = std::max(r.max_loss, seg.max_loss);
    if (s == 0) r.endpoint_max = f(a, nullptr);
    if (s + 2 == waypoints.size()) r.endpoint_max = std::max(r.endpoint_max, f(b, nullptr));
    r.per_segment.push_back(seg);
  }
  r.tolerance = 1e-6 * (1.0 + std::abs(r.max_loss));
  r.ulb_bound = r.endpoint_max + r.grad_max * r.path_length;
  r.ulb_holds = r.max_loss <= r.ulb_bound + r.tolerance;
  return r;
}

PathBarrier path_barrier(const PathSpec& path, const Dataset& data) {
  if (path.waypoints.size() < 2) throw DomainError("waypoints", "a path needs at least two waypoints");
  std::vector<Vector> flat;
  flat.reserve(path.waypoints.size());
  for (const auto& w : path.waypoints) {
    if (!w.same_shape(path.waypoints.front())) throw ShapeError("waypoints differ in shape");
    flat.emplace_back(w.vec());
  }
  return path_barrier(flat, network_objective(path.waypoints.front(), data), path.resolution);
}

RefinementCheck refinement_check(const Vector& a, const Vector& b, const Objective& f, int resolution) {
  RefinementCheck c;
  c.coarse = segment_barrier(a, b, f, resolution).max_loss;
  c.fine = segment_barrier(a, b, f, 2 * resolution).max_loss;
  c.ok = c.fine >= c.coarse - 1e-6 * (1.0 + std::abs(c.coarse));
  return c;
}

}  // namespace relulab
