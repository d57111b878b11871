#pragma once

// Loss along straight segments and piecewise-linear paths in parameter space.
// The sup along a segment is approximated on a uniform grid that includes both
// endpoints, so every reported maximum is a lower bound on the true sup.

#include <functional>
#include <vector>

#include "relulab/net.hpp"

namespace relulab {

/// Scalar objective over a flat parameter vector.
using Objective = std::function<double(const Vector&)>;
/// Objective that also writes its gradient when `grad` is non-null.
using ObjectiveGrad = std::function<double(const Vector&, Vector* grad)>;

struct SegmentBarrier {
  double max_loss = 0.0;
  double argmax_alpha = 0.0;
  double endpoint_max = 0.0;

  double excess() const { return max_loss - endpoint_max; }
  double height(double L_star) const { return max_loss - L_star; }
};

SegmentBarrier segment_barrier(const Vector& a, const Vector& b, const Objective& f, int resolution);
SegmentBarrier segment_barrier(const Params& a, const Params& b, const Dataset& data, int resolution);

struct PathSpec {
  std::vector<Params> waypoints;
  int resolution = 256;
};

struct PathBarrier {
  double max_loss = 0.0;
  std::vector<SegmentBarrier> per_segment;
  double endpoint_max = 0.0;  // max(L(first), L(last))
  double path_length = 0.0;   // sum of waypoint distances
  double grad_max = 0.0;      // max ||grad|| over every evaluated point
  double ulb_bound = 0.0;     // endpoint_max + grad_max * path_length
  double tolerance = 0.0;     // 1e-6 (1 + |max_loss|)
  bool ulb_holds = false;
};

PathBarrier path_barrier(const std::vector<Vector>& waypoints, const ObjectiveGrad& f, int resolution);
PathBarrier path_barrier(const PathSpec& path, const Dataset& data);

struct RefinementCheck {
  double coarse = 0.0;
  double fine = 0.0;
  bool ok = false;  // fine >= coarse - 1e-6 (1 + |coarse|)
};

/// Compares the grid sup at `resolution` and 2 * `resolution` (nested grids).
RefinementCheck refinement_check(const Vector& a, const Vector& b, const Objective& f, int resolution);

/// Wraps the network loss as an ObjectiveGrad over flat parameters shaped like `like`.
ObjectiveGrad network_objective(const Params& like, const Dataset& data);

}  // namespace relulab
