#pragma once

// Directional coverage of the post-freeze trajectory ("carpet" of step
// segments), box-counting dimension, greedy covering numbers and the Dudley
// entropy integral.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "relulab/net.hpp"

namespace relulab {

struct Carpet {
  Matrix basis;  // D x r, orthonormal columns
  std::vector<std::pair<Vector, Vector>> segments;  // in basis coordinates, unit diameter
  int target_rank = 0;
  int achieved_rank = 0;
  double scale = 1.0;  // original diameter divided out

  bool reduced_rank() const { return achieved_rank < target_rank; }
  int dim() const { return static_cast<int>(basis.cols()); }
};

/// Principal subspace of the deltas (columns), consecutive step segments
/// projected into it, rescaled to unit diameter.
Carpet build_carpet(const Eigen::Ref<const Matrix>& deltas, int d_eff_target);

enum class DirectionSampling { low_discrepancy, monte_carlo };

/// n unit directions in R^dim. Low-discrepancy mode is deterministic for a
/// given seed (the seed shifts the sequence start).
Matrix sample_directions(int dim, int n, DirectionSampling mode = DirectionSampling::low_discrepancy,
                         std::uint64_t seed = 0);

struct Coverage {
  double covered_fraction = 0.0;
  double worst_gap = 0.0;  // max_u (1 - max_t |<u, v_t>|)
};

/// A direction u is covered when some segment direction v has |<u,v>| >= 1 - eps.
Coverage directional_coverage(const Carpet& carpet, const Eigen::Ref<const Matrix>& directions, double eps);
Coverage directional_coverage(const Carpet& carpet, int n_dirs, double eps,
                              DirectionSampling mode = DirectionSampling::low_discrepancy,
                              std::uint64_t seed = 0);

/// Points sampled uniformly along every segment (`per_segment` per segment, start included).
Matrix carpet_points(const Carpet& carpet, int per_segment);

struct BoxDimension {
  double dim_estimate = 0.0;
  std::vector<long> counts;
  bool degenerate = false;
};

/// Occupied boxes per scale; slope of log count vs log(1/scale). Points are
/// columns. Each count is the minimum over grid orientations: the input axes,
/// plus `orientations` turns of the principal frame in its leading plane
/// (a full search in 2-d). orientations = 1 counts axis-aligned boxes only.
BoxDimension box_counting_dimension(const Eigen::Ref<const Matrix>& points, const std::vector<double>& scales,
                                    int orientations = 90);

/// Greedy cover: take the first uncovered point, cover its eps-ball, repeat.
/// At most twice the optimal count for centres restricted to the points.
long covering_number(const Eigen::Ref<const Matrix>& points, double eps);

struct DudleyGap {
  double value = 0.0;                  // lipschitz_product * 12 * int sqrt(ln N(eps)/n) deps
  std::optional<double> closed_form;   // 12 B sqrt(d_eff/n) * lipschitz_product
};

/// Trapezoidal Dudley integral over the supplied (eps, count) grid. The piece
/// below the smallest eps uses the integrand value at the smallest eps.
DudleyGap dudley_gap(std::vector<std::pair<double, double>> cover_counts, long n_samples,
                     double lipschitz_product, std::optional<double> B_step = std::nullopt,
                     std::optional<double> d_eff = std::nullopt);

/// alpha_t * sqrt(sigma^2 / lambda) per step.
std::vector<double> signed_threshold_column(const std::vector<double>& alphas, double sigma, double lambda);

/// Carpet dump: one JSON object per segment.
void write_carpet(std::ostream& os, const Carpet& carpet);

}  // namespace relulab
