#include "relulab/kakeya.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <unordered_set>

#include <boost/math/special_functions/erf.hpp>

#include "relulab/errors.hpp"
#include "relulab/rng.hpp"
#include "relulab/trace.hpp"

namespace relulab {

Carpet build_carpet(const Eigen::Ref<const Matrix>& deltas, int d_eff_target) {
  if (d_eff_target < 1) throw DomainError("d_eff_target", "must be >= 1");
  long nonzero = 0;
  for (Eigen::Index t = 0; t < deltas.cols(); ++t) nonzero += deltas.col(t).squaredNorm() > 0.0;
  if (nonzero == 0) throw InsufficientDataError("build_carpet: all deltas are zero");

  Eigen::BDCSVD<Matrix> svd(deltas, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > 1e-10 * sv(0);

  Carpet c;
  c.target_rank = d_eff_target;
  c.achieved_rank = std::min(rank, d_eff_target);
  c.basis = svd.matrixU().leftCols(c.achieved_rank);
  // Fix the sign of each basis vector: largest-magnitude entry positive.
  for (Eigen::Index j = 0; j < c.basis.cols(); ++j) {
    Eigen::Index arg = 0;
    c.basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (c.basis(arg, j) < 0.0) c.basis.col(j) *= -1.0;
  }

  const Matrix coords = c.basis.transpose() * deltas;
  std::vector<Vector> nodes{Vector::Zero(c.achieved_rank)};
  for (Eigen::Index t = 0; t < coords.cols(); ++t) nodes.push_back(nodes.back() + coords.col(t));
  double diameter = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      diameter = std::max(diameter, (nodes[i] - nodes[j]).squaredNorm());
    }
  }
  diameter = std::sqrt(diameter);
  c.scale = diameter > 0.0 ? diameter : 1.0;
  for (std::size_t t = 0; t + 1 < nodes.size(); ++t) {
    c.segments.emplace_back(nodes[t] / c.scale, nodes[t + 1] / c.scale);
  }
  return c;
}

namespace {

double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

Matrix sample_directions(int dim, int n, DirectionSampling mode, std::uint64_t seed) {
  if (dim < 1) throw DomainError("dim", "must be >= 1");
  if (n < 1) throw DomainError("n_dirs", "must be >= 1");
  Matrix out(dim, n);
  if (mode == DirectionSampling::monte_carlo) {
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
      Vector u(dim);
      do {
        for (int k = 0; k < dim; ++k) u(k) = rng.normal();
      } while (u.norm() == 0.0);
      out.col(i) = u.normalized();
    }
    return out;
  }
  if (dim == 1) {
    for (int i = 0; i < n; ++i) out(0, i) = (i + static_cast<int>(seed % 2)) % 2 == 0 ? 1.0 : -1.0;
    return out;
  }
  if (dim == 2) {
    const double shift = 0.5 + std::fmod(static_cast<double>(seed) * std::numbers::phi, 1.0);
    for (int i = 0; i < n; ++i) {
      const double phi = 2.0 * std::numbers::pi * (static_cast<double>(i) + shift) / n;
      out(0, i) = std::cos(phi);
      out(1, i) = std::sin(phi);
    }
    return out;
  }
  if (dim > static_cast<int>(std::size(kPrimes))) throw RefusalError("low-discrepancy directions limited to 16 dims");
  const std::uint64_t start = 1 + seed * static_cast<std::uint64_t>(n);
  for (int i = 0; i < n; ++i) {
    Vector u(dim);
    for (int k = 0; k < dim; ++k) {
      const double p = radical_inverse(start + static_cast<std::uint64_t>(i), kPrimes[k]);
      u(k) = std::numbers::sqrt2 * boost::math::erf_inv(2.0 * p - 1.0);
    }
    out.col(i) = u.normalized();
  }
  return out;
}

Coverage directional_coverage(const Carpet& carpet, const Eigen::Ref<const Matrix>& directions, double eps) {
  if (carpet.segments.empty()) throw InsufficientDataError("directional_coverage: empty carpet");
  if (directions.rows() != carpet.dim()) throw ShapeError("direction dimension differs from carpet");
  std::vector<Vector> units;
  for (const auto& [a, b] : carpet.segments) {
    const Vector d = b - a;
    if (d.norm() > 0.0) units.push_back(d.normalized());
  }
  if (units.empty()) throw InsufficientDataError("directional_coverage: all segments are degenerate");
  Matrix v(carpet.dim(), static_cast<Eigen::Index>(units.size()));
  for (std::size_t i = 0; i < units.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = units[i];

  Coverage c;
  long covered = 0;
  const Matrix dots = (directions.transpose() * v).cwiseAbs();
  for (Eigen::Index i = 0; i < dots.rows(); ++i) {
    const double best = dots.row(i).maxCoeff();
    // 1e-12 absorbs rounding for directions that sit exactly on the threshold.
    if (best >= 1.0 - eps - 1e-12) ++covered;
    c.worst_gap = std::max(c.worst_gap, 1.0 - best);
  }
  c.covered_fraction = static_cast<double>(covered) / static_cast<double>(directions.cols());
  return c;
}

Coverage directional_coverage(const Carpet& carpet, int n_dirs, double eps, DirectionSampling mode,
                              std::uint64_t seed) {
  if (carpet.dim() < 1) throw InsufficientDataError("directional_coverage: empty carpet");
  return directional_coverage(carpet, sample_directions(carpet.dim(), n_dirs, mode, seed), eps);
}

Matrix carpet_points(const Carpet& carpet, int per_segment) {
  if (per_segment < 1) throw DomainError("per_segment", "must be >= 1");
  Matrix pts(carpet.dim(), static_cast<Eigen::Index>(carpet.segments.size()) * per_segment);
  Eigen::Index col = 0;
  for (const auto& [a, b] : carpet.segments) {
    for (int k = 0; k < per_segment; ++k) {
      const double s = static_cast<double>(k) / per_segment;
      pts.col(col++) = (1.0 - s) * a + s * b;
    }
  }
  return pts;
}

namespace {

struct BoxHash {
  std::size_t operator()(const std::vector<long long>& key) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (long long v : key) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

namespace {

long count_boxes(const Matrix& points, double s) {
  const Vector lo = points.rowwise().minCoeff();
  std::unordered_set<std::vector<long long>, BoxHash> boxes;
  std::vector<long long> key(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    for (Eigen::Index k = 0; k < points.rows(); ++k) {
      key[static_cast<std::size_t>(k)] = static_cast<long long>(std::floor((points(k, c) - lo(k)) / s));
    }
    boxes.insert(key);
  }
  return static_cast<long>(boxes.size());
}

// The input frame, then the principal frame turned through `orientations`
// angles in [0, pi/2) within the plane of its two leading axes.
std::vector<Matrix> candidate_frames(const Eigen::Ref<const Matrix>& points, int orientations) {
  std::vector<Matrix> frames{points};
  const Eigen::Index d = points.rows();
  if (orientations <= 1 || d < 2) return frames;
  const Matrix centered = points.colwise() - points.rowwise().mean();
  Eigen::SelfAdjointEigenSolver<Matrix> es(centered * centered.transpose());
  const Matrix axes = es.eigenvectors().rowwise().reverse();
  const Matrix principal = axes.transpose() * points;
  for (int k = 0; k < orientations; ++k) {
    const double th = 0.5 * std::numbers::pi * k / orientations;
    Matrix turned = principal;
    turned.row(0) = std::cos(th) * principal.row(0) - std::sin(th) * principal.row(1);
    turned.row(1) = std::sin(th) * principal.row(0) + std::cos(th) * principal.row(1);
    frames.push_back(std::move(turned));
  }
  return frames;
}

}  // namespace

BoxDimension box_counting_dimension(const Eigen::Ref<const Matrix>& points, const std::vector<double>& scales,
                                    int orientations) {
  if (scales.size() < 2) throw DomainError("scales", "need at least two scales");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0)) throw DomainError("scales", "must be positive");
    if (i > 0 && !(scales[i] < scales[i - 1])) throw DomainError("scales", "must be strictly decreasing");
  }
  if (orientations < 1) throw DomainError("orientations", "must be >= 1");
  BoxDimension r;
  if (points.cols() == 0) throw InsufficientDataError("box_counting_dimension: no points");
  const Vector lo = points.rowwise().minCoeff();
  const Vector hi = points.rowwise().maxCoeff();
  if ((hi - lo).isZero(0.0)) {
    r.degenerate = true;
    r.counts.assign(scales.size(), 1);
    return r;
  }
  if (points.cols() < 100) throw InsufficientDataError("box_counting_dimension: need >= 100 points");

  const std::vector<Matrix> frames = candidate_frames(points, orientations);
  std::vector<double> xs;
  std::vector<double> ys;
  for (double s : scales) {
    long best = std::numeric_limits<long>::max();
    for (const Matrix& f : frames) best = std::min(best, count_boxes(f, s));
    r.counts.push_back(best);
    xs.push_back(std::log(scales.front() / s));
    ys.push_back(std::log(static_cast<double>(best)));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  r.dim_estimate = sxy / sxx;
  return r;
}

long covering_number(const Eigen::Ref<const Matrix>& points, double eps) {
  if (!(eps > 0.0)) throw DomainError("eps", "must be > 0");
  const Eigen::Index n = points.cols();
  std::vector<char> covered(static_cast<std::size_t>(n), 0);
  long count = 0;
  const double eps2 = eps * eps;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (covered[static_cast<std::size_t>(i)]) continue;
    ++count;
    for (Eigen::Index j = i; j < n; ++j) {
      if (!covered[static_cast<std::size_t>(j)] && (points.col(j) - points.col(i)).squaredNorm() <= eps2) {
        covered[static_cast<std::size_t>(j)] = 1;
      }
    }
  }
  return count;
}

DudleyGap dudley_gap(std::vector<std::pair<double, double>> cover_counts, long n_samples,
                     double lipschitz_product, std::optional<double> B_step, std::optional<double> d_eff) {
  if (n_samples < 1) throw DomainError("n_samples", "must be >= 1");
  if (cover_counts.empty()) throw InsufficientDataError("dudley_gap: empty grid");
  std::sort(cover_counts.begin(), cover_counts.end());
  for (const auto& [eps, count] : cover_counts) {
    if (!(eps > 0.0)) throw DomainError("eps", "must be > 0");
    if (!(count >= 1.0)) throw DomainError("count", "cover counts must be >= 1");
  }
  const double n = static_cast<double>(n_samples);
  auto integrand = [n](double count) { return std::sqrt(std::log(count) / n); };
  double integral = cover_counts.front().first * integrand(cover_counts.front().second);
  for (std::size_t i = 1; i < cover_counts.size(); ++i) {
    const double h = cover_counts[i].first - cover_counts[i - 1].first;
    integral += 0.5 * h * (integrand(cover_counts[i].second) + integrand(cover_counts[i - 1].second));
  }
  DudleyGap g;
  g.value = lipschitz_product * 12.0 * integral;
  if (B_step && d_eff) g.closed_form = lipschitz_product * 12.0 * *B_step * std::sqrt(*d_eff / n);
  return g;
}

std::vector<double> signed_threshold_column(const std::vector<double>& alphas, double sigma, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda", "must be > 0");
  std::vector<double> out;
  out.reserve(alphas.size());
  for (double a : alphas) out.push_back(a * std::sqrt(sigma * sigma / lambda));
  return out;
}

void write_carpet(std::ostream& os, const Carpet& carpet) {
  auto vec = [](const Vector& v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += format_double(v(i));
    }
    return s + ']';
  };
  for (std::size_t t = 0; t < carpet.segments.size(); ++t) {
    os << "{\"t\":" << t << ",\"start\":" << vec(carpet.segments[t].first)
       << ",\"end\":" << vec(carpet.segments[t].second) << "}\n";
  }
}

}  // namespace relulab
