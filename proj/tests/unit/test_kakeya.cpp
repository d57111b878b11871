#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "../oracles.hpp"
#include "relulab/errors.hpp"
#include "relulab/kakeya.hpp"

using namespace relulab;

namespace {

Matrix deltas_at_angles(std::initializer_list<double> degrees) {
  Matrix d(2, static_cast<Eigen::Index>(degrees.size()));
  Eigen::Index c = 0;
  for (double deg : degrees) {
    const double r = deg * std::numbers::pi / 180.0;
    d.col(c++) << std::cos(r), std::sin(r);
  }
  return d;
}

Matrix rotate2(const Matrix& pts, double th) {
  Eigen::Matrix2d r;
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return r * pts;
}

std::vector<double> dyadic_scales(int from, int to) {
  std::vector<double> s;
  for (int k = from; k <= to; ++k) s.push_back(std::ldexp(1.0, -k));
  return s;
}

// Optimal 1-d cover by radius-eps balls with free centres.
long optimal_interval_cover(std::vector<double> xs, double eps) {
  std::sort(xs.begin(), xs.end());
  long n = 0;
  std::size_t i = 0;
  while (i < xs.size()) {
    const double reach = xs[i] + 2.0 * eps;
    ++n;
    while (i < xs.size() && xs[i] <= reach) ++i;
  }
  return n;
}

}  // namespace

TEST_SUITE("kakeya") {
  TEST_CASE("carpet along one axis") {
    Matrix d = Matrix::Zero(5, 6);
    for (int c = 0; c < 6; ++c) d(3, c) = (c % 2 ? -1.0 : 2.0) * (c + 1);
    const Carpet k = build_carpet(d, 1);
    REQUIRE(k.dim() == 1);
    CHECK(std::abs(k.basis(3, 0) - 1.0) < 1e-12);
    CHECK(k.basis.col(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(k.segments.size() == 6);
  }

  TEST_CASE("carpet recovers a 2-plane in 10 dims") {
    Rng rng(31);
    Matrix q(10, 2);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
    const Matrix Q = Eigen::HouseholderQR<Matrix>(q).householderQ() * Matrix::Identity(10, 2);
    Matrix coeffs(2, 40);
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs.data()[i] = rng.normal();
    const Carpet k = build_carpet(Q * coeffs, 2);
    REQUIRE(k.achieved_rank == 2);
    const Matrix gram = k.basis.transpose() * k.basis;
    CHECK((gram - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    const Vector cosines = Eigen::JacobiSVD<Matrix>(Q.transpose() * k.basis).singularValues();
    for (Eigen::Index i = 0; i < cosines.size(); ++i) {
      CHECK(std::acos(std::min(1.0, cosines(i))) < 1e-6);
    }

    const Carpet over = build_carpet(Q * coeffs, 4);
    CHECK(over.reduced_rank());
    CHECK(over.achieved_rank == 2);
  }

  TEST_CASE("carpet has unit diameter") {
    Rng rng(2);
    Matrix d(4, 30);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = 5.0 * rng.normal();
    const Carpet k = build_carpet(d, 3);
    std::vector<Vector> nodes{k.segments.front().first};
    for (const auto& s : k.segments) nodes.push_back(s.second);
    double diam = 0.0;
    for (const auto& a : nodes)
      for (const auto& b : nodes) diam = std::max(diam, (a - b).norm());
    CHECK(diam == doctest::Approx(1.0).epsilon(1e-12));
    std::ostringstream os;
    write_carpet(os, k);
    const std::string dump = os.str();
    CHECK(std::count(dump.begin(), dump.end(), '\n') == 30);
  }

  TEST_CASE("zero deltas are rejected") {
    CHECK_THROWS_AS(build_carpet(Matrix::Zero(4, 5), 2), InsufficientDataError);
  }

  TEST_CASE("coverage examples") {
    const Carpet line = build_carpet(deltas_at_angles({30.0, 30.0}), 1);
    CHECK(directional_coverage(line, 2, 0.0).covered_fraction == 1.0);

    const Carpet star = build_carpet(deltas_at_angles({0.0, 45.0, 90.0, 135.0}), 2);
    const double eps = 1.0 - std::cos(22.5 * std::numbers::pi / 180.0);
    CHECK(directional_coverage(star, 2000, eps).covered_fraction == 1.0);

    const Carpet cross = build_carpet(deltas_at_angles({0.0, 90.0}), 2);
    const Matrix u = sample_directions(2, 999, DirectionSampling::monte_carlo, 4);
    const Coverage plus = directional_coverage(cross, u, 0.3);
    const Coverage minus = directional_coverage(cross, -u, 0.3);
    CHECK(plus.covered_fraction == minus.covered_fraction);
    CHECK(plus.worst_gap == minus.worst_gap);
    // Arc measure: within acos(0.7) of either axis, on each of four quadrants.
    const double arc = std::min(1.0, 8.0 * std::acos(0.7) / (2.0 * std::numbers::pi));
    CHECK(directional_coverage(cross, 4096, 0.3).covered_fraction == doctest::Approx(arc).epsilon(0.01));
  }

  TEST_CASE("coverage grows with eps and is total at eps 1") {
    Rng rng(17);
    Matrix d(3, 12);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = rng.normal();
    const Carpet k = build_carpet(d, 3);
    double prev = -1.0;
    for (double eps = 0.0; eps <= 1.0; eps += 0.05) {
      const double f = directional_coverage(k, 500, eps).covered_fraction;
      REQUIRE(f >= prev);
      prev = f;
    }
    CHECK(directional_coverage(k, 500, 1.0).covered_fraction == 1.0);
  }

  TEST_CASE("direction sampler") {
    const Matrix u = sample_directions(5, 300, DirectionSampling::low_discrepancy, 3);
    for (Eigen::Index c = 0; c < u.cols(); ++c) REQUIRE(u.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(u == sample_directions(5, 300, DirectionSampling::low_discrepancy, 3));
    CHECK_FALSE(u == sample_directions(5, 300, DirectionSampling::low_discrepancy, 4));
    CHECK(u.rowwise().mean().norm() < 0.1);
    CHECK_THROWS(sample_directions(2, 0));
  }

  TEST_CASE("box counting on a segment and a square") {
    Matrix seg(2, 10000);
    for (int i = 0; i < 10000; ++i) seg.col(i) << i / 9999.0 * 0.8 + 0.1, 0.3;
    const auto scales = dyadic_scales(3, 7);
    const auto s = box_counting_dimension(seg, scales);
    CHECK(s.dim_estimate >= 0.85);
    CHECK(s.dim_estimate <= 1.15);

    Matrix sq(2, 10000);
    for (int i = 0; i < 100; ++i)
      for (int j = 0; j < 100; ++j) sq.col(100 * i + j) << (i + 0.5) / 100.0, (j + 0.5) / 100.0;
    const auto q = box_counting_dimension(sq, scales);
    CHECK(q.dim_estimate >= 1.85);
    CHECK(q.dim_estimate <= 2.15);

    const auto one = box_counting_dimension(Matrix::Constant(2, 1, 0.5), scales);
    CHECK(one.dim_estimate == 0.0);
    CHECK(one.degenerate);
    CHECK_THROWS_AS(box_counting_dimension(seg.leftCols(50), scales), InsufficientDataError);
    CHECK_THROWS_AS(box_counting_dimension(seg, {0.1}), DomainError);
    CHECK_THROWS_AS(box_counting_dimension(seg, {0.1, 0.2}), DomainError);
  }

  TEST_CASE("box counting invariances") {
    Rng rng(9);
    Matrix pts(2, 5000);
    for (int i = 0; i < 5000; ++i) {
      const double t = rng.uniform();
      pts.col(i) << t, t * t;
    }
    const auto scales = dyadic_scales(3, 7);
    const double base = box_counting_dimension(pts, scales).dim_estimate;
    CHECK(std::abs(box_counting_dimension(rotate2(pts, 0.6), scales).dim_estimate - base) < 0.05);

    std::vector<double> doubled;
    for (double s : scales) doubled.push_back(2.0 * s);
    const Matrix big = 2.0 * pts;
    const auto a = box_counting_dimension(pts, scales);
    const auto b = box_counting_dimension(big, doubled);
    CHECK(a.counts == b.counts);
    CHECK(a.dim_estimate == b.dim_estimate);
  }

  TEST_CASE("covering numbers") {
    CHECK(covering_number(Matrix::Constant(3, 7, 1.5), 0.1) == 1);
    Matrix two(1, 2);
    two << 0.0, 3.0;
    CHECK(covering_number(two, 1.0) == 2);

    Matrix seg(1, 2001);
    for (int i = 0; i <= 2000; ++i) seg(0, i) = i / 2000.0;
    const long c = covering_number(seg, 0.1);
    CHECK(c >= 5);
    CHECK(c <= 11);

    Rng rng(14);
    Matrix cloud(2, 400);
    for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud.data()[i] = rng.uniform();
    long prev = covering_number(cloud, 0.01);
    for (double eps = 0.02; eps < 1.5; eps *= 1.3) {
      const long n = covering_number(cloud, eps);
      REQUIRE(n <= prev);
      prev = n;
    }

    for (int trial = 0; trial < 40; ++trial) {
      std::vector<double> xs;
      Matrix pts(1, 60);
      for (int i = 0; i < 60; ++i) {
        xs.push_back(rng.uniform(0.0, 5.0));
        pts(0, i) = xs.back();
      }
      const double eps = rng.uniform(0.05, 1.0);
      REQUIRE(covering_number(pts, eps) <= 2 * optimal_interval_cover(xs, eps));
    }
  }

  TEST_CASE("Dudley integral") {
    std::vector<std::pair<double, double>> flat;
    for (int k = 0; k <= 10; ++k) flat.emplace_back(std::ldexp(1.0, -k), 1.0);
    CHECK(dudley_gap(flat, 10, 1.0).value == 0.0);

    std::vector<std::pair<double, double>> grid;
    for (int k = 1; k <= 2000; ++k) grid.emplace_back(k / 2000.0, std::sqrt(2000.0 / k));
    for (int j = 12; j <= 40; ++j) grid.emplace_back(std::ldexp(1.0, -j), std::ldexp(1.0, j / 2) * (j % 2 ? std::sqrt(2.0) : 1.0));
    const double fine = oracle::midpoint([](double e) { return 12.0 * std::sqrt(0.5 * std::log(1.0 / e)); }, 0.0, 1.0, 2000000);
    const double trap = dudley_gap(grid, 1, 1.0).value;
    CHECK(std::abs(trap - fine) <= 0.01 * fine);
    CHECK(std::abs(fine / 12.0 - std::sqrt(std::numbers::pi) / (2.0 * std::sqrt(2.0))) < 1e-3);

    CHECK(dudley_gap(grid, 2, 1.0).value * std::sqrt(2.0) == doctest::Approx(trap).epsilon(1e-13));
    CHECK(dudley_gap(grid, 1, 3.0).value == doctest::Approx(3.0 * trap).epsilon(1e-13));

    const auto cf = dudley_gap(grid, 16, 2.0, 1.0, 4.0);
    REQUIRE(cf.closed_form.has_value());
    CHECK(*cf.closed_form == doctest::Approx(2.0 * 12.0 * std::sqrt(4.0 / 16.0)));

    CHECK_THROWS_AS(dudley_gap({{1.0, 0.5}, {0.5, 2.0}}, 1, 1.0), DomainError);
  }

  TEST_CASE("signed threshold column") {
    const auto c = signed_threshold_column({0.5, 0.25}, 2.0, 4.0);
    CHECK(c[0] == doctest::Approx(0.5));
    CHECK(c[1] == doctest::Approx(0.25));
  }
}
