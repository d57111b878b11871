#include "relulab/arrangement.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <boost/multiprecision/cpp_int.hpp>

#include "relulab/bounds.hpp"
#include "relulab/errors.hpp"

namespace relulab {

namespace {

using boost::multiprecision::cpp_int;

// sum_j coeff[j] x_j + constant > 0
struct Strict {
  std::vector<cpp_int> coeff;
  cpp_int constant;

  friend bool operator<(const Strict& a, const Strict& b) {
    if (a.coeff != b.coeff) return a.coeff < b.coeff;
    return a.constant < b.constant;
  }
  friend bool operator==(const Strict&, const Strict&) = default;
};

cpp_int snap(double x) {
  // Dyadic snapping: x ~ k / 2^40 with k integral.
  const double scaled = std::nearbyint(std::ldexp(x, 40));
  return cpp_int(scaled);
}

void normalize(Strict& s) {
  cpp_int g = boost::multiprecision::abs(s.constant);
  for (const auto& c : s.coeff) g = boost::multiprecision::gcd(g, boost::multiprecision::abs(c));
  if (g > 1) {
    for (auto& c : s.coeff) c /= g;
    s.constant /= g;
  }
}

bool all_zero(const Strict& s, std::size_t vars) {
  for (std::size_t j = 0; j < vars; ++j) {
    if (s.coeff[j] != 0) return false;
  }
  return true;
}

// Fourier-Motzkin on strict inequalities. Every derived inequality stays
// strict, so the open system is feasible iff the last one-variable system is.
bool feasible(std::vector<Strict> sys, std::size_t dim) {
  for (std::size_t vars = dim; vars > 1; --vars) {
    const std::size_t k = vars - 1;
    std::vector<Strict> pos, neg, next;
    for (auto& s : sys) {
      if (s.coeff[k] > 0) {
        pos.push_back(std::move(s));
      } else if (s.coeff[k] < 0) {
        neg.push_back(std::move(s));
      } else if (all_zero(s, vars)) {
        if (s.constant <= 0) return false;
      } else {
        next.push_back(std::move(s));
      }
    }
    for (const auto& p : pos) {
      for (const auto& q : neg) {
        const cpp_int wp = -q.coeff[k];
        const cpp_int wq = p.coeff[k];
        Strict r;
        r.coeff.resize(k);
        for (std::size_t j = 0; j < k; ++j) r.coeff[j] = wp * p.coeff[j] + wq * q.coeff[j];
        r.constant = wp * p.constant + wq * q.constant;
        if (all_zero(r, k)) {
          if (r.constant <= 0) return false;
          continue;
        }
        normalize(r);
        next.push_back(std::move(r));
      }
    }
    for (auto& s : next) s.coeff.resize(k);
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    sys = std::move(next);
  }
  if (dim == 0) {
    return std::all_of(sys.begin(), sys.end(), [](const Strict& s) { return s.constant > 0; });
  }
  // One variable left: x > -c/a for a > 0, x < c/(-a) for a < 0.
  const Strict* lower = nullptr;
  const Strict* upper = nullptr;
  for (const auto& s : sys) {
    const cpp_int& a = s.coeff[0];
    if (a == 0) {
      if (s.constant <= 0) return false;
    } else if (a > 0) {
      // -c1/a1 > -c2/a2  <=>  c1 a2 < c2 a1
      if (!lower || s.constant * lower->coeff[0] < lower->constant * a) lower = &s;
    } else {
      // c1/(-a1) < c2/(-a2)  <=>  c1 (-a2) < c2 (-a1)
      if (!upper || s.constant * -upper->coeff[0] < upper->constant * -a) upper = &s;
    }
  }
  if (!lower || !upper) return true;
  // -cl/al < cu/(-au)  <=>  cl * au < cu * al
  return lower->constant * upper->coeff[0] < upper->constant * lower->coeff[0];
}

Strict oriented(const Arrangement& arr, std::size_t i, std::int8_t sign) {
  Strict s;
  s.coeff.reserve(static_cast<std::size_t>(arr.dim));
  for (double w : arr.planes[i].normal) s.coeff.push_back(sign > 0 ? snap(w) : cpp_int(-snap(w)));
  const cpp_int b = snap(arr.planes[i].offset);
  s.constant = sign > 0 ? cpp_int(-b) : b;
  normalize(s);
  return s;
}

}  // namespace

void Arrangement::validate() const {
  if (dim < 0) throw DomainError("dim", "must be >= 0");
  if (dim > kMaxArrangementDim || planes.size() > static_cast<std::size_t>(kMaxArrangementPlanes)) {
    throw RefusalError("arrangement exceeds the enumeration limits (d <= " +
                       std::to_string(kMaxArrangementDim) + ", N <= " +
                       std::to_string(kMaxArrangementPlanes) + ")");
  }
  for (const auto& p : planes) {
    if (p.normal.size() != static_cast<std::size_t>(dim)) throw ShapeError("hyperplane normal has wrong length");
    if (std::all_of(p.normal.begin(), p.normal.end(), [](double w) { return snap(w) == 0; })) {
      throw DomainError("normal", "hyperplane normal is zero");
    }
    if (!std::isfinite(p.offset)) throw DomainError("offset", "not finite");
  }
}

bool cell_is_feasible(const Arrangement& arr, const SignVector& signs) {
  arr.validate();
  if (signs.size() != arr.planes.size()) throw ShapeError("sign vector length differs from N");
  std::vector<Strict> sys;
  for (std::size_t i = 0; i < signs.size(); ++i) sys.push_back(oriented(arr, i, signs[i]));
  return feasible(std::move(sys), static_cast<std::size_t>(arr.dim));
}

Regions enumerate_regions(const Arrangement& arr) {
  arr.validate();
  const auto dim = static_cast<std::size_t>(arr.dim);
  // Grow cells one hyperplane at a time; only feasible prefixes are extended.
  std::vector<std::pair<SignVector, std::vector<Strict>>> frontier{{{}, {}}};
  for (std::size_t i = 0; i < arr.planes.size(); ++i) {
    std::vector<std::pair<SignVector, std::vector<Strict>>> next;
    for (const auto& [signs, sys] : frontier) {
      for (std::int8_t s : {std::int8_t{-1}, std::int8_t{1}}) {
        auto grown = sys;
        grown.push_back(oriented(arr, i, s));
        if (!feasible(grown, dim)) continue;
        SignVector sv = signs;
        sv.push_back(s);
        next.emplace_back(std::move(sv), std::move(grown));
      }
    }
    frontier = std::move(next);
  }
  Regions r;
  for (auto& [signs, sys] : frontier) r.cells.push_back(std::move(signs));
  std::sort(r.cells.begin(), r.cells.end());
  r.count = static_cast<long>(r.cells.size());
  return r;
}

TopeGraph tope_graph(const std::vector<SignVector>& cells) {
  if (cells.empty()) throw InsufficientDataError("tope_graph: no cells");
  const std::size_t n = cells.size();
  TopeGraph g;
  std::vector<std::vector<int>> adj(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (cells[a].size() != cells[b].size()) throw ShapeError("cells of different length");
      long diff = 0;
      for (std::size_t i = 0; i < cells[a].size() && diff < 2; ++i) diff += cells[a][i] != cells[b][i];
      if (diff == 1) {
        g.edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
        adj[a].push_back(static_cast<int>(b));
        adj[b].push_back(static_cast<int>(a));
      }
    }
  }
  std::vector<long> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<int> queue{static_cast<int>(s)};
    dist[s] = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      g.diameter = std::max(g.diameter, dist[static_cast<std::size_t>(u)]);
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return g;
}

ZaslavskyCheck verify_zaslavsky(const Arrangement& arr) {
  ZaslavskyCheck c;
  c.exact = enumerate_regions(arr).count;
  c.bound = zaslavsky(static_cast<long>(arr.planes.size()), arr.dim).convert_to<long>();
  c.tight = c.exact == c.bound;
  return c;
}

namespace {

std::uint32_t to_mask(const std::vector<std::uint8_t>& bits) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) m |= 1u << i;
  }
  return m;
}

std::vector<long> sparse_bfs(std::uint32_t start, int bits, int k) {
  std::vector<long> dist(std::size_t{1} << bits, -1);
  std::deque<std::uint32_t> queue{start};
  dist[start] = 0;
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    for (int i = 0; i < bits; ++i) {
      const std::uint32_t v = u ^ (1u << i);
      if (std::popcount(v) > k || dist[v] >= 0) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

void check_sparse_args(int bits, int k) {
  if (bits < 0 || bits > 20) throw RefusalError("sparse tope graph limited to 20 units");
  if (k < 0) throw DomainError("k", "must be >= 0");
}

}  // namespace

long sparse_tope_distance(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, int k) {
  if (a.size() != b.size()) throw ShapeError("patterns differ in length");
  const int bits = static_cast<int>(a.size());
  check_sparse_args(bits, k);
  const std::uint32_t ma = to_mask(a);
  const std::uint32_t mb = to_mask(b);
  if (std::popcount(ma) > k || std::popcount(mb) > k) throw DomainError("k", "pattern has more than k active units");
  return sparse_bfs(ma, bits, k)[mb];
}

SparseTopeDiameter sparse_tope_diameter(int bits, int k) {
  check_sparse_args(bits, k);
  SparseTopeDiameter d;
  for (std::uint32_t u = 0; u < (1u << bits); ++u) {
    if (std::popcount(u) > k) continue;
    ++d.vertices;
    const auto dist = sparse_bfs(u, bits, k);
    for (std::uint32_t v = 0; v < (1u << bits); ++v) {
      if (dist[v] < 0) continue;
      d.overall = std::max(d.overall, dist[v]);
      if (std::popcount(u) == k && std::popcount(v) == k) d.exactly_k = std::max(d.exactly_k, dist[v]);
    }
  }
  return d;
}

Arrangement read_arrangement(std::istream& is) {
  Arrangement arr;
  long n = 0;
  if (!(is >> arr.dim >> n) || n < 0) throw ConfigError("arrangement file: expected header 'd N'");
  if (arr.dim > kMaxArrangementDim || n > kMaxArrangementPlanes) {
    throw RefusalError("arrangement exceeds the enumeration limits");
  }
  for (long i = 0; i < n; ++i) {
    Hyperplane h;
    h.normal.resize(static_cast<std::size_t>(arr.dim));
    for (auto& w : h.normal) {
      if (!(is >> w)) throw ConfigError("arrangement file: truncated hyperplane " + std::to_string(i));
    }
    if (!(is >> h.offset)) throw ConfigError("arrangement file: missing offset " + std::to_string(i));
    arr.planes.push_back(std::move(h));
  }
  arr.validate();
  return arr;
}

void write_arrangement(std::ostream& os, const Arrangement& arr) {
  os << arr.dim << ' ' << arr.planes.size() << '\n';
  os.precision(17);
  for (const auto& p : arr.planes) {
    for (double w : p.normal) os << w << ' ';
    os << p.offset << '\n';
  }
}

}  // namespace relulab
