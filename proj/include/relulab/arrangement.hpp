#pragma once

// Exact region enumeration for small affine hyperplane arrangements, plus
// tope-graph distances. Used as a ground-truth oracle for the combinatorial
// crossing bounds.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace relulab {

constexpr int kMaxArrangementDim = 4;
constexpr int kMaxArrangementPlanes = 12;

struct Hyperplane {
  std::vector<double> normal;
  double offset = 0.0;  // the plane is <normal, x> = offset
};

/// Hyperplanes in R^d. Coordinates are snapped to dyadic rationals with
/// denominator 2^40 before any exact computation.
struct Arrangement {
  int dim = 0;
  std::vector<Hyperplane> planes;

  void validate() const;
};

/// One entry per hyperplane, each -1 or +1.
using SignVector = std::vector<std::int8_t>;

struct Regions {
  long count = 0;
  std::vector<SignVector> cells;  // lexicographic, -1 < +1
};

/// Every sign vector whose open cell {x : s_i(<w_i,x> - b_i) > 0} is nonempty.
Regions enumerate_regions(const Arrangement& arr);

/// Exact feasibility of one open cell.
bool cell_is_feasible(const Arrangement& arr, const SignVector& signs);

struct TopeGraph {
  std::vector<std::pair<int, int>> edges;  // cells at Hamming distance 1
  long diameter = 0;                       // over connected pairs
};

TopeGraph tope_graph(const std::vector<SignVector>& cells);

struct ZaslavskyCheck {
  long exact = 0;
  long bound = 0;
  bool tight = false;
};

ZaslavskyCheck verify_zaslavsky(const Arrangement& arr);

/// Graph distance between two binary activation patterns in the k-sparse tope
/// graph (vertices: patterns with at most k ones; edges: single-bit flips).
long sparse_tope_distance(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, int k);

struct SparseTopeDiameter {
  long exactly_k = 0;  // max distance between patterns with exactly k ones
  long overall = 0;    // max distance over the whole graph
  long vertices = 0;
};

/// Exhaustive BFS over all patterns on `bits` units with at most k ones.
SparseTopeDiameter sparse_tope_diameter(int bits, int k);

/// Text format: first line "d N", then N lines of d+1 numbers (normal, offset).
Arrangement read_arrangement(std::istream& is);
void write_arrangement(std::ostream& os, const Arrangement& arr);

}  // namespace relulab
