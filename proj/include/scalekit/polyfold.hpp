#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scalekit/splicing.hpp"

namespace scalekit {

struct Chart {
  std::string name;
  LocalModel model;
};

// Transition between chart coordinates on the overlap of charts a and b.
struct Overlap {
  std::size_t a = 0, b = 0;
  MapPtr transition;  // a-coordinates -> b-coordinates
  MapPtr inverse;     // b-coordinates -> a-coordinates
  std::string label;
  bool nontrivial = true;
};

struct ChartPoint {
  std::size_t chart = 0;
  Point x;  // (v, e) in the chart's model
};

struct ChartComplex {
  std::vector<Chart> charts;
  std::vector<Overlap> overlaps;
  std::vector<ChartPoint> samples;
  std::vector<std::pair<std::size_t, std::size_t>> adjacency;  // between samples
};

// Number of quadrant coordinates of v that vanish (|.| <= tau).
int degeneracy_index(const Chart& c, const Point& x, double tau = 1e-9);

// Points of the chart's model; each corner coordinate is zeroed with probability zero_fraction.
std::vector<Point> sample_chart(const Chart& c, std::size_t n, std::mt19937_64& rng, double zero_fraction = 0.4);

struct OverlapFinding {
  std::size_t overlap = 0;
  Point x;
  int da = 0, db = 0;
  double roundtrip = 0.0;
};

struct InvarianceReport {
  std::size_t samples = 0;
  std::size_t nontrivial_transitions = 0;
  std::vector<OverlapFinding> mismatches;
  double worst_roundtrip = 0.0;
  bool transitions_certified = false;
  std::string certification_failure;
  bool pass = false;
};

// d in chart a versus d of the transported point in chart b, on samples of every overlap.
InvarianceReport degeneracy_invariance(const ChartComplex& cc, std::size_t samples_per_overlap = 24,
                                       std::uint64_t seed = 0x5eed, double tau = 1e-9);

struct SemicontinuityReport {
  int d_center = 0;
  std::vector<int> neighbors;
  double radius = 0.0;
  bool pass = false;
};

// d(y) <= d(x) for y sampled within radius of x (inside the chart's model).
SemicontinuityReport lower_semicontinuity(const Chart& c, const Point& x, std::size_t samples = 64,
                                          std::uint64_t seed = 0x5eed, double radius = 1e-3);

struct FaceReport {
  std::size_t faces = 0;
  std::vector<int> d;                     // per sample
  std::vector<std::size_t> face_count;    // per sample
  std::vector<std::size_t> offending;     // samples whose face count differs from d
  bool face_structured = false;
};

// Faces of a finite sampled complex: components of {d = 1} under the adjacency, closed by the adjacent
// points with d >= 2.
FaceReport faces(const ChartComplex& cc);

// [0,inf)^dim sampled on a grid, 4-neighbour adjacency.
ChartComplex quadrant_complex(std::size_t dim, std::size_t grid);
// [0,inf)^2 with its two boundary rays glued: one face that meets itself at the corner.
ChartComplex teardrop_complex(std::size_t grid);
// Six nontrivial transitions (and one identity) between corner charts, some with infinite-dimensional fibers.
ChartComplex corner_corpus();

struct ProductDegeneracyReport {
  std::size_t pairs = 0;
  std::vector<std::array<int, 3>> values;  // d_X, d_Y, d_{X x Y}
  bool additive = false;
};

Chart product_chart(const Chart& x, const Chart& y);
Point product_point(const Chart& x, const Point& px, const Chart& y, const Point& py);
ProductDegeneracyReport product_degeneracy(const Chart& x, const Chart& y,
                                           const std::vector<std::pair<Point, Point>>& pairs);

// ---------------------------------------------------------------- fred-submersions

// Charts exhibiting f : X -> Y as psi o f o phi^{-1}(v, e, e'') = (v, e).
// source: model of T (+) R^n, target: model of T.
struct FredWitness {
  LocalModel source, target;
  MapPtr phi, phi_inv;  // X <-> source coordinates
  MapPtr psi, psi_inv;  // Y <-> target coordinates
  std::size_t kept_blocks = 0;  // leading blocks of the source kept by the projection
  std::size_t n = 0;            // dimension of the dropped blocks
};

// Identity charts around the model projection T (+) R^n -> T.
FredWitness projection_witness(const SplicingPtr& t, std::size_t n);
// The model projection itself, source ambient -> target ambient.
MapPtr projection_map(const FredWitness& w);

struct FredReport {
  bool pass = false;
  std::size_t samples = 0;
  double worst = 0.0;
  std::size_t n = 0;
  std::string failure;
};

FredReport fred_submersion_check(const MapPtr& f, const FredWitness& w, std::size_t samples = 32,
                                 std::uint64_t seed = 0x5eed, double tol = 1e-10);

// Witness for g o f from witnesses of f and g, with gamma^{-1}(w,h,h',e') = phi^{-1}(psi o beta^{-1}(w,h,h'), e').
FredWitness fred_submersion_compose(const FredWitness& wf, const FredWitness& wg, std::size_t samples = 16,
                                    std::uint64_t seed = 0x5eed);

struct PreimageChart {
  Point base;      // (v0, e0) = psi(y)
  MapPtr chart;    // R^n -> X
  std::size_t n = 0;
};

struct PreimageReport {
  std::vector<PreimageChart> charts;
  std::size_t n = 0;
  bool n_constant = false;
  double worst_fd = 0.0;       // second-order finite-difference consistency of transitions
  double worst_base = 0.0;     // transitions keep (v0, e0)
  bool smooth = false;
  bool membership_ok = false;  // f^{-1}(f(m)) = N on samples
  bool pass = false;
};

PreimageReport preimage_charts(const MapPtr& f, const std::vector<FredWitness>& witnesses, const Point& y,
                               std::size_t samples = 16, std::uint64_t seed = 0x5eed, double tol = 1e-6);

}  // namespace scalekit
