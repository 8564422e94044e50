#pragma once

#include <string>
#include <vector>

#include "scalekit/bundle.hpp"
#include "scalekit/polyfold.hpp"

// Fixed families of test objects shared by the CLI suites and the acceptance run.
namespace scalekit::corpus {

struct OperatorPair {
  std::string name;
  ScOperator t, r;  // Fredholm operator and sc+ perturbation
};
std::vector<OperatorPair> scplus_pairs();

struct RegularCase {
  std::string name;
  ScOperator t;
  QVector e;
  int level = 0;
};
std::vector<RegularCase> regularizing_cases();

// g after f, with tangent points at dyadic coordinates (exactly representable).
struct MapPair {
  std::string name;
  MapPtr f, g;
  std::vector<TangentPoint> points;
};
// Polynomial pairs on finite and sequence scales; usable in both regimes.
std::vector<MapPair> flat_chain_pairs();
// Pairs with a transcendental factor; float regime only.
std::vector<MapPair> transcendental_chain_pairs();

struct CorePair {
  std::string name;
  CoreMap f, g;
  std::vector<TangentSample> points;
  bool exact = false;
};
std::vector<CorePair> core_chain_pairs();

struct FredComposite {
  MapPtr f, g;
  FredWitness wf, wg;
};
FredComposite fred_composite();

struct PreimageCase {
  MapPtr f;
  std::vector<FredWitness> witnesses;
  Point y;
};
PreimageCase preimage_case();

struct FillCase {
  std::string name;
  FillableBundle bundle;
  Section section;
  std::vector<Point> grid;
  Point q;
};
std::vector<FillCase> fill_cases();

struct LinearizationTriple {
  std::string name;
  Section f, s, t;
  Point q;
};
std::vector<LinearizationTriple> linearization_triples();

// Bundle maps over the trivial bundle: (identity on the base, fiber map).
struct BundleMapCase {
  std::string name;
  BundlePtr bundle;
  MapPtr phi, fiber;
  std::string expected;  // classification
};
std::vector<BundleMapCase> bundle_map_cases();

struct PullbackCase {
  std::string name;
  BundlePtr bundle;
  LocalModel base;
  MapPtr f;
};
std::vector<PullbackCase> pullback_cases();

// ---------------------------------------------------------------- negative controls

// Joint map of the broken rank-jump family at a point just past a jump.
struct Sc1Control {
  MapPtr map;
  Point x;
};
Sc1Control broken_rank_jump_control(std::uint64_t seed = 7);
// x + x0 x1 e0 with its derivative doubled.
Sc1Control wrong_derivative_control();
// u + e over the trivial bundle: every view-0 check passes, view 1 loses a level.
BundleMapCase level_losing_control();

// Chart on [0,inf)^dim x E with the listed quadrant coordinates.
Chart quadrant_chart(std::size_t dim, const std::vector<std::size_t>& corners);

}  // namespace scalekit::corpus
