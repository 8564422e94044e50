#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scalekit/splicing.hpp"

namespace scalekit {

// rho : O (+) F -> F, a projection rho_w for every w = (v, e) in O, with a one-level fiber gain.
class StrongBundleSplicing {
 public:
  StrongBundleSplicing(LocalModel base, ProductSpace fiber) : base_(std::move(base)), f_(std::move(fiber)) {}
  virtual ~StrongBundleSplicing() = default;

  const LocalModel& base() const { return base_; }
  const ProductSpace& fiber() const { return f_; }
  // W + E + F, the fiber shifted by `view` levels (0: K(0), 1: K(1)).
  ProductSpace total_space(int view = 0) const;

  virtual std::string kind() const = 0;
  virtual Point rho(const Point& w, const Point& u) const = 0;
  // D rho(w,u)(dw,du)
  virtual Point d_rho(const Point& w, const Point& dw, const Point& u, const Point& du) const = 0;
  // rho_w as an operator on F, when available.
  virtual std::optional<BlockOperator> rho_operator(const Point&) const { return std::nullopt; }
  // derivative of w -> rho(w, u) as an operator W + E -> F, when available.
  virtual std::optional<BlockOperator> base_derivative(const Point&, const Point&) const { return std::nullopt; }
  virtual std::optional<std::size_t> rank(const Point& w) const = 0;
  virtual std::optional<std::size_t> corank(const Point& w) const = 0;

  virtual Point sample_base(std::mt19937_64& rng) const;
  // unprojected fiber vector suited to w
  virtual Point raw_fiber(const Point& w, std::mt19937_64& rng) const;
  Point sample_fiber(const Point& w, std::mt19937_64& rng) const { return rho(w, raw_fiber(w, rng)); }

 protected:
  LocalModel base_;
  ProductSpace f_;
};

using BundlePtr = std::shared_ptr<const StrongBundleSplicing>;

// rho((v,e), u) = sigma_v(u) for a splicing sigma over the parameter space of the base.
BundlePtr parameter_bundle(const LocalModel& base, const SplicingPtr& sigma);

// Joint map (w, u) -> rho(w, u) on the K(view) levels.
MapPtr rho_map(const BundlePtr& b, int view = 0);

struct BundleReport {
  std::size_t samples = 0;
  double idempotency = 0.0;  // |rho(rho u) - rho u|
  double linearity = 0.0;    // |rho(a u + b u') - a rho u - b rho u'|
  bool level_shift = false;  // rho_w bounded on F_{m+1}, m = 0..2
  bool view0_sc1 = false, view1_sc1 = false;
  std::string failure;
  bool pass = false;
};
BundleReport check_strong_bundle(const BundlePtr& b, std::size_t samples = 16, std::uint64_t seed = 0x5eed,
                                 double tol = 1e-9);

// (w, u) in K^R at bi-level (m, k); requires 0 <= k <= m + 1.
bool bifiltration_contains(const StrongBundleSplicing& b, const Point& w, const Point& u, int m, int k,
                           double tau = 1e-9);

// ---------------------------------------------------------------- strong bundle maps

struct StrongMapView {
  bool sc0 = false, sc1 = false;
  std::vector<double> growth;  // worst late sc0 ratio per probed level
};

struct StrongMapReport {
  StrongMapView view0, view1;
  std::string classification;  // "sc1-triangle", "sc1-not-triangle", "not-sc1"
  bool triangle = false;
};

// f(w,u) = (phi(w), Phi(w,u)) from K^R to K^R'; phi : W+E -> W'+E', Phi : W+E+F -> F'.
StrongMapReport strong_map_class_check(const BundlePtr& src, const BundlePtr& dst, const MapPtr& phi, const MapPtr& Phi,
                                       std::size_t samples = 3, std::uint64_t seed = 0x5eed);

// ---------------------------------------------------------------- sections

struct Section {
  BundlePtr bundle;
  MapPtr principal;  // W + E -> F; used on O, extended to O-hat by g(v, pi_v e)
  bool scplus = false;
};

// max |rho(w, g(w)) - g(w)| over sampled w in O
double section_residual(const Section& s, std::size_t samples = 16, std::uint64_t seed = 0x5eed);

// s(w) = rho(w, g(w0)); sc+ because rho gains a fiber level.
Section scplus_section_through(const Section& f, const Point& w0);

struct Linearization {
  Point q;
  std::optional<BlockOperator> op;  // D(f - s)(q) restricted to T_q O through the ambient identification
  std::optional<std::int64_t> index;
  std::string index_method;  // "finite-dim", "corank", or "undecidable: ..."
};

// f'_[s](q) = P_q o T(f - s)(q)
Linearization linearize(const Section& f, const Section& s, const Point& q, double tol = 1e-9);
// Index of an operator L : W + E -> F standing for a map T_q O -> ker(1 - rho_q).
std::optional<std::int64_t> linearization_index(const BundlePtr& b, const Point& q, const std::optional<BlockOperator>& op,
                                                std::string* method = nullptr);

struct ScPlusCertificate {
  bool scplus = false;
  std::vector<double> gains;  // per basis direction: |D(t-s) h|_{m+1} / |h|_m at m = 0
  double worst_gain = 0.0;
  std::string operator_certificate;  // "banded", "finite-rank", "finite-dim", "none"
  std::optional<std::int64_t> index_s, index_t;
  bool indices_agree = false;
  bool pass = false;
};
ScPlusCertificate linearization_delta_scplus(const Section& f, const Section& s, const Section& t, const Point& q);

// ---------------------------------------------------------------- fillers

struct Filler {
  MapPtr principal;                   // f^c : O-hat -> F, linear in (1 - pi_v) e
  std::optional<BlockOperator> at_center;  // de -> f^c(0, de) on E
  // r in ker pi_v with f^c(v, e + r) = y, for y in ker rho_(v,e)
  std::function<Point(const Point& w, const Point& y)> inverse;
};

struct FillableBundle {
  std::string name;
  BundlePtr bundle;
  Filler filler;
};

// Rank-jump base; F = R + E with rho_(v,e)(a, u) = (a, pi_v u); f^c(v,e) = (0, (1 - pi_v) e), an isometry.
FillableBundle rank_jump_fillable(double delta = 1.0);
// Trivial base over W = R^1 and fiber E; the complement is zero and so is the filler.
FillableBundle trivial_fillable(double delta = 1.0);
// pi = rho = 1 - e_0 (x) e_0 on E over W = R^1; f^c(v,e) = <e, e_0> e_0.
FillableBundle corank_one_fillable(double delta = 1.0);

struct FillerReport {
  std::size_t samples = 0;
  double rho_residual = 0.0;    // |rho_(v, pi_v e)(f^c(v,e))|
  double linearity = 0.0;
  double inverse_residual = 0.0;  // |f^c(v, e + inverse(y)) - y|
  double injectivity = INFINITY;  // smallest |f^c(v, e + r)| / |r| on the sampled basis
  bool pass = false;
};
FillerReport check_filler(const FillableBundle& fb, std::size_t samples = 12, std::uint64_t seed = 0x5eed,
                          double tol = 1e-9);

struct FilledSection {
  Section original;
  Filler filler;
  MapPtr extension;  // f(v, pi_v e)
  MapPtr principal;  // f(v, pi_v e) + f^c(v, e)
};
FilledSection fill(const Section& f, const Filler& filler);

struct ZeroSetReport {
  std::size_t points = 0;
  std::size_t filled_zeros = 0, original_zeros = 0;
  std::vector<Point> mismatches;
  bool pass = false;
};
// fbar(v,e) = 0 iff (v,e) in K^S and f(v,e) = 0, on the given O-hat points.
ZeroSetReport zero_set_equivalence(const FilledSection& fs, const std::vector<Point>& grid, double tau = 1e-9);

struct FilledBlockReport {
  std::optional<BlockOperator> dfbar;
  double cross_f = 0.0;    // max |D f(0,0)(0, db)|
  double cross_fc = 0.0;   // max |D f^c(0,0)(dw, da)|
  double assembly = 0.0;   // operator versus tangents on sampled directions
  bool c_isomorphism = false;
  std::optional<std::int64_t> index_f, index_filled;
  bool indices_equal = false;
  std::string note;
  bool pass = false;
};
FilledBlockReport filled_linearization_block(const Section& f, const Filler& filler, const Point& q,
                                             double tol = 1e-10);

// ---------------------------------------------------------------- pullback

// rho'(w', u) = rho(f(w'), u) over the model `base`; f maps base points into the model of p.
BundlePtr pullback_bundle(const BundlePtr& p, const LocalModel& base, const MapPtr& f, std::size_t samples = 16,
                          std::uint64_t seed = 0x5eed);

}  // namespace scalekit
