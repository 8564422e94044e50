#include <doctest.h>

#include <cmath>

#include "scalekit/linops.hpp"

using namespace scalekit;

namespace {
const ScaleSpace E = ScaleSpace::sequence(1.0);
const ScOperator L = ScOperator::shift(E, 1);
const ScOperator R = ScOperator::shift(E, -1);
const ScOperator I = ScOperator::identity(E);
}  // namespace

TEST_CASE("structured evaluation") {
  CHECK(I.apply(Vector{1, 2, 3}) == Vector{1, 2, 3});
  CHECK(L.apply(QVector::unit(0)).is_zero());
  CHECK(L.apply(QVector{1, 2, 3}) == QVector{2, 3});
  CHECK(R.apply(QVector{1, 2}) == QVector{0, 1, 2});
  const auto D = ScOperator::diagonal(E, parse_coefficient("exp(-k)"));
  const Vector y = D.apply(Vector::unit(3));
  CHECK(y.support() == 4);
  CHECK(y[3] == doctest::Approx(0.049787068367863944).epsilon(1e-14));
  CHECK_THROWS_AS(D.apply(QVector::unit(3)), InexactError);
  CHECK(D.apply(QVector::unit(0)) == QVector{1});
}

TEST_CASE("coefficient rules") {
  auto d = parse_coefficient("1/8*exp(-2*k-1/2) + 3*[k<4] - [k>=2]*[k<3]");
  CHECK(d.eval<double>(0) == doctest::Approx(0.125 * std::exp(-0.5) + 3));
  CHECK(d.eval<double>(2) == doctest::Approx(0.125 * std::exp(-4.5) + 2));
  CHECK(d.eval<double>(5) == doctest::Approx(0.125 * std::exp(-10.5)));
  CHECK(parse_coefficient("3*[k<4]").eval_exact(3) == Rational(3));
  CHECK(parse_coefficient("3*[k<4]").support_end() == 4);
  CHECK_FALSE(parse_coefficient("exp(-k)").support_end());
  CHECK(parse_coefficient("2 - 2").is_zero());
  CHECK_THROWS(parse_coefficient("exp(k)"));
  CHECK_THROWS(parse_coefficient("k"));
  const auto s = parse_coefficient("exp(-k)").shifted(2);
  CHECK(s.eval<double>(1) == doctest::Approx(std::exp(-3.0)));
}

TEST_CASE("algebra: composition agrees with sequential application") {
  const auto D = ScOperator::diagonal(E, parse_coefficient("1/3*exp(-k) + [k<3]"));
  const auto F = ScOperator::rank_one(E, E, QVector{1, -2}, QVector{0, 0, 5});
  const ScOperator ops[] = {L, R, I, D, F, L + F, R.compose(D) + F};
  const Vector x{0.5, -1.0, 2.0, 0.25, 0.0, 3.0};
  for (const auto& a : ops)
    for (const auto& b : ops) {
      const Vector lhs = a.compose(b).apply(x);
      const Vector rhs = a.apply(b.apply(x));
      const Vector diff = lhs - rhs;
      CHECK(level_norm(E, diff, 0) <= 1e-12);
    }
  // L after R is the identity
  for (std::size_t k = 0; k < 6; ++k) CHECK(L.compose(R).apply(QVector::unit(k)) == QVector::unit(k));
}

TEST_CASE("level bounds and sc+ certificates") {
  CHECK(L.certified_sc0());
  CHECK_FALSE(L.certified_scplus());
  const auto D = ScOperator::diagonal(E, parse_coefficient("exp(-k)"));
  CHECK(D.certified_scplus());
  CHECK_FALSE(ScOperator::diagonal(E, parse_coefficient("exp(-1/2*k)")).certified_scplus());
  CHECK(ScOperator::diagonal(E, parse_coefficient("[k<5]")).certified_scplus());
  CHECK(ScOperator::rank_one(E, E, QVector{1}, QVector{0, 1}).certified_scplus());
  // left shift weighs e^{-delta m} at level m
  CHECK(L.level_bound(2, 2) == doctest::Approx(std::exp(-2.0)));
  CHECK(R.level_bound(1, 1) == doctest::Approx(std::exp(1.0)));
  const auto rep = scplus_singular_check(D.scaled(Rational(1, 8)), 1);
  CHECK(rep.ok);
  CHECK(rep.singular_values[3] == doctest::Approx(std::exp(-3.0) / 8));
  const auto bad = ScOperator::diagonal(E, parse_coefficient("exp(-1/2*k)"));
  CHECK(std::isinf(bad.level_bound(1, 2)));
}

TEST_CASE("split off a finite-dimensional subspace") {
  auto p0 = split_off_finite_dim(E, {QVector::unit(0)});
  CHECK(p0.projection.compose(p0.projection).apply(QVector{3, 4, 5}) == p0.projection.apply(QVector{3, 4, 5}));
  CHECK(p0.projection.apply(QVector{3, 4, 5}) == QVector{3});
  CHECK(split_off_finite_dim(E, {}).projection.is_zero());
  const std::vector<QVector> k{QVector{1, 1}, QVector{0, 1}};
  auto p = split_off_finite_dim(E, k);
  const ScOperator comp = I - p.projection;
  for (const auto& v : k) CHECK(comp.apply(v).is_zero());
  const QVector x{2, -1, 7, 1};
  CHECK(p.projection.apply(p.projection.apply(x)) == p.projection.apply(x));
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) {
      Rational s = 0;
      for (std::size_t c = 0; c < 4; ++c) s += p.functionals[i][c] * k[j][c];
      CHECK(s == Rational(i == j ? 1 : 0));
    }
  CHECK_THROWS_AS(split_off_finite_dim(E, {QVector{1, 1}, QVector{2, 2}}), DomainError);
}

TEST_CASE("index of shifts") {
  CHECK(fredholm_index(I).index == 0);
  const auto fl = fredholm_index(L);
  CHECK(fl.index == 1);
  CHECK(fl.regime == Regime::exact);
  REQUIRE(fl.kernel_exact.size() == 1);
  CHECK(fl.kernel_exact[0] == QVector::unit(0));
  CHECK(fl.cokernel.empty());
  const auto fr = fredholm_index(R);
  CHECK(fr.index == -1);
  CHECK(fr.kernel.empty());
  REQUIRE(fr.cokernel_exact.size() == 1);
  CHECK(fr.cokernel_exact[0] == QVector::unit(0));
  CHECK(fl.levels_consistent);
  CHECK(fl.certificate == "closed-form");
  CHECK(compose_index(L, L).index == 2);
  CHECK(compose_index(L, L).additive);
  CHECK(compose_index(L, R).index == 0);
  CHECK(compose_index(R, L).index == 0);
  CHECK(fredholm_index(R.compose(L)).kernel.size() == 1);
  CHECK(fredholm_index(ScOperator::shift(E, 3)).index == 3);
}

TEST_CASE("undecidable operators are reported") {
  CHECK_THROWS_AS(fredholm_index(L + R), IndexUndecidable);
  CHECK_THROWS_AS(fredholm_index(ScOperator::diagonal(E, parse_coefficient("exp(-k)"))), IndexUndecidable);
  CHECK_THROWS_AS(fredholm_index(I + ScOperator::band(E, E, 2, parse_coefficient("exp(-k)"))), IndexUndecidable);
}

TEST_CASE("perturbation by an exponentially decaying diagonal") {
  const auto Rp = ScOperator::diagonal(E, parse_coefficient("1/8*exp(-k)"));
  const auto rep = perturb_scplus_index(L, Rp);
  CHECK(rep.stable);
  CHECK(rep.index_sum == 1);
  CHECK(rep.kernels_level_independent);
  const auto& sp = rep.splitting;
  REQUIRE(sp.kernel.size() == 1);
  // independent recursion: x_0 = 1, x_{r+1} = -(1/8) e^{-r} x_r
  Vector ref;
  ref.at(0) = 1.0;
  for (int r = 0; r < 30; ++r) ref.at(r + 1) = -0.125 * std::exp(-r) * ref[r];
  const Vector k = sp.kernel[0];
  const double scale = k[0];
  for (int i = 0; i < 30; ++i) CHECK(k[i] / scale == doctest::Approx(ref[i]).epsilon(1e-10));
  CHECK((L + Rp).apply(k).coeffs().size() <= 1);
  CHECK(level_norm(E, (L + Rp).apply(k), 2) <= 1e-12);
}

TEST_CASE("identity plus small rank-one sc+ term") {
  const auto F = ScOperator::rank_one(E, E, QVector{Rational(1, 4), Rational(1, 8)}, QVector{1, 1});
  const auto rep = perturb_scplus_index(I, F);
  CHECK(rep.index_sum == 0);
  CHECK(rep.splitting.kernel.empty());
  CHECK(rep.splitting.regime == Regime::exact);
}

TEST_CASE("rank-one perturbation of a shift changes dims but not the index") {
  // L - e_0 (x) e_1* kills e_0 and e_1 + e_0... check exactly
  const auto F = ScOperator::rank_one(E, E, QVector{0, 1}, QVector{-1});
  const auto sp = fredholm_index(L + F);
  CHECK(sp.index == 1);
  for (const auto& k : sp.kernel_exact) CHECK((L + F).apply(k).is_zero());
  const auto sp2 = fredholm_index(R + ScOperator::rank_one(E, E, QVector{1}, QVector{-1, 1}));
  CHECK(sp2.index == -1);
  for (const auto& k : sp2.kernel_exact) CHECK((R + ScOperator::rank_one(E, E, QVector{1}, QVector{-1, 1})).apply(k).is_zero());
}

TEST_CASE("regularity lift") {
  const auto sp = fredholm_index(L);
  const QVector e{5, 0, 0, 2};
  const auto cert = regularity_lift(L, sp, e, 3);
  CHECK(cert.ok);
  CHECK(cert.c_zero);
  CHECK(cert.reassembles);
  CHECK(cert.k_exact == QVector{5});
  CHECK(cert.x0_exact == QVector{0, 0, 0, 2});
  const auto id = regularity_lift(I, fredholm_index(I), QVector{1, 2}, 2);
  CHECK(id.ok);
  CHECK(id.k_exact.is_zero());
  const auto T = R + ScOperator::rank_one(E, E, QVector{0, 1}, QVector{0, 0, 3});
  const auto rr = regularity_lift(T, fredholm_index(T), QVector{1, -1, 4}, 1);
  CHECK(rr.ok);
  CHECK(rr.regime == Regime::exact);
}

TEST_CASE("dense complements") {
  const auto c = dense_complement(E, R, 1);
  REQUIRE(c.size() == 1);
  CHECK(c[0] == QVector::unit(0));
  CHECK(dense_complement(E, I, 0).empty());
  const auto c2 = dense_complement(E, std::vector<QVector>{QVector::unit(0), QVector::unit(1)}, 2);
  CHECK(c2 == std::vector<QVector>{QVector::unit(0), QVector::unit(1)});
  CHECK_THROWS_AS(dense_complement(E, R, 2), DomainError);
}

TEST_CASE("block operators flatten finite blocks") {
  const auto F1 = ScaleSpace::finite(1);
  BlockOperator b(ProductSpace{F1, E}, ProductSpace{E});
  b.set(0, 0, ScOperator::rank_one(F1, E, QVector{1}, QVector{1}));
  b.set(0, 1, R);
  CHECK(fredholm_index(b).index == 0);
  BlockOperator d(ProductSpace{E, F1}, ProductSpace{E, F1});
  d.set(0, 0, L);
  d.set(1, 1, ScOperator::identity(F1));
  CHECK(fredholm_index(d).index == 1);
  const Point x{Vector{1, 2, 3}, Vector{4}};
  const auto flat = d.flatten();
  const Vector fx = flatten_point(x, flat.dom_offsets);
  const Point back = unflatten_point(flat.op.apply(fx), d.codomain(), flat.cod_offsets);
  CHECK(back == d.apply(x));
  BlockOperator m(ProductSpace{F1, ScaleSpace::finite(2)}, ProductSpace{ScaleSpace::finite(2)});
  m.set(0, 1, ScOperator::identity(ScaleSpace::finite(2)));
  CHECK(fredholm_index(m).index == 1);
}
