#include <cmath>
#include <random>

#include <doctest.h>

#include "gpcond/conditions.hpp"
#include "gpcond/path.hpp"
#include "oracles.hpp"

using namespace gpcond;

namespace {

Path identity_path(std::size_t n) {
  Path p;
  p.grid = uniform_grid(1.0, n);
  p.values = p.grid;
  return p;
}

Path random_path(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Path p;
  p.grid = uniform_grid(1.0, n);
  for (std::size_t k = 0; k < n; ++k) p.values.push_back(z(rng));
  return p;
}

}  // namespace

TEST_CASE("apply: point and density examples") {
  const auto d1 = Condition::point(1.0, 1.0);
  const auto a0 = Condition::uniform(1.0, 0.0, 1.0);
  CHECK(apply(d1, identity_path(11)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(apply(a0, identity_path(2)) == doctest::Approx(0.5).epsilon(1e-15));

  Path tri{{0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}};
  const double exact = apply(a0, tri);
  CHECK(exact == doctest::Approx(0.5).epsilon(1e-15));
  const double trap = oracle::trapezoid([&](double x) { return tri.at(x); }, 0.0, 1.0, 10000);
  CHECK(std::abs(exact - trap) < 1e-12);
}

TEST_CASE("apply: atom between grid points interpolates, atom outside the grid throws") {
  Path p{{0.0, 0.5, 1.0}, {0.0, 2.0, 4.0}};
  CHECK(apply(Condition::point(1.0, 0.25, 3.0), p) == doctest::Approx(3.0));
  Path short_path{{0.0, 0.5}, {0.0, 1.0}};
  CHECK_THROWS_AS(apply(Condition::point(1.0, 0.9), short_path), std::domain_error);
}

TEST_CASE("apply: cubic densities match a fine trapezoid oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const Condition c(1.0, {{0.37, u(rng)}},
                      {{0.0, 0.4, {u(rng), u(rng), u(rng), u(rng)}}, {0.55, 0.95, {u(rng), u(rng), u(rng), u(rng)}}});
    const Path p = random_path(37, rng);
    const double exact = apply(c, p);
    double dens = 0.0;
    for (const auto& d : c.density())
      dens += oracle::trapezoid([&](double x) { return poly::eval(d.coeffs, x) * p.at(x); }, d.lo, d.hi, 1000000);
    const double ref = dens + c.atoms()[0].w * p.at(0.37);
    CHECK(std::abs(exact - ref) <= 1e-8 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("apply is linear in the path") {
  std::mt19937_64 rng(11);
  const Condition c(1.0, {{0.2, 1.5}, {1.0, -0.5}}, {{0.1, 0.8, {0.3, -1.0, 2.0}}});
  for (int rep = 0; rep < 20; ++rep) {
    const Path p = random_path(64, rng);
    const Path q = random_path(64, rng);
    Path r = p;
    for (std::size_t k = 0; k < r.values.size(); ++k) r.values[k] = 2.5 * p.values[k] - 0.75 * q.values[k];
    CHECK(std::abs(apply(c, r) - (2.5 * apply(c, p) - 0.75 * apply(c, q))) < 1e-12);
  }
}

TEST_CASE("apply_poly examples and the (lo, hi] convention") {
  const auto d1 = Condition::point(1.0, 1.0);
  const auto a0 = Condition::uniform(1.0, 0.0, 1.0);
  CHECK(apply_poly(d1, PiecewisePoly::constant(0.0, 1.0, 1.0), 0.3, 1.0) == doctest::Approx(1.0));
  for (double s : {0.0, 0.25, 0.6}) {
    CHECK(apply_poly(a0, PiecewisePoly::polynomial(0.0, 1.0, {0.0, 1.0}), s, 1.0) ==
          doctest::Approx((1.0 - s * s) / 2.0).epsilon(1e-14));
  }
  const double r3 = std::sqrt(3.0);
  CHECK(apply_poly(a0, PiecewisePoly::polynomial(0.0, 1.0, {0.0, r3, -r3}), 0.0, 1.0) ==
        doctest::Approx(1.0 / (2.0 * r3)).epsilon(1e-14));

  const auto at_half = Condition::point(1.0, 0.5, 2.0);
  const auto one = PiecewisePoly::constant(0.0, 1.0, 1.0);
  CHECK(apply_poly(at_half, one, 0.5, 1.0) == 0.0);
  CHECK(apply_poly(at_half, one, 0.2, 0.5) == 2.0);
  CHECK_THROWS_AS(apply_poly(a0, one, 0.0, 1.5), std::domain_error);
}

TEST_CASE("tail_mass") {
  CHECK(tail_mass(Condition::point(1.0, 1.0), 0.4) == 1.0);
  CHECK(tail_mass(Condition::uniform(1.0, 0.0, 1.0), 0.25) == doctest::Approx(0.75));
  CHECK(tail_mass(Condition::point(1.0, 0.5, 2.0), 0.6) == 0.0);
  // c([x, T]) includes an atom at x itself
  CHECK(tail_mass(Condition::point(1.0, 0.5, 2.0), 0.5) == 2.0);

  const Condition c(1.0, {{0.3, -1.0}, {0.9, 0.5}}, {{0.2, 0.7, {1.0, 2.0}}});
  Path ones{uniform_grid(1.0, 11), std::vector<double>(11, 1.0)};
  CHECK(tail_mass(c, 0.0) == doctest::Approx(apply(c, ones)).epsilon(1e-14));
}

TEST_CASE("Condition validation") {
  CHECK_THROWS_AS(Condition(1.0, {{1.5, 1.0}}, {}), std::invalid_argument);
  CHECK_THROWS_AS(Condition(1.0, {}, {{0.5, 0.4, {1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(Condition(1.0, {}, {{0.0, 0.6, {1.0}}, {0.5, 1.0, {1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(Condition(1.0, {}, {{0.0, 1.2, {1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(Condition(0.0, {}, {}), std::invalid_argument);
}

TEST_CASE("total variation") {
  const Condition c(1.0, {{0.3, -1.0}, {0.9, 0.5}}, {{0.0, 1.0, {-1.0, 2.0}}});
  // |2x - 1| integrates to 1/2
  CHECK(c.total_variation() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("combine merges atoms and splits densities") {
  const std::vector<Condition> terms{Condition::point(1.0, 1.0), Condition::uniform(1.0, 0.0, 1.0),
                                     Condition::uniform(1.0, 0.5, 1.0, 2.0), Condition::point(1.0, 1.0, 3.0)};
  const std::vector<double> w{1.0, 2.0, -1.0, 1.0};
  const auto c = Condition::combine(w, terms);
  REQUIRE(c.atoms().size() == 1);
  CHECK(c.atoms()[0].w == doctest::Approx(4.0));
  CHECK(c.density_at(0.25) == doctest::Approx(2.0));
  CHECK(c.density_at(0.75) == doctest::Approx(0.0));
  std::mt19937_64 rng(3);
  const Path p = random_path(33, rng);
  double ref = 0.0;
  for (std::size_t k = 0; k < terms.size(); ++k) ref += w[k] * apply(terms[k], p);
  CHECK(apply(c, p) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("grid weights and cell weights reproduce apply") {
  std::mt19937_64 rng(5);
  const Condition c(1.0, {{0.0, 0.7}, {0.33, 1.1}, {1.0, -0.4}}, {{0.1, 0.65, {0.2, 1.0, -3.0}}});
  const Path p = random_path(21, rng);
  const auto w = grid_weights(c, p.grid);
  double dot = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * p.values[k];
  CHECK(dot == doctest::Approx(apply(c, p)).epsilon(1e-13));

  const auto cw = cell_weights(c, p.grid);
  double acc = cw.initial * p.values[0];
  for (std::size_t k = 0; k + 1 < p.grid.size(); ++k) acc += cw.left[k] * p.values[k] + cw.right[k] * p.values[k + 1];
  CHECK(acc == doctest::Approx(apply(c, p)).epsilon(1e-13));
}

TEST_CASE("restriction to [0, s] keeps atoms at s") {
  const Condition c(1.0, {{0.5, 2.0}, {0.8, 1.0}}, {{0.2, 0.9, {1.0}}});
  const auto r = restrict_upto(c, 0.5);
  REQUIRE(r.atoms().size() == 1);
  CHECK(r.atoms()[0].t == 0.5);
  REQUIRE(r.density().size() == 1);
  CHECK(r.density()[0].hi == 0.5);
  CHECK(restrict_upto(c, 0.1).is_null());

  std::mt19937_64 rng(9);
  const Path p = random_path(41, rng);
  const auto w = grid_weights_upto(c, p.grid, 0.5);
  double dot = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) dot += w[k] * p.values[k];
  CHECK(dot == doctest::Approx(apply(r, p)).epsilon(1e-13));
}

TEST_CASE("PiecewisePoly evaluation uses the lower piece at interior boundaries") {
  const PiecewisePoly q({{0.0, 0.5, {1.0}}, {0.5, 1.0, {2.0}}});
  CHECK(q(0.0) == 1.0);
  CHECK(q(0.5) == 1.0);
  CHECK(q(0.5000001) == 2.0);
  CHECK(q(1.0) == 2.0);
  CHECK_THROWS_AS(q(1.5), std::domain_error);
  CHECK_THROWS_AS(PiecewisePoly({{0.0, 0.5, {1.0}}, {0.6, 1.0, {2.0}}}), std::invalid_argument);
  CHECK(q.integral(0.25, 0.75) == doctest::Approx(0.75));
}

TEST_CASE("polynomial helpers") {
  const poly::Coeffs a{1.0, -2.0, 3.0};
  const poly::Coeffs b{0.5, 4.0};
  for (double x : {-1.3, 0.0, 0.7, 2.1}) {
    CHECK(poly::eval(poly::multiply(a, b), x) == doctest::Approx(poly::eval(a, x) * poly::eval(b, x)));
    CHECK(poly::eval(poly::derivative(a), x) == doctest::Approx(-2.0 + 6.0 * x));
  }
  CHECK(poly::integrate(a, 0.0, 1.0) == doctest::Approx(1.0));
  CHECK(poly::integrate_product(a, b, 0.2, 0.9) ==
        doctest::Approx(oracle::simpson([&](double x) { return poly::eval(a, x) * poly::eval(b, x); }, 0.2, 0.9, 200))
            .epsilon(1e-12));
}
