#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

#include "dte/design.hpp"
#include "dte/normal.hpp"

using namespace dte;

namespace {

DesignSpec spec(double eps, double gamma, int subintervals = 0) {
  DesignSpec s;
  s.model = s.model.with_delay(eps);
  s.weights = {0, gamma};
  s.subintervals = subintervals;
  return s;
}

// P(Z1 > a, Z2 > b) for a standard bivariate normal with correlation r.
double upper_orthant(double a, double b, double r) {
  auto f = [&](double x) { return norm_pdf(x) * norm_sf((b - r * x) / std::sqrt(1 - r * r)); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, a + 40, 15, 1e-14);
}

}  // namespace

// Frozen outputs of an independent Python implementation of the recursion.
TEST_CASE("sample size matches the independent recursion (one-month steps)") {
  const double n0[] = {329.25245684066556, 450.6197473782255, 620.9443740100552,
                       862.9421711329294,  1211.9239319266028, 1724.3557784117888};
  const double n1[] = {470.92270826212655, 472.3492094906948, 512.4403512259264,
                       589.0682568020028,  709.2591381204164,  888.6867799529382};
  const double events[] = {0.7801929935140989, 0.7861052307343256, 0.7917708010971349,
                           0.7971999958909654, 0.8024026770372168, 0.8073882950040515};
  for (int e = 0; e < 6; ++e) {
    const auto r0 = hasegawa_sample_size(spec(e, 0));
    const auto r1 = hasegawa_sample_size(spec(e, 1));
    CHECK(r0.n_continuous == doctest::Approx(n0[e]).epsilon(1e-10));
    CHECK(r1.n_continuous == doctest::Approx(n1[e]).epsilon(1e-10));
    CHECK(markov_evaluate(spec(e, 0)).event_fraction == doctest::Approx(events[e]).epsilon(1e-10));
    CHECK(r0.n % 2 == 0);
    CHECK(r0.n >= r0.n_continuous);
    CHECK(r0.d == static_cast<long>(std::ceil(r0.n * events[e])));
  }
}

TEST_CASE("sample size matches the independent recursion (fine grid)") {
  const double n0[] = {339.0264348601021, 459.7905266561784, 628.3309474720235,
                       866.7347138006162, 1209.469469399917, 1711.9916775171757};
  const double n1[] = {452.21994642386704, 468.4190306418736, 518.7314084548904,
                       604.5160340868514,  734.7234097472675, 926.8079227385822};
  for (int e = 0; e < 6; ++e) {
    CHECK(hasegawa_sample_size(spec(e, 0, 2500)).n_continuous == doctest::Approx(n0[e]).epsilon(1e-9));
    CHECK(hasegawa_sample_size(spec(e, 1, 2500)).n_continuous == doctest::Approx(n1[e]).epsilon(1e-9));
  }
}

TEST_CASE("the recursion converges as the grid is refined") {
  for (double g : {0.0, 1.0}) {
    const double a = markov_evaluate(spec(3, g, 2500)).e_star;
    const double b = markov_evaluate(spec(3, g, 5000)).e_star;
    CHECK(std::abs(a - b) / b < 1e-3);
  }
}

TEST_CASE("proportional hazards agrees with Schoenfeld") {
  const double d = schoenfeld_events(2.0 / 3, 0.025, 0.1, 0.5, 0.5);
  const double z = upper_quantile(0.025) + upper_quantile(0.1);
  CHECK(d == doctest::Approx(4 * z * z / std::pow(std::log(2.0 / 3), 2)));
  CHECK(std::abs(hasegawa_sample_size(spec(0, 0, 2500)).d - d) / d < 0.03);
}

TEST_CASE("sample size grows with the delay for the plain log-rank") {
  long prev = 0;
  for (int e = 0; e < 6; ++e) {
    const long n = hasegawa_sample_size(spec(e, 0)).n;
    CHECK(n > prev);
    prev = n;
  }
}

TEST_CASE("no effect means no design") {
  DesignSpec s;
  s.model = s.model.with_psi(1.0);
  CHECK_THROWS_AS(hasegawa_sample_size(s), std::domain_error);
}

TEST_CASE("invalid design inputs") {
  DesignSpec s;
  s.alpha = 0.7;
  CHECK_THROWS(s.validate());
  s = DesignSpec{};
  s.accrual = 0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("single look recovers the fixed design") {
  const auto s = obf_boundaries({1.0}, 0.025);
  CHECK(s.boundaries[0] == doctest::Approx(1.959963984540054).epsilon(1e-9));
  const auto c = obf_boundaries({1.0}, 0.025, std::nullopt, BoundaryFamily::classical_obf);
  CHECK(c.boundaries[0] == doctest::Approx(1.959963984540054).epsilon(1e-9));
}

TEST_CASE("two-look schedule against a bivariate normal oracle") {
  const double t1 = 0.75, r = std::sqrt(t1);
  const auto s = obf_boundaries({t1, 1.0}, 0.025, 0.9);
  const double b1 = s.boundaries[0], b2 = s.boundaries[1];
  // Spending function values.
  const double spend1 = 2 - 2 * norm_cdf(upper_quantile(0.0125) / std::sqrt(t1));
  CHECK(norm_sf(b1) == doctest::Approx(spend1).epsilon(1e-8));
  const double total = norm_sf(b1) + norm_sf(b2) - upper_orthant(b1, b2, r);
  CHECK(total == doctest::Approx(0.025).epsilon(1e-7));
  // Crossing under the drift.
  const double th = *s.drift;
  const double p1 = norm_sf(b1 - th * r);
  const double p2 = norm_sf(b2 - th) - upper_orthant(b1 - th * r, b2 - th, r);
  CHECK(s.crossing[0] == doctest::Approx(p1).epsilon(1e-7));
  CHECK(s.crossing[1] == doctest::Approx(p2).epsilon(1e-7));
  CHECK(p1 + p2 == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("classical family uses a common constant") {
  const auto s = obf_boundaries({0.5, 1.0}, 0.025, std::nullopt, BoundaryFamily::classical_obf);
  CHECK(s.boundaries[0] * std::sqrt(0.5) == doctest::Approx(s.boundaries[1]).epsilon(1e-10));
  const double total = norm_sf(s.boundaries[0]) + norm_sf(s.boundaries[1]) -
                       upper_orthant(s.boundaries[0], s.boundaries[1], std::sqrt(0.5));
  CHECK(total == doctest::Approx(0.025).epsilon(1e-7));
}

TEST_CASE("arbitrary fractions spend exactly the spending function") {
  const std::vector<double> f{0.2, 0.45, 0.7, 1.0};
  const auto s = obf_boundaries(f, 0.025);
  const auto null = crossing_probabilities(f, s.boundaries, 0.0);
  double cum = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    cum += null[k];
    const double spend = 2 - 2 * norm_cdf(upper_quantile(0.0125) / std::sqrt(f[k]));
    CHECK(cum == doctest::Approx(spend).epsilon(1e-6));
    CHECK(s.cumulative_alpha[k] == doctest::Approx(spend).epsilon(1e-6));
    if (k) CHECK(s.boundaries[k] < s.boundaries[k - 1]);
  }
}

TEST_CASE("boundary inputs are validated") {
  CHECK_THROWS(obf_boundaries({}, 0.025));
  CHECK_THROWS(obf_boundaries({0.5, 0.4, 1.0}, 0.025));
  CHECK_THROWS(obf_boundaries({0.5, 0.9}, 0.025));
  CHECK_THROWS(obf_boundaries({0.5, 1.0}, 0.6));
}
