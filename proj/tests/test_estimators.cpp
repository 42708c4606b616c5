#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "dte/estimators.hpp"
#include "dte/normal.hpp"

using namespace dte;

namespace {

CensoredView view_of(std::vector<Observation> obs) {
  CensoredView v;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    obs[i].subject = i;
    v.events_observed += obs[i].event;
  }
  v.observations = std::move(obs);
  return v;
}

// Unweighted log-rank from first principles: per distinct event time,
// O − E and the hypergeometric variance for the control arm.
double plain_logrank(const CensoredView& v) {
  std::map<double, std::pair<int, int>> deaths;  // time -> (total, control)
  for (const auto& o : v.observations)
    if (o.event) {
      auto& d = deaths[o.time];
      d.first++;
      d.second += o.arm == Arm::control;
    }
  double oe = 0.0, var = 0.0;
  for (const auto& [t, d] : deaths) {
    double n = 0, n1 = 0;
    for (const auto& o : v.observations)
      if (o.time >= t) {
        n++;
        n1 += o.arm == Arm::control;
      }
    oe += d.second - d.first * n1 / n;
    if (n > 1) var += d.first * (n1 / n) * (1 - n1 / n) * (n - d.first) / (n - 1);
  }
  return oe / std::sqrt(var);
}

CensoredView random_view(std::uint64_t seed, double eps) {
  const auto m = DelayedEffectModel::from_medians(6, 9, eps);
  Rng rng(seed);
  const auto data = simulate_cohort(m, EnrollmentModel{}, 200, Allocation{}, rng);
  return censor_at_event_count(data, 140);
}

}  // namespace

TEST_CASE("two-subject log-rank by hand") {
  // Control dies at 1 with both at risk: O − E = 1/2, V = 1/4, Z = +1.
  const auto v = view_of({{Arm::control, 1.0, true, 0}, {Arm::experimental, 2.0, false, 0}});
  const auto r = weighted_logrank(v, WeightSpec{0, 0});
  CHECK(r.score == doctest::Approx(0.5));
  CHECK(r.variance == doctest::Approx(0.25));
  CHECK(r.z == doctest::Approx(1.0));
  CHECK(r.one_sided_p == doctest::Approx(norm_sf(1.0)));
}

TEST_CASE("risk table with ties") {
  const auto v = view_of({{Arm::control, 1, true, 0},
                          {Arm::experimental, 1, true, 0},
                          {Arm::control, 1, false, 0},
                          {Arm::experimental, 3, true, 0}});
  const auto t = risk_table(v);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].events == 2);
  CHECK(t.rows[0].control_events == 1);
  CHECK(t.rows[0].at_risk == 4);
  CHECK(t.rows[1].at_risk == 1);
  CHECK(t.rows[1].experimental_at_risk == 1);
}

TEST_CASE("Kaplan-Meier by hand") {
  const auto v = view_of({{Arm::control, 1, true, 0},
                          {Arm::control, 2, false, 0},
                          {Arm::experimental, 3, true, 0},
                          {Arm::experimental, 4, true, 0}});
  const auto km = kaplan_meier(v);
  CHECK(km.at(0.5) == doctest::Approx(1.0));
  CHECK(km.at(1.0) == doctest::Approx(0.75));
  CHECK(km.left_limit(1.0) == doctest::Approx(1.0));
  CHECK(km.at(3.0) == doctest::Approx(0.75 * 0.5));
  CHECK(km.at(4.0) == doctest::Approx(0.0));
  CHECK(kaplan_meier(v, Arm::control).at(5) == doctest::Approx(0.5));
}

TEST_CASE("G(0,0) equals the plain log-rank statistic") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto v = random_view(seed, 2.0);
    CHECK(std::abs(weighted_logrank(v, {0, 0}).z - plain_logrank(v)) < 1e-12);
  }
}

TEST_CASE("swapping arm labels negates the statistic") {
  for (std::uint64_t seed : {11, 12, 13}) {
    auto v = random_view(seed, 1.0);
    for (WeightSpec w : {WeightSpec{0, 0}, WeightSpec{0, 1}, WeightSpec{1, 0}, WeightSpec{0.5, 2}}) {
      const double z = weighted_logrank(v, w).z;
      auto s = v;
      for (auto& o : s.observations)
        o.arm = o.arm == Arm::control ? Arm::experimental : Arm::control;
      CHECK(weighted_logrank(s, w).z == doctest::Approx(-z).epsilon(1e-12));
    }
  }
}

TEST_CASE("late weights ignore the first event") {
  // With Ŝ(t⁻) = 1 at the first event, G(0,γ>0) gives it weight zero.
  const auto v = view_of({{Arm::control, 1, true, 0},
                          {Arm::control, 2, true, 0},
                          {Arm::experimental, 3, false, 0},
                          {Arm::experimental, 4, false, 0}});
  const auto late = weighted_logrank(v, {0, 1});
  // Only the event at t=2 counts: n=3, n1=1, weight 1 − 3/4.
  const double w = 0.25;
  CHECK(late.score == doctest::Approx(w * (1 - 1.0 / 3)));
  CHECK(late.variance == doctest::Approx(w * w * (1.0 / 3) * (2.0 / 3)));
}

TEST_CASE("weight function") {
  CHECK(WeightSpec{0, 0}(0.3) == 1.0);
  CHECK(WeightSpec{1, 0}(0.3) == doctest::Approx(0.3));
  CHECK(WeightSpec{0, 2}(0.3) == doctest::Approx(0.49));
  CHECK_THROWS(WeightSpec{-1, 0}.validate());
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(risk_table(view_of({{Arm::control, 1, false, 0}})), std::domain_error);
  CHECK_THROWS_AS(weighted_logrank(view_of({{Arm::control, 1, true, 0}, {Arm::control, 2, true, 0}}),
                                   {0, 0}),
                  std::domain_error);
  CHECK_THROWS(kaplan_meier(CensoredView{}));
}

TEST_CASE("statistic favors the experimental arm under a real effect") {
  double mean = 0.0;
  for (std::uint64_t seed = 100; seed < 140; ++seed) mean += weighted_logrank(random_view(seed, 0), {0, 0}).z;
  CHECK(mean / 40 > 1.0);
}
