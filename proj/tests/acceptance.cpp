// Acceptance checks. Usage: acceptance [criterion ...]; no argument runs all.
// Each criterion prints one PASS/FAIL line followed by indented details.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dte/montecarlo.hpp"
#include "dte/normal.hpp"

using namespace dte;

namespace {

constexpr std::uint64_t kSeed = 20240501;
constexpr std::size_t kReplicates = 10000;

// Criterion 1
constexpr long kEventTol = 1, kPatientTol = 2;
constexpr double kC1Seconds = 5.0;
// Criterion 2
constexpr double kBoundaryTol = 0.01, kAlphaTol = 0.001, kCrossTol = 0.01, kC2Seconds = 1.0;
// Criterion 3
constexpr double kPowerTol = 0.01, kTypeOneTol = 0.005, kC3Seconds = 120.0;
// Criterion 4
constexpr double kSeparationSe = 3.0, kFlatTol = 0.015;
// Criterion 5
constexpr double kDelayTol = 0.5, kZoneTol = 0.03, kPowerFloor = 0.80;
// Criterion 6
constexpr double kMatchTol = 0.01, kJtFromDelay = 4.0;
// Criterion 7
constexpr double kCpTol = 1e-10, kLogrankTol = 1e-12, kC7Seconds = 30.0;

using clock_type = std::chrono::steady_clock;
double seconds_since(clock_type::time_point t) {
  return std::chrono::duration<double>(clock_type::now() - t).count();
}

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
}

bool verdict(int k, const char* title, bool ok) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", k, title);
  std::fflush(stdout);
  return ok;
}

SimulationSettings adaptive(ReestimationRule rule, double cp_min) {
  SimulationSettings s;
  AdaptiveConfig c;
  c.rule = rule;
  c.cp_min = cp_min;
  s.adaptive = c;
  return s;
}

// ---------------------------------------------------------------------------

bool criterion1() {
  const long events[2][6] = {{258, 359, 492, 686, 986, 1436}, {369, 376, 406, 468, 578, 741}};
  const long patients[2][6] = {{330, 456, 621, 860, 1228, 1777}, {472, 478, 512, 587, 719, 917}};
  const auto start = clock_type::now();
  bool ok = true;
  for (int g = 0; g < 2; ++g)
    for (int e = 0; e < 6; ++e) {
      DesignSpec s;
      s.model = s.model.with_delay(e);
      s.weights = {0, double(g)};
      const auto r = hasegawa_sample_size(s);
      const bool cell = std::labs(r.d - events[g][e]) <= kEventTol &&
                        std::labs(r.n - patients[g][e]) <= kPatientTol;
      ok &= cell;
      detail("(0,%d) delay %d: events %ld (target %ld), patients %ld (target %ld) %s", g, e, r.d,
             events[g][e], r.n, patients[g][e], cell ? "ok" : "OUT");
    }
  const double t = seconds_since(start);
  detail("runtime %.3f s (limit %.0f s)", t, kC1Seconds);
  return verdict(1, "published sample-size table within +-1 event / +-2 patients", ok && t < kC1Seconds);
}

bool criterion2() {
  const auto start = clock_type::now();
  const auto s = obf_boundaries({0.75, 1.0}, 0.025, 0.9);
  const double t = seconds_since(start);
  const double b[] = {2.34, 2.012}, a[] = {0.01, 0.025}, c[] = {0.688, 0.212};
  bool ok = t < kC2Seconds;
  for (int k = 0; k < 2; ++k) {
    const bool look = std::abs(s.boundaries[k] - b[k]) <= kBoundaryTol &&
                      std::abs(s.cumulative_alpha[k] - a[k]) <= kAlphaTol &&
                      std::abs(s.crossing[k] - c[k]) <= kCrossTol;
    ok &= look;
    detail("look %d: boundary %.5f (%.3f), cumulative alpha %.5f (%.3f), crossing %.4f (%.3f) %s",
           k + 1, s.boundaries[k], b[k], s.cumulative_alpha[k], a[k], s.crossing[k], c[k],
           look ? "ok" : "OUT");
  }
  detail("drift %.5f, runtime %.4f s (limit %.0f s)", *s.drift, t, kC2Seconds);
  return verdict(2, "published boundaries, spending and crossing probabilities", ok);
}

bool criterion3() {
  const auto start = clock_type::now();
  SimulationSettings s;
  const auto alt = run_cell(s, 0, {0, 0}, Truth::alternative, Sizing::fixed_at_zero_delay,
                            kReplicates, kSeed, 0, 1);
  const auto null = run_cell(s, 0, {0, 0}, Truth::null, Sizing::fixed_at_zero_delay,
                             kReplicates, kSeed, 1, 1);
  const double t = seconds_since(start);
  const bool power = std::abs(alt.oc.rejection_rate - 0.90) <= kPowerTol;
  const bool size = std::abs(null.oc.rejection_rate - 0.025) <= kTypeOneTol;
  detail("n=%ld, d=%ld: power %.4f (se %.4f), target 0.90 +- %.3f %s", alt.patients,
         alt.planned_events, alt.oc.rejection_rate, alt.oc.mc_se, kPowerTol, power ? "ok" : "OUT");
  detail("interim crossing %.4f (0.688 informative)", alt.oc.crossing_rates[0]);
  detail("type-I %.4f (se %.4f), target 0.025 +- %.3f %s", null.oc.rejection_rate,
         null.oc.mc_se, kTypeOneTol, size ? "ok" : "OUT");
  detail("runtime %.1f s (target %.0f s)", t, kC3Seconds);
  return verdict(3, "group sequential calibration at desk scale", power && size && t < kC3Seconds);
}

bool criterion4() {
  SimulationSettings s;
  const auto p00 = run_cell(s, 5, {0, 0}, Truth::alternative, Sizing::fixed_at_zero_delay,
                            kReplicates, kSeed, 5, 1);
  const auto p01 = run_cell(s, 5, {0, 1}, Truth::alternative, Sizing::fixed_at_zero_delay,
                            kReplicates, kSeed, 5, 1);
  const double se = std::hypot(p00.oc.mc_se, p01.oc.mc_se);
  const double gap = p01.oc.rejection_rate - p00.oc.rejection_rate;
  bool ok = gap > kSeparationSe * se;
  detail("delay 5, zero-delay sizing: (0,0) %.4f, (0,1) %.4f, gap %.4f vs %.1f se = %.4f %s",
         p00.oc.rejection_rate, p01.oc.rejection_rate, gap, kSeparationSe, kSeparationSe * se,
         ok ? "ok" : "OUT");
  for (double g : {0.0, 1.0})
    for (int e = 0; e <= 5; ++e) {
      const auto c = run_cell(s, e, {0, g}, Truth::alternative, Sizing::resized_per_delay,
                              kReplicates, kSeed, 100 + e, 1);
      const bool flat = std::abs(c.oc.rejection_rate - 0.90) <= kFlatTol;
      ok &= flat;
      detail("(0,%g) sized at delay %d (n=%ld, d=%ld): power %.4f (se %.4f) %s", g, e,
             c.patients, c.planned_events, c.oc.rejection_rate, c.oc.mc_se, flat ? "ok" : "OUT");
    }
  return verdict(4, "delay degradation ordering and per-delay sizing at 0.90 +- 0.015", ok);
}

// First delay at which power falls below the floor, interpolated linearly
// between grid points; +inf if it never does.
double crossing_delay(const std::vector<double>& delays, const std::vector<double>& power) {
  for (std::size_t i = 0; i < power.size(); ++i)
    if (power[i] < kPowerFloor) {
      if (i == 0) return delays[0];
      const double f = (power[i - 1] - kPowerFloor) / (power[i - 1] - power[i]);
      return delays[i - 1] + f * (delays[i] - delays[i - 1]);
    }
  return std::numeric_limits<double>::infinity();
}

bool criterion5() {
  const WeightSpec w{0, 1};
  std::vector<double> delays;
  for (double d = 0; d <= 7.0 + 1e-9; d += 0.5) delays.push_back(d);
  struct Target {
    double cp_min, delay, zone_peak;
  };
  bool ok = true;
  for (const Target& target : {Target{0.5, 3.5, 0.15}, Target{0.1, 4.0, 0.35}, Target{0.001, 6.0, 0.70}}) {
    const auto s = adaptive(ReestimationRule::promising_zone, target.cp_min);
    std::vector<double> power;
    double peak = 0, peak_at = 0;
    std::string series;
    for (std::size_t i = 0; i < delays.size(); ++i) {
      const auto c = run_cell(s, delays[i], w, Truth::alternative, Sizing::fixed_at_zero_delay,
                              kReplicates, kSeed, i, 1);
      power.push_back(c.oc.rejection_rate);
      if (c.oc.resize_frequency > peak) {
        peak = c.oc.resize_frequency;
        peak_at = delays[i];
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, " %.1f:%.3f/%.3f", delays[i], c.oc.rejection_rate,
                    c.oc.resize_frequency);
      series += buf;
    }
    const double cross = crossing_delay(delays, power);
    const bool d_ok = std::abs(cross - target.delay) <= kDelayTol;
    const bool z_ok = std::abs(peak - target.zone_peak) <= kZoneTol;
    ok &= d_ok && z_ok;
    detail("cp_min %g: delay:power/resize_freq%s", target.cp_min, series.c_str());
    detail("cp_min %g: power below 0.80 from %.2f months (target %.1f +- %.1f) %s", target.cp_min,
           cross, target.delay, kDelayTol, d_ok ? "ok" : "OUT");
    detail("cp_min %g: resize frequency peaks at %.3f at %.1f months (target %.2f +- %.2f) %s",
           target.cp_min, peak, peak_at, target.zone_peak, kZoneTol, z_ok ? "ok" : "OUT");
  }

  struct Rule {
    const char* name;
    ReestimationRule rule;
    double cp_min;
  };
  const Rule rules[] = {{"none", ReestimationRule::none, 0.5},
                        {"promising-zone 0.5", ReestimationRule::promising_zone, 0.5},
                        {"promising-zone 0.1", ReestimationRule::promising_zone, 0.1},
                        {"promising-zone 0.001", ReestimationRule::promising_zone, 0.001},
                        {"chw-guarded 0.1", ReestimationRule::chw_guarded, 0.1},
                        {"jennison-turnbull 0.001", ReestimationRule::jennison_turnbull, 0.001},
                        {"fixed-increase 0.1", ReestimationRule::fixed_increase, 0.1}};
  for (const Rule& r : rules) {
    auto s = adaptive(r.rule, r.cp_min);
    const auto cal = recalibrate_alpha(s, w, 0, Sizing::fixed_at_zero_delay, 0.025, 0.001,
                                       kReplicates, kSeed + 1, 1);
    s.nominal_alpha = cal.alpha_prime;
    // Fresh streams for the check, so it is not the calibration sample.
    const auto c = run_cell(s, 0, w, Truth::null, Sizing::fixed_at_zero_delay, kReplicates,
                            kSeed + 2, 0, 1);
    const bool t_ok = std::abs(c.oc.rejection_rate - 0.025) <= kTypeOneTol;
    ok &= t_ok;
    detail("type-I %-24s alpha' %.5f (%s): %.4f (se %.4f) %s", r.name, cal.alpha_prime,
           cal.note.c_str(), c.oc.rejection_rate, c.oc.mc_se, t_ok ? "ok" : "OUT");
  }
  return verdict(5, "promising zone power horizon, zone frequencies, type-I per rule", ok);
}

bool criterion6() {
  const WeightSpec w{0, 1};
  const auto pz = adaptive(ReestimationRule::promising_zone, 0.001);
  const auto jt = adaptive(ReestimationRule::jennison_turnbull, 0.001);
  double worst = 0;
  bool fewer = true;
  for (int e = 0; e <= 7; ++e) {
    // Same streams for both rules at each delay.
    const auto a = run_cell(pz, e, w, Truth::alternative, Sizing::fixed_at_zero_delay,
                            kReplicates, kSeed, e, 1);
    const auto b = run_cell(jt, e, w, Truth::alternative, Sizing::fixed_at_zero_delay,
                            kReplicates, kSeed, e, 1);
    const double gap = b.oc.rejection_rate - a.oc.rejection_rate;
    worst = std::max(worst, std::abs(gap));
    const bool smaller = e < kJtFromDelay || b.oc.mean_events <= a.oc.mean_events;
    fewer &= smaller;
    detail("delay %d: power PZ %.4f JT %.4f (gap %+.4f); mean events PZ %.1f JT %.1f%s", e,
           a.oc.rejection_rate, b.oc.rejection_rate, gap, a.oc.mean_events, b.oc.mean_events,
           e >= kJtFromDelay ? (smaller ? " ok" : " OUT") : "");
  }
  const bool matched = worst <= kMatchTol;
  detail("eta = %.4f / n2 (frozen); largest power gap %.4f (limit %.2f) %s", jt_eta_scale, worst,
         kMatchTol, matched ? "ok" : "OUT");
  return verdict(6, "Jennison-Turnbull uses no more events than the promising zone at matched power",
                 matched && fewer);
}

// Unweighted log-rank from first principles.
double plain_logrank(const CensoredView& v) {
  std::map<double, std::pair<int, int>> deaths;
  for (const auto& o : v.observations)
    if (o.event) {
      deaths[o.time].first++;
      deaths[o.time].second += o.arm == Arm::control;
    }
  double oe = 0, var = 0;
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

bool criterion7() {
  const auto start = clock_type::now();
  bool ok = true;
  auto check = [&](const char* name, bool pass, double measure) {
    ok &= pass;
    detail("%-44s %.3g %s", name, measure, pass ? "ok" : "OUT");
  };

  double cp_err = 0;
  for (double z1 = 0.05; z1 < 3.0; z1 += 0.05) {
    const InterimState s{z1, 277, 369};
    const auto n = gao_second_stage(s, 0.025, 0.1);
    if (n && *n > s.n1) cp_err = std::max(cp_err, std::abs(conditional_power(s, *n, 0.025) - 0.9));
  }
  check("CP at the Gao re-estimate minus 1-beta", cp_err <= kCpTol, cp_err);

  double lr_err = 0, swap_err = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto data = simulate_cohort(DelayedEffectModel::from_medians(6, 9, 2), EnrollmentModel{},
                                      200, Allocation{}, rng);
    auto v = censor_at_event_count(data, 150);
    lr_err = std::max(lr_err, std::abs(weighted_logrank(v, {0, 0}).z - plain_logrank(v)));
    const double z = weighted_logrank(v, {0, 1}).z;
    for (auto& o : v.observations) o.arm = o.arm == Arm::control ? Arm::experimental : Arm::control;
    swap_err = std::max(swap_err, std::abs(weighted_logrank(v, {0, 1}).z + z));
  }
  check("G(0,0) minus plain log-rank", lr_err <= kLogrankTol, lr_err);
  check("arm swap: z + z_swapped", swap_err <= kLogrankTol, swap_err);

  double jump = 0, mass_err = 0;
  for (double eps : {1.0, 3.0, 5.0}) {
    const auto m = DelayedEffectModel::from_medians(6, 9, eps);
    jump = std::max(jump, std::abs(m.survival(Arm::experimental, eps - 1e-13) -
                                   m.survival(Arm::experimental, eps)));
    // Closed-form mass: (1 − e^{−λε}) + c·e^{−ψλε}.
    const double mass = 1 - std::exp(-m.lambda() * eps) + m.c() * std::exp(-m.psi() * m.lambda() * eps);
    mass_err = std::max(mass_err, std::abs(mass - 1));
  }
  check("S2 jump at the delay", jump <= 1e-12, jump);
  check("f2 total mass minus one", mass_err <= 1e-14, mass_err);

  SimulationSettings s;
  const auto a = run_cell(s, 3, {0, 1}, Truth::alternative, Sizing::fixed_at_zero_delay, 500, 3, 0, 1);
  const auto b = run_cell(s, 3, {0, 1}, Truth::alternative, Sizing::fixed_at_zero_delay, 500, 3, 0, 4);
  const auto c = run_cell(s, 3, {0, 1}, Truth::alternative, Sizing::fixed_at_zero_delay, 500, 3, 0, 1);
  const bool same = a.oc.rejection_rate == b.oc.rejection_rate &&
                    a.oc.mean_events == b.oc.mean_events &&
                    a.oc.crossing_rates == b.oc.crossing_rates &&
                    a.oc.rejection_rate == c.oc.rejection_rate;
  check("seed / worker-count determinism (mismatches)", same, same ? 0 : 1);

  AdaptiveConfig fi;
  fi.rule = ReestimationRule::fixed_increase;
  fi.cp_min = 0.1;
  fi.n_max = 5535;
  const double lo = z1_for_conditional_power(277, 369, 0.1, 0.025);
  const double hi = z1_for_conditional_power(277, 369, 0.9, 0.025);
  const double first = apply_rule({lo + 1e-9, 277, 369}, fi, 0.025, 0.1).n2_star;
  double spread = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double z = lo + (hi - lo) * (i + 0.5) / 1001;
    spread = std::max(spread, std::abs(apply_rule({z, 277, 369}, fi, 0.025, 0.1).n2_star - first));
  }
  check("fixed increase spread over the promising zone", spread == 0.0 && first > 369, spread);

  const double t = seconds_since(start);
  detail("runtime %.2f s (limit %.0f s)", t, kC7Seconds);
  return verdict(7, "property suites", ok && t < kC7Seconds);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<bool()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int k = 1; k <= 7; ++k) selected.push_back(k);
  bool all = true;
  for (int k : selected) {
    if (k < 1 || k > 7) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    all &= criteria[k - 1]();
  }
  return all ? 0 : 1;
}
