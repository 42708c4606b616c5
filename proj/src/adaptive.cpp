#include "dte/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dte/normal.hpp"

namespace dte {

void InterimState::validate() const {
  if (!std::isfinite(z1)) throw std::invalid_argument("interim z1 must be finite");
  if (!(n1 > 0.0)) throw std::invalid_argument("interim events n1 must be positive");
  if (!(n2 > n1)) throw std::invalid_argument("planned events n2 must exceed n1");
}

double InterimState::delta1_hat() const { return std::exp(-2.0 * z1 / std::sqrt(n1)); }

void AdaptiveConfig::validate(double n2, double beta) const {
  if (rule != ReestimationRule::none &&
      !(cp_min > 0.0 && cp_min < 1.0 - beta))
    throw std::invalid_argument("cp_min must lie in (0, 1 - beta)");
  if (rule != ReestimationRule::none && !(n_max >= n2))
    throw std::invalid_argument("n_max must be at least the planned events");
  if (eta && !(*eta >= 0.0)) throw std::invalid_argument("eta must be >= 0");
}

double AdaptiveConfig::zone_lower_bound() const {
  return rule == ReestimationRule::chw_guarded ? std::max(cp_min, 0.5) : cp_min;
}

std::string_view to_string(ReestimationRule rule) {
  switch (rule) {
    case ReestimationRule::none: return "none";
    case ReestimationRule::promising_zone: return "promising-zone";
    case ReestimationRule::chw_guarded: return "chw-guarded";
    case ReestimationRule::jennison_turnbull: return "jennison-turnbull";
    case ReestimationRule::fixed_increase: return "fixed-increase";
  }
  return "?";
}

ReestimationRule parse_rule(std::string_view name) {
  for (auto r : {ReestimationRule::none, ReestimationRule::promising_zone,
                 ReestimationRule::chw_guarded, ReestimationRule::jennison_turnbull,
                 ReestimationRule::fixed_increase})
    if (to_string(r) == name) return r;
  throw std::invalid_argument("unknown re-estimation rule '" + std::string(name) + "'");
}

std::string_view to_string(FixedIncreasePolicy policy) {
  return policy == FixedIncreasePolicy::at_zone_minimum ? "at-zone-minimum"
                                                        : "at-zone-maximum";
}

FixedIncreasePolicy parse_policy(std::string_view name) {
  if (name == "at-zone-minimum") return FixedIncreasePolicy::at_zone_minimum;
  if (name == "at-zone-maximum") return FixedIncreasePolicy::at_zone_maximum;
  throw std::invalid_argument("unknown fixed-increase policy '" + std::string(name) + "'");
}

std::string_view to_string(Zone zone) {
  switch (zone) {
    case Zone::favorable: return "favorable";
    case Zone::promising: return "promising";
    case Zone::unfavorable: return "unfavorable";
  }
  return "?";
}

namespace {

// Argument of Φ in the consistent conditional power.
double cp_argument(const InterimState& s, double n2_tilde, double z_alpha) {
  const double a = (z_alpha * std::sqrt(s.n2) - s.z1 * std::sqrt(s.n1)) /
                   std::sqrt(s.n2 - s.n1);
  return a - s.z1 * std::sqrt(n2_tilde - s.n1) / std::sqrt(s.n1);
}

}  // namespace

double conditional_power(const InterimState& state, double n2_tilde, double alpha,
                         ConditionalPowerForm form) {
  state.validate();
  if (n2_tilde < state.n1)
    throw std::invalid_argument("conditional_power: candidate events below n1");
  const double z_alpha = upper_quantile(alpha);
  if (form == ConditionalPowerForm::printed) {
    if (n2_tilde <= 0.0) throw std::invalid_argument("conditional_power: ñ₂ must be positive");
    const double arg = (z_alpha * std::sqrt(state.n2) - state.z1 * std::sqrt(state.n1)) /
                           std::sqrt(n2_tilde) -
                       state.z1 * std::sqrt(n2_tilde) / std::sqrt(state.n1);
    return norm_sf(arg);
  }
  return norm_sf(cp_argument(state, n2_tilde, z_alpha));
}

std::optional<double> gao_second_stage(const InterimState& state, double alpha,
                                       double beta) {
  state.validate();
  if (!(state.z1 > 0.0)) return std::nullopt;
  const double a = (upper_quantile(alpha) * std::sqrt(state.n2) -
                    state.z1 * std::sqrt(state.n1)) /
                   std::sqrt(state.n2 - state.n1);
  const double root = a + upper_quantile(beta);
  if (root <= 0.0) return state.n1;
  return state.n1 + state.n1 / (state.z1 * state.z1) * root * root;
}

ZoneDecision classify_zone(const InterimState& state, const AdaptiveConfig& config,
                           double alpha, double beta) {
  const double cp = conditional_power(state, state.n2, alpha);
  if (cp >= 1.0 - beta) return {Zone::favorable, cp, state.n2};
  if (cp < config.zone_lower_bound()) return {Zone::unfavorable, cp, state.n2};
  const auto target = gao_second_stage(state, alpha, beta);
  const double n2_star = target ? std::min(*target, config.n_max) : config.n_max;
  return {Zone::promising, cp, std::max(n2_star, state.n2)};
}

double jt_optimize(const InterimState& state, const AdaptiveConfig& config,
                   double alpha, double beta) {
  (void)beta;
  state.validate();
  const double lo = state.n2;
  const double hi = config.n_max;
  if (!(hi > lo)) return lo;
  const double eta = config.resolved_eta(state.n2);
  if (!(state.z1 > 0.0)) return lo;  // CP is nonincreasing in ñ
  if (eta == 0.0) return hi;

  const double z_alpha = upper_quantile(alpha);
  // Objective without the constant 1: −Φ(arg) − η(ñ − n₂). Using Φ rather
  // than 1 − Φ keeps strict increase visible deep in the tail.
  auto objective = [&](double n) {
    return -norm_cdf(cp_argument(state, n, z_alpha)) - eta * (n - lo);
  };

  // CP depends on √(ñ − n₁); scan uniformly in that scale.
  constexpr int kGrid = 512;
  const double x_lo = std::sqrt(lo - state.n1);
  const double x_hi = std::sqrt(hi - state.n1);
  auto at = [&](double x) { return state.n1 + x * x; };

  int best = 0;
  double best_f = objective(lo);
  for (int i = 1; i <= kGrid; ++i) {
    const double f = objective(at(x_lo + (x_hi - x_lo) * i / kGrid));
    if (f > best_f) {
      best_f = f;
      best = i;
    }
  }
  if (best == 0 || best == kGrid) return best == 0 ? lo : hi;

  // Golden-section refinement inside the neighbouring grid cells.
  double a = x_lo + (x_hi - x_lo) * (best - 1) / kGrid;
  double b = x_lo + (x_hi - x_lo) * (best + 1) / kGrid;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = objective(at(c)), fd = objective(at(d));
  while (b - a > 1e-9 * (1.0 + b)) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = objective(at(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = objective(at(d));
    }
  }
  const double n_star = at(0.5 * (a + b));
  // An interior stationary point can lose to the lower endpoint only by a
  // hair; prefer the smaller maximizer on ties.
  return objective(n_star) > objective(lo) ? n_star : lo;
}

double z1_for_conditional_power(double n1, double n2, double cp, double alpha) {
  if (!(n1 > 0.0 && n2 > n1)) throw std::invalid_argument("need 0 < n1 < n2");
  if (!(cp > 0.0 && cp < 1.0)) throw std::invalid_argument("cp must lie in (0, 1)");
  // Φ⁻¹(1 − cp) = z_α√n₂/√(n₂−n₁) − z₁(√n₁/√(n₂−n₁) + √(n₂−n₁)/√n₁).
  const double r1 = std::sqrt(n1), r21 = std::sqrt(n2 - n1);
  const double lhs = upper_quantile(alpha) * std::sqrt(n2) / r21 - upper_quantile(cp);
  return lhs / (r1 / r21 + r21 / r1);
}

double fixed_increase_target(double n1, double n2, const AdaptiveConfig& config,
                             double alpha, double beta) {
  const double cp = config.fixed_increase_policy == FixedIncreasePolicy::at_zone_minimum
                        ? config.zone_lower_bound()
                        : 1.0 - beta;
  const InterimState edge{z1_for_conditional_power(n1, n2, cp, alpha), n1, n2};
  const auto target = gao_second_stage(edge, alpha, beta);
  const double n = target ? std::min(*target, config.n_max) : config.n_max;
  return std::max(n, n2);
}

double fixed_increase_rule(const InterimState& state, const AdaptiveConfig& config,
                           double alpha, double beta) {
  const double cp = conditional_power(state, state.n2, alpha);
  if (cp >= 1.0 - beta || cp < config.zone_lower_bound()) return state.n2;
  return fixed_increase_target(state.n1, state.n2, config, alpha, beta);
}

RuleDecision apply_rule(const InterimState& state, const AdaptiveConfig& config,
                        double alpha, double beta) {
  ZoneDecision zone = classify_zone(state, config, alpha, beta);
  switch (config.rule) {
    case ReestimationRule::none:
      return {zone.zone, zone.cp, state.n2};
    case ReestimationRule::promising_zone:
    case ReestimationRule::chw_guarded:
      return {zone.zone, zone.cp, zone.n2_star};
    case ReestimationRule::jennison_turnbull: {
      if (zone.cp < config.zone_lower_bound()) return {zone.zone, zone.cp, state.n2};
      const double n = jt_optimize(state, config, alpha, beta);
      return {zone.zone, zone.cp, std::max(n, state.n2)};
    }
    case ReestimationRule::fixed_increase:
      return {zone.zone, zone.cp, fixed_increase_rule(state, config, alpha, beta)};
  }
  return {zone.zone, zone.cp, state.n2};
}

CombinationInputs CombinationInputs::with_planned_events(double p1, double p2,
                                                         double stage1_events,
                                                         double stage2_events) {
  if (!(stage1_events > 0.0 && stage2_events > 0.0))
    throw std::invalid_argument("planned stage events must be positive");
  const double total = stage1_events + stage2_events;
  return {p1, p2, std::sqrt(stage1_events / total), std::sqrt(stage2_events / total)};
}

CombinationResult inverse_normal_combine(const CombinationInputs& in, double alpha) {
  if (!(in.xi1 >= 0.0 && in.xi2 >= 0.0) ||
      std::abs(in.xi1 * in.xi1 + in.xi2 * in.xi2 - 1.0) > 1e-9)
    throw std::invalid_argument("combination weights must satisfy xi1^2 + xi2^2 = 1");
  constexpr double kLo = 1e-12, kHi = 1.0 - 1e-12;
  CombinationResult out;
  auto clamp = [&](double p) {
    if (std::isnan(p)) throw std::invalid_argument("p-value is NaN");
    if (p < kLo || p > kHi) out.clamped = true;
    return std::clamp(p, kLo, kHi);
  };
  const double p1 = clamp(in.p1), p2 = clamp(in.p2);
  out.z_star = in.xi1 * upper_quantile(p1) + in.xi2 * upper_quantile(p2);
  out.reject = out.z_star > upper_quantile(alpha);
  return out;
}

namespace {

std::optional<LogRankResult> try_logrank(const CensoredView& view,
                                         const WeightSpec& weights) {
  if (view.events_observed == 0) return std::nullopt;
  try {
    return weighted_logrank(view, weights);
  } catch (const std::domain_error&) {
    return std::nullopt;
  }
}

}  // namespace

JenkinsSplit jenkins_split(const TrialDataset& data, double interim_cut,
                           double final_cut, const WeightSpec& weights) {
  if (!(interim_cut < final_cut))
    throw std::invalid_argument("jenkins_split: interim cut must precede the final cut");
  const CensoredView first = censor_at_time_if(
      data, final_cut, [&](const Subject& s) { return s.entry < interim_cut; });
  const CensoredView second = censor_at_time_if(
      data, final_cut, [&](const Subject& s) { return s.entry >= interim_cut; });

  JenkinsSplit out;
  out.stage1_subjects = first.observations.size();
  out.stage2_subjects = second.observations.size();
  out.stage1_events = first.events_observed;
  out.stage2_events = second.events_observed;
  out.stage1 = try_logrank(first, weights);
  out.stage2 = try_logrank(second, weights);
  return out;
}

CombinationResult combine_split(const JenkinsSplit& split, double xi1, double xi2,
                                double alpha) {
  if (!split.stage1) throw std::domain_error("combine_split: stage-1 statistic undefined");
  if (split.second_cohort_missing())
    return inverse_normal_combine({split.stage1->one_sided_p, 0.5, 1.0, 0.0}, alpha);
  return inverse_normal_combine(
      {split.stage1->one_sided_p, split.stage2->one_sided_p, xi1, xi2}, alpha);
}

}  // namespace dte
