#pragma once

#include <optional>
#include <numbers>
#include <string_view>

#include "dte/estimators.hpp"
#include "dte/survival_model.hpp"

namespace dte {

/// Interim summary. All counts are events (statistical information).
struct InterimState {
  double z1 = 0.0;  // interim statistic, > 0 favors experimental
  double n1 = 0.0;  // events at the interim
  double n2 = 0.0;  // originally planned total events

  void validate() const;
  /// Hazard-ratio estimate exp(−2 z₁/√n₁) for 1:1 allocation. Reporting only.
  double delta1_hat() const;
};

enum class ReestimationRule {
  none,
  promising_zone,
  chw_guarded,  // promising zone with the lower bound raised to CP >= 0.5
  jennison_turnbull,
  fixed_increase,
};

enum class FixedIncreasePolicy {
  at_zone_minimum,  // increase sized at CP = cp_min: the largest increase
  at_zone_maximum,  // increase sized at CP = 1 − β: the smallest increase
};

/// Fitted once (minimax power gap to the promising zone at cp_min = 0.001,
/// (ρ,γ) = (0,1), delays 0..7, seed 99) and frozen.
inline constexpr double jt_eta_scale = 0.012;

struct AdaptiveConfig {
  ReestimationRule rule = ReestimationRule::promising_zone;
  double cp_min = 0.5;
  double n_max = 0.0;  // maximum total events
  /// JT penalty per event; unset means jt_eta_scale / n₂.
  std::optional<double> eta;
  FixedIncreasePolicy fixed_increase_policy = FixedIncreasePolicy::at_zone_minimum;

  void validate(double n2, double beta) const;
  double resolved_eta(double n2) const { return eta ? *eta : jt_eta_scale / n2; }
  double zone_lower_bound() const;
};

std::string_view to_string(ReestimationRule rule);
ReestimationRule parse_rule(std::string_view name);
std::string_view to_string(FixedIncreasePolicy policy);
FixedIncreasePolicy parse_policy(std::string_view name);

enum class ConditionalPowerForm {
  /// 1 − Φ((z_α√n₂ − z₁√n₁)/√(n₂−n₁) − z₁√(ñ₂−n₁)/√n₁); inverted exactly by
  /// gao_second_stage.
  consistent,
  /// 1 − Φ((z_α√n₂ − z₁√n₁)/√ñ₂ − z₁√ñ₂/√n₁).
  printed,
};

/// Conditional power at candidate total events ñ₂ ≥ n₁ under the interim
/// trend.
double conditional_power(const InterimState& state, double n2_tilde,
                         double alpha,
                         ConditionalPowerForm form = ConditionalPowerForm::consistent);

/// Total events at which the conditional power equals 1 − β. Empty when
/// z₁ ≤ 0 (no finite number of events suffices). Returns n₁ when the
/// interim is already powered with no further events.
std::optional<double> gao_second_stage(const InterimState& state, double alpha,
                                       double beta);

enum class Zone { favorable, promising, unfavorable };
std::string_view to_string(Zone zone);

struct ZoneDecision {
  Zone zone;
  double cp;       // conditional power at the planned n₂
  double n2_star;  // new total events
};

ZoneDecision classify_zone(const InterimState& state, const AdaptiveConfig& config,
                           double alpha, double beta);

/// argmax over [n₂, n_max] of CP(ñ) − η(ñ − n₂), smallest maximizer.
double jt_optimize(const InterimState& state, const AdaptiveConfig& config,
                   double alpha, double beta);

/// Interim statistic at which CP at the planned n₂ equals `cp`.
double z1_for_conditional_power(double n1, double n2, double cp, double alpha);

/// The constant total used by the fixed-increase rule, independent of z₁.
double fixed_increase_target(double n1, double n2, const AdaptiveConfig& config,
                             double alpha, double beta);

/// n₂* = fixed_increase_target on the promising zone, n₂ elsewhere.
double fixed_increase_rule(const InterimState& state, const AdaptiveConfig& config,
                           double alpha, double beta);

struct RuleDecision {
  Zone zone;
  double cp;
  double n2_star;
};

/// Dispatches on config.rule. The result is never below n₂.
RuleDecision apply_rule(const InterimState& state, const AdaptiveConfig& config,
                        double alpha, double beta);

struct CombinationInputs {
  double p1 = 0.5;
  double p2 = 0.5;
  double xi1 = 1.0 / std::numbers::sqrt2;
  double xi2 = 1.0 / std::numbers::sqrt2;

  /// ξ₁² = n₁/(n₁+n₂), ξ₂² = n₂/(n₁+n₂) from the planned stage counts.
  static CombinationInputs with_planned_events(double p1, double p2,
                                               double stage1_events,
                                               double stage2_events);
};

struct CombinationResult {
  double z_star = 0.0;
  bool reject = false;
  bool clamped = false;  // a p-value was moved into [1e-12, 1 − 1e-12]
};

CombinationResult inverse_normal_combine(const CombinationInputs& inputs,
                                         double alpha);

/// Stage-wise tests on cohorts split by enrollment relative to the interim
/// cut, both followed up to the final cut.
struct JenkinsSplit {
  std::optional<LogRankResult> stage1;
  std::optional<LogRankResult> stage2;
  std::size_t stage1_subjects = 0;
  std::size_t stage2_subjects = 0;
  std::size_t stage1_events = 0;
  std::size_t stage2_events = 0;

  /// No stage-2 statistic: empty cohort or the test is undefined on it.
  bool second_cohort_missing() const { return !stage2.has_value(); }
};

JenkinsSplit jenkins_split(const TrialDataset& data, double interim_cut,
                           double final_cut, const WeightSpec& weights);

/// Inverse-normal decision on a split. Without a stage-2 statistic the
/// decision falls back to Φ⁻¹(1 − p₁) > z_α with weight 1 on stage 1.
/// Throws std::domain_error when the stage-1 statistic is undefined.
CombinationResult combine_split(const JenkinsSplit& split, double xi1,
                                double xi2, double alpha);

}  // namespace dte
