#pragma once

#include <optional>
#include <vector>

#include "dte/survival_model.hpp"

namespace dte {

struct RiskRow {
  double time;
  int events;                // d_i
  int control_events;        // d_1i
  int at_risk;               // n_i
  int control_at_risk;       // n_1i
  int experimental_at_risk;  // n_2i
};

/// One row per distinct event time, in increasing time order.
struct RiskTable {
  std::vector<RiskRow> rows;
};

/// Product-limit estimate as a right-continuous step function.
struct KaplanMeier {
  std::vector<double> times;     // distinct event times
  std::vector<double> survival;  // Ŝ(times[i])

  double at(double t) const;          // Ŝ(t)
  double left_limit(double t) const;  // Ŝ(t⁻)
};

/// Fleming–Harrington G^{ρ,γ} weight parameters.
struct WeightSpec {
  double rho = 0.0;
  double gamma = 0.0;

  void validate() const;
  double operator()(double s) const;
};

enum class WeightTiming {
  left_limit,   // Ŝ(t_i⁻): predictable, the default
  right_limit,  // Ŝ(t_i)
};

struct LogRankResult {
  double z = 0.0;  // > 0 favors the experimental arm
  double one_sided_p = 0.5;
  double score = 0.0;     // Σ r_i (d_1i − E d_1i)
  double variance = 0.0;  // Σ r_i² Var d_1i
};

/// Throws std::domain_error when the view has no events.
RiskTable risk_table(const CensoredView& view);

/// Pooled estimate when `arm` is empty, otherwise restricted to one arm.
KaplanMeier kaplan_meier(const CensoredView& view,
                         std::optional<Arm> arm = std::nullopt);

/// Weighted log-rank Z for control vs. experimental. Weights come from the
/// pooled Kaplan–Meier curve. Throws std::domain_error when an arm is
/// missing or the variance is zero.
LogRankResult weighted_logrank(const CensoredView& view, const WeightSpec& w,
                               WeightTiming timing = WeightTiming::left_limit);

/// Same statistic from a prebuilt risk table.
LogRankResult weighted_logrank(const RiskTable& table, const WeightSpec& w,
                               WeightTiming timing = WeightTiming::left_limit);

}  // namespace dte
