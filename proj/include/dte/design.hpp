#pragma once

#include <optional>
#include <vector>

#include "dte/estimators.hpp"
#include "dte/survival_model.hpp"

namespace dte {

struct DesignSpec {
  DelayedEffectModel model = DelayedEffectModel::from_medians(6.0, 9.0, 0.0);
  double accrual = 17.5;       // T, months
  double min_followup = 7.5;   // tau, months
  Allocation allocation{};
  double alpha = 0.025;        // one-sided
  double beta = 0.1;
  WeightSpec weights{};
  /// Subintervals of [0, T+τ]; 0 selects one-month steps.
  int subintervals = 0;

  double horizon() const { return accrual + min_followup; }
  int resolved_subintervals() const;
  void validate() const;
};

struct MarkovInterval {
  double t;
  double control_at_risk;       // N*_1(t_i)
  double experimental_at_risk;  // N*_2(t_i)
  double theta;                 // h_2/h_1
  double phi;                   // N*_2/N*_1
  double events;                // D*_i, expected event fraction in the step
  double weight;                // r_i
};

struct MarkovEvaluation {
  std::vector<MarkovInterval> intervals;
  /// Standardized drift per √n; positive when the experimental arm is better.
  double e_star = 0.0;
  /// Σ D*_i, expected events per enrolled patient.
  double event_fraction = 0.0;
};

struct SampleSizeResult {
  double e_star = 0.0;
  double n_continuous = 0.0;
  long n = 0;  // patients, rounded up to the allocation block
  long d = 0;  // expected events, ceil(n · Σ D*_i)
};

/// Expected at-risk recursion under uniform accrual over [0, T] and
/// administrative censoring at T+τ. Per-step event probability is h·Δ.
MarkovEvaluation markov_evaluate(const DesignSpec& spec);

/// Throws std::domain_error when E* = 0 (no feasible design).
SampleSizeResult hasegawa_sample_size(const DesignSpec& spec);

/// Required events (z_α + z_β)² / (w₁ w₂ ln² hr).
double schoenfeld_events(double hr, double alpha, double beta, double w1,
                         double w2);

enum class BoundaryFamily {
  /// Lan–DeMets O'Brien–Fleming-type spending α(t) = 2 − 2Φ(z_{α/2}/√t).
  lan_demets_obf,
  /// z_k = C/√t_k with C solved for overall level α.
  classical_obf,
};

struct LookSchedule {
  std::vector<double> fractions;
  std::vector<double> boundaries;
  std::vector<double> cumulative_alpha;
  /// Incremental crossing probabilities under `drift`; empty without one.
  std::vector<double> crossing;
  std::optional<double> drift;  // E[Z_K] at full information
};

/// Incremental probabilities that the canonical Gaussian sequence with
/// Corr(Z_j, Z_k) = √(t_j/t_k) and E[Z_k] = drift·√t_k first exceeds the
/// boundary at each look.
std::vector<double> crossing_probabilities(const std::vector<double>& fractions,
                                           const std::vector<double>& boundaries,
                                           double drift = 0.0);

/// Drift making the overall crossing probability equal `power`.
double drift_for_power(const std::vector<double>& fractions,
                       const std::vector<double>& boundaries, double power);

/// Efficacy boundaries for one-sided level α. With `power`, the drift is
/// solved so the overall crossing probability equals it and the incremental
/// crossing probabilities are filled in.
LookSchedule obf_boundaries(const std::vector<double>& fractions, double alpha,
                            std::optional<double> power = std::nullopt,
                            BoundaryFamily family = BoundaryFamily::lan_demets_obf);

}  // namespace dte
