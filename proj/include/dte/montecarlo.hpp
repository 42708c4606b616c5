#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dte/adaptive.hpp"
#include "dte/design.hpp"
#include "dte/estimators.hpp"
#include "dte/survival_model.hpp"

namespace dte {

/// Independent stream for one replicate of one grid cell. Streams depend
/// only on the key, never on scheduling.
Rng replicate_rng(std::uint64_t seed, std::uint64_t cell, std::uint64_t replicate);

/// Runs fn(i) for i in [0, count) on `workers` threads and returns results
/// in index order.
template <class T>
std::vector<T> run_replicates(std::size_t count, unsigned workers,
                              const std::function<T(std::size_t)>& fn);

enum class Stage { interim, final };

struct TrialOutcome {
  bool rejected = false;
  Stage stage_stopped = Stage::final;
  int crossing_look = -1;  // 0-based look that rejected, -1 if none
  long final_events = 0;
  long patients = 0;
  bool resized = false;
  double resize_ratio = 1.0;   // new / planned total events
  double patient_ratio = 1.0;  // new / planned patients
  std::optional<Zone> zone;    // adaptive trials only
  bool capped = false;         // re-estimate truncated at n_max
  bool pathological = false;   // a statistic was undefined
};

struct GsdPlan {
  long patients = 0;
  std::vector<long> look_events;
  std::vector<double> boundaries;
  WeightSpec weights{};
  Allocation allocation{};
  EnrollmentModel enrollment{};
};

struct AdaptivePlan {
  long patients = 0;
  long planned_events = 0;  // n₂
  long interim_events = 0;  // n₁
  WeightSpec weights{};
  Allocation allocation{};
  EnrollmentModel enrollment{};
  double alpha = 0.025;  // level of the final combination test
  double beta = 0.1;
};

/// Interim and final weighted log-rank Z values of one group sequential
/// trial; looks after a crossing are still evaluated.
std::vector<double> gsd_statistics(const GsdPlan& plan, const DelayedEffectModel& model,
                                   Rng& rng);

TrialOutcome run_gsd_trial(const GsdPlan& plan, const DelayedEffectModel& model,
                           Rng& rng);

/// Interim at n₁ events, re-estimation by `config`, continuation to n₂*
/// events with extra subjects entering after the interim cut, and an
/// inverse-normal test on the enrollment-split cohorts. No early stopping.
TrialOutcome run_adaptive_trial(const AdaptivePlan& plan, const AdaptiveConfig& config,
                                const DelayedEffectModel& model, Rng& rng);

struct OperatingCharacteristics {
  std::size_t replicates = 0;
  double rejection_rate = 0.0;  // power or type-I error
  double mc_se = 0.0;
  double resize_frequency = 0.0;
  double promising_frequency = 0.0;
  double mean_resize_ratio = 1.0;  // over resized trials only
  double mean_patient_ratio = 1.0;  // over resized trials only
  double mean_events = 0.0;
  double mean_patients = 0.0;
  std::vector<double> crossing_rates;  // per look
  std::size_t pathological = 0;
  std::size_t capped = 0;
};

OperatingCharacteristics summarize(const std::vector<TrialOutcome>& outcomes,
                                   std::size_t looks);

enum class Truth { null, alternative };
enum class Sizing { fixed_at_zero_delay, resized_per_delay };

std::string_view to_string(Truth truth);
std::string_view to_string(Sizing sizing);
Truth parse_truth(std::string_view name);
Sizing parse_sizing(std::string_view name);

struct ScenarioGrid {
  std::vector<double> delays;
  std::vector<WeightSpec> weights;
  Truth truth = Truth::alternative;
  Sizing sizing = Sizing::fixed_at_zero_delay;

  void validate() const;
};

/// Everything about a simulated trial that is not a grid axis.
struct SimulationSettings {
  /// Design assumptions; the grid overrides the delay and the weights.
  DesignSpec design{};
  EnrollmentModel enrollment{};
  std::vector<double> fractions{0.75, 1.0};
  BoundaryFamily family = BoundaryFamily::lan_demets_obf;
  /// Nominal level used for the tests (α′); the design's α when unset.
  std::optional<double> nominal_alpha;
  /// Adaptive design instead of a group sequential one when set.
  std::optional<AdaptiveConfig> adaptive;
  /// n_max = factor · planned events when adaptive->n_max is not positive.
  double n_max_factor = 15.0;

  double test_alpha() const { return nominal_alpha ? *nominal_alpha : design.alpha; }
};

struct CellResult {
  double delay = 0.0;
  WeightSpec weights{};
  Truth truth = Truth::alternative;
  Sizing sizing = Sizing::fixed_at_zero_delay;
  std::string rule;  // "gsd" or the re-estimation rule
  double test_alpha = 0.025;
  long patients = 0;         // planned
  long planned_events = 0;
  OperatingCharacteristics oc;
};

/// Planned patients/events for a cell (sizing is always done under the
/// alternative at the design's α).
SampleSizeResult size_cell(const SimulationSettings& settings, double delay,
                           const WeightSpec& weights, Sizing sizing);

/// Runs one cell. `cell_index` keys the random streams.
CellResult run_cell(const SimulationSettings& settings, double delay,
                    const WeightSpec& weights, Truth truth, Sizing sizing,
                    std::size_t replicates, std::uint64_t seed,
                    std::uint64_t cell_index, unsigned workers);

/// All cells in grid order (weights outer, delays inner).
std::vector<CellResult> estimate_oc(const ScenarioGrid& grid,
                                    const SimulationSettings& settings,
                                    std::size_t replicates, std::uint64_t seed,
                                    unsigned workers);

struct RecalibrationResult {
  double alpha_prime = 0.0;
  double achieved = 0.0;  // empirical type-I at alpha_prime
  double mc_se = 0.0;
  double unadjusted = 0.0;  // empirical type-I at the target
  int iterations = 0;
  bool adjusted = false;
  std::string note;
};

/// Bisection on the nominal test level α′ ∈ (0, target] until the empirical
/// type-I error under ψ = 1 is within `tolerance` of the target. The sample
/// size stays at the target-level design; random streams are shared across
/// iterations.
RecalibrationResult recalibrate_alpha(const SimulationSettings& settings,
                                      const WeightSpec& weights, double delay,
                                      Sizing sizing, double target_alpha,
                                      double tolerance, std::size_t replicates,
                                      std::uint64_t seed, unsigned workers);

}  // namespace dte

#include "dte/montecarlo_impl.hpp"
