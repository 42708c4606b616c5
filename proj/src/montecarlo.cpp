#include "dte/montecarlo.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "dte/normal.hpp"

namespace dte {

Rng replicate_rng(std::uint64_t seed, std::uint64_t cell, std::uint64_t replicate) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(cell), hi(cell), lo(replicate), hi(replicate)};
  return Rng(seq);
}

namespace {

double statistic_or_nan(const CensoredView& view, const WeightSpec& weights) {
  try {
    return weighted_logrank(view, weights).z;
  } catch (const std::domain_error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

TrialOutcome gsd_outcome(const std::vector<double>& z, const std::vector<double>& boundaries,
                         const std::vector<long>& look_events, long patients) {
  TrialOutcome out;
  out.patients = patients;
  out.final_events = look_events.back();
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (std::isnan(z[k])) {
      out.pathological = true;
      continue;
    }
    if (z[k] > boundaries[k]) {
      out.rejected = true;
      out.crossing_look = static_cast<int>(k);
      out.stage_stopped = k + 1 < z.size() ? Stage::interim : Stage::final;
      out.final_events = look_events[k];
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<double> gsd_statistics(const GsdPlan& plan, const DelayedEffectModel& model,
                                   Rng& rng) {
  const TrialDataset data =
      simulate_cohort(model, plan.enrollment, plan.patients, plan.allocation, rng);
  std::vector<double> z;
  z.reserve(plan.look_events.size());
  for (long events : plan.look_events)
    z.push_back(statistic_or_nan(
        censor_at_event_count(data, static_cast<std::size_t>(events)), plan.weights));
  return z;
}

TrialOutcome run_gsd_trial(const GsdPlan& plan, const DelayedEffectModel& model, Rng& rng) {
  if (plan.look_events.empty() || plan.look_events.size() != plan.boundaries.size())
    throw std::invalid_argument("run_gsd_trial: one boundary per look is required");
  if (plan.look_events.back() > plan.patients)
    throw std::invalid_argument("run_gsd_trial: more events than patients");
  return gsd_outcome(gsd_statistics(plan, model, rng), plan.boundaries, plan.look_events,
                     plan.patients);
}

TrialOutcome run_adaptive_trial(const AdaptivePlan& plan, const AdaptiveConfig& config,
                                const DelayedEffectModel& model, Rng& rng) {
  if (!(plan.interim_events > 0 && plan.interim_events < plan.planned_events &&
        plan.planned_events <= plan.patients))
    throw std::invalid_argument("run_adaptive_trial: need 0 < n1 < n2 <= patients");
  config.validate(static_cast<double>(plan.planned_events), plan.beta);

  TrialOutcome out;
  TrialDataset data =
      simulate_cohort(model, plan.enrollment, plan.patients, plan.allocation, rng);
  const CensoredView interim =
      censor_at_event_count(data, static_cast<std::size_t>(plan.interim_events));
  const double z1 = statistic_or_nan(interim, plan.weights);
  out.patients = plan.patients;
  out.final_events = plan.planned_events;
  if (std::isnan(z1)) {
    out.pathological = true;
    return out;
  }

  const InterimState state{z1, static_cast<double>(plan.interim_events),
                           static_cast<double>(plan.planned_events)};
  const RuleDecision decision = apply_rule(state, config, plan.alpha, plan.beta);
  out.zone = decision.zone;

  long target = std::max(plan.planned_events,
                         static_cast<long>(std::ceil(decision.n2_star - 1e-9)));
  if (config.rule != ReestimationRule::none) {
    const long cap = static_cast<long>(std::floor(config.n_max + 1e-9));
    target = std::min(target, std::max(cap, plan.planned_events));
    out.capped = decision.n2_star > plan.planned_events &&
                 decision.n2_star >= config.n_max - 1e-9;
  }

  if (target > plan.planned_events) {
    // Patients scale with events through the planned event fraction.
    const double ratio = double(target) / plan.planned_events;
    long patients = plan.allocation.round_up(ratio * plan.patients);
    patients = std::max(patients, plan.allocation.round_up(double(target)));
    extend_cohort(data, model, plan.enrollment, patients - plan.patients, plan.allocation,
                  interim.cut_calendar_time, rng);
    out.resized = true;
    out.resize_ratio = ratio;
    out.patient_ratio = double(patients) / plan.patients;
    out.patients = patients;
  }
  out.final_events = target;

  const double final_cut = event_count_cut(data, static_cast<std::size_t>(target));
  const JenkinsSplit split =
      jenkins_split(data, interim.cut_calendar_time, final_cut, plan.weights);
  if (!split.stage1) {
    out.pathological = true;
    return out;
  }
  const auto xi = CombinationInputs::with_planned_events(
      0.5, 0.5, double(plan.interim_events),
      double(plan.planned_events - plan.interim_events));
  out.rejected = combine_split(split, xi.xi1, xi.xi2, plan.alpha).reject;
  return out;
}

OperatingCharacteristics summarize(const std::vector<TrialOutcome>& outcomes,
                                   std::size_t looks) {
  OperatingCharacteristics oc;
  oc.replicates = outcomes.size();
  oc.crossing_rates.assign(looks, 0.0);
  if (outcomes.empty()) return oc;
  std::size_t rejected = 0, resized = 0, promising = 0;
  double ratio_sum = 0.0, patient_ratio_sum = 0.0, events = 0.0, patients = 0.0;
  for (const auto& o : outcomes) {
    rejected += o.rejected;
    if (o.crossing_look >= 0 && static_cast<std::size_t>(o.crossing_look) < looks)
      oc.crossing_rates[o.crossing_look] += 1.0;
    if (o.resized) {
      ++resized;
      ratio_sum += o.resize_ratio;
      patient_ratio_sum += o.patient_ratio;
    }
    promising += o.zone == Zone::promising;
    events += o.final_events;
    patients += o.patients;
    oc.pathological += o.pathological;
    oc.capped += o.capped;
  }
  const double m = static_cast<double>(outcomes.size());
  oc.rejection_rate = rejected / m;
  oc.mc_se = std::sqrt(oc.rejection_rate * (1.0 - oc.rejection_rate) / m);
  oc.resize_frequency = resized / m;
  oc.promising_frequency = promising / m;
  if (resized) {
    oc.mean_resize_ratio = ratio_sum / resized;
    oc.mean_patient_ratio = patient_ratio_sum / resized;
  }
  oc.mean_events = events / m;
  oc.mean_patients = patients / m;
  for (auto& r : oc.crossing_rates) r /= m;
  return oc;
}

std::string_view to_string(Truth truth) {
  return truth == Truth::null ? "null" : "alternative";
}

std::string_view to_string(Sizing sizing) {
  return sizing == Sizing::fixed_at_zero_delay ? "fixed-at-zero-delay" : "resized-per-delay";
}

Truth parse_truth(std::string_view name) {
  if (name == "null") return Truth::null;
  if (name == "alternative") return Truth::alternative;
  throw std::invalid_argument("unknown truth '" + std::string(name) + "'");
}

Sizing parse_sizing(std::string_view name) {
  if (name == "fixed-at-zero-delay") return Sizing::fixed_at_zero_delay;
  if (name == "resized-per-delay") return Sizing::resized_per_delay;
  throw std::invalid_argument("unknown sizing '" + std::string(name) + "'");
}

void ScenarioGrid::validate() const {
  if (delays.empty()) throw std::invalid_argument("grid.delays must not be empty");
  if (weights.empty()) throw std::invalid_argument("grid.weights must not be empty");
  for (double d : delays)
    if (!(d >= 0.0)) throw std::invalid_argument("grid.delays must be >= 0");
  for (const auto& w : weights) w.validate();
}

SampleSizeResult size_cell(const SimulationSettings& settings, double delay,
                           const WeightSpec& weights, Sizing sizing) {
  DesignSpec spec = settings.design;
  spec.weights = weights;
  spec.model = spec.model.with_delay(sizing == Sizing::fixed_at_zero_delay ? 0.0 : delay);
  return hasegawa_sample_size(spec);
}

namespace {

DelayedEffectModel truth_model(const SimulationSettings& settings, double delay, Truth truth) {
  const DelayedEffectModel m = settings.design.model.with_delay(delay);
  return truth == Truth::null ? m.with_psi(1.0) : m;
}

std::vector<long> look_events(const std::vector<double>& fractions, long events) {
  std::vector<long> out;
  for (double f : fractions)
    out.push_back(static_cast<long>(std::ceil(f * events - 1e-9)));
  return out;
}

GsdPlan make_gsd_plan(const SimulationSettings& s, const SampleSizeResult& sized,
                      const WeightSpec& weights, double alpha) {
  GsdPlan plan;
  plan.patients = sized.n;
  plan.look_events = look_events(s.fractions, sized.d);
  plan.boundaries = obf_boundaries(s.fractions, alpha, std::nullopt, s.family).boundaries;
  plan.weights = weights;
  plan.allocation = s.design.allocation;
  plan.enrollment = s.enrollment;
  return plan;
}

AdaptivePlan make_adaptive_plan(const SimulationSettings& s, const SampleSizeResult& sized,
                                const WeightSpec& weights, double alpha) {
  AdaptivePlan plan;
  plan.patients = sized.n;
  plan.planned_events = sized.d;
  plan.interim_events = look_events({s.fractions.front()}, sized.d).front();
  plan.weights = weights;
  plan.allocation = s.design.allocation;
  plan.enrollment = s.enrollment;
  plan.alpha = alpha;
  plan.beta = s.design.beta;
  return plan;
}

AdaptiveConfig resolve_config(const SimulationSettings& s, long planned_events) {
  AdaptiveConfig c = *s.adaptive;
  if (!(c.n_max > 0.0)) c.n_max = s.n_max_factor * planned_events;
  return c;
}

}  // namespace

CellResult run_cell(const SimulationSettings& settings, double delay,
                    const WeightSpec& weights, Truth truth, Sizing sizing,
                    std::size_t replicates, std::uint64_t seed,
                    std::uint64_t cell_index, unsigned workers) {
  const SampleSizeResult sized = size_cell(settings, delay, weights, sizing);
  const DelayedEffectModel model = truth_model(settings, delay, truth);
  const double alpha = settings.test_alpha();

  CellResult cell;
  cell.delay = delay;
  cell.weights = weights;
  cell.truth = truth;
  cell.sizing = sizing;
  cell.test_alpha = alpha;
  cell.patients = sized.n;
  cell.planned_events = sized.d;

  std::vector<TrialOutcome> outcomes;
  if (settings.adaptive) {
    const AdaptivePlan plan = make_adaptive_plan(settings, sized, weights, alpha);
    const AdaptiveConfig config = resolve_config(settings, sized.d);
    cell.rule = std::string(to_string(config.rule));
    outcomes = run_replicates<TrialOutcome>(replicates, workers, [&](std::size_t i) {
      Rng rng = replicate_rng(seed, cell_index, i);
      return run_adaptive_trial(plan, config, model, rng);
    });
    cell.oc = summarize(outcomes, 1);
  } else {
    const GsdPlan plan = make_gsd_plan(settings, sized, weights, alpha);
    cell.rule = "gsd";
    outcomes = run_replicates<TrialOutcome>(replicates, workers, [&](std::size_t i) {
      Rng rng = replicate_rng(seed, cell_index, i);
      return run_gsd_trial(plan, model, rng);
    });
    cell.oc = summarize(outcomes, plan.look_events.size());
  }
  return cell;
}

std::vector<CellResult> estimate_oc(const ScenarioGrid& grid,
                                    const SimulationSettings& settings,
                                    std::size_t replicates, std::uint64_t seed,
                                    unsigned workers) {
  grid.validate();
  std::vector<CellResult> cells;
  std::uint64_t index = 0;
  for (const auto& w : grid.weights)
    for (double delay : grid.delays)
      cells.push_back(run_cell(settings, delay, w, grid.truth, grid.sizing, replicates,
                               seed, index++, workers));
  return cells;
}

RecalibrationResult recalibrate_alpha(const SimulationSettings& settings,
                                      const WeightSpec& weights, double delay,
                                      Sizing sizing, double target_alpha,
                                      double tolerance, std::size_t replicates,
                                      std::uint64_t seed, unsigned workers) {
  if (!(target_alpha > 0.0 && target_alpha < 0.5))
    throw std::invalid_argument("target alpha must lie in (0, 0.5)");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");

  const SampleSizeResult sized = size_cell(settings, delay, weights, sizing);
  const DelayedEffectModel null_model = truth_model(settings, delay, Truth::null);

  std::function<double(double)> type_one;
  if (settings.adaptive) {
    const AdaptiveConfig config = resolve_config(settings, sized.d);
    type_one = [&, config](double alpha) {
      const AdaptivePlan plan = make_adaptive_plan(settings, sized, weights, alpha);
      const auto outcomes = run_replicates<TrialOutcome>(replicates, workers, [&](std::size_t i) {
        Rng rng = replicate_rng(seed, 0, i);
        return run_adaptive_trial(plan, config, null_model, rng);
      });
      return summarize(outcomes, 1).rejection_rate;
    };
  } else {
    // Statistics do not depend on α′; simulate once and re-threshold.
    const GsdPlan plan = make_gsd_plan(settings, sized, weights, target_alpha);
    auto stats = std::make_shared<std::vector<std::vector<double>>>(
        run_replicates<std::vector<double>>(replicates, workers, [&](std::size_t i) {
          Rng rng = replicate_rng(seed, 0, i);
          return gsd_statistics(plan, null_model, rng);
        }));
    type_one = [&, stats, plan](double alpha) {
      const auto b = obf_boundaries(settings.fractions, alpha, std::nullopt, settings.family)
                         .boundaries;
      std::size_t rejected = 0;
      for (const auto& z : *stats)
        rejected += gsd_outcome(z, b, plan.look_events, plan.patients).rejected;
      return double(rejected) / stats->size();
    };
  }

  RecalibrationResult out;
  auto se = [&](double p) { return std::sqrt(p * (1.0 - p) / replicates); };
  out.unadjusted = type_one(target_alpha);
  out.alpha_prime = target_alpha;
  out.achieved = out.unadjusted;
  if (out.unadjusted <= target_alpha + tolerance) {
    out.mc_se = se(out.achieved);
    out.note = out.unadjusted < target_alpha - tolerance
                   ? "type-I already below target; no adjustment"
                   : "type-I within tolerance at the target level";
    return out;
  }

  double lo = target_alpha * 1e-3, hi = target_alpha;
  for (out.iterations = 1; out.iterations <= 40; ++out.iterations) {
    const double mid = 0.5 * (lo + hi);
    const double rate = type_one(mid);
    out.alpha_prime = mid;
    out.achieved = rate;
    if (std::abs(rate - target_alpha) <= tolerance) break;
    (rate > target_alpha ? hi : lo) = mid;
  }
  out.adjusted = true;
  out.mc_se = se(out.achieved);
  out.note = std::abs(out.achieved - target_alpha) <= tolerance
                 ? "converged"
                 : "bisection exhausted before reaching tolerance";
  return out;
}

}  // namespace dte
