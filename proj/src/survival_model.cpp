#include "dte/survival_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dte {

DelayedEffectModel::DelayedEffectModel(double lambda, double psi,
                                       double epsilon)
    : lambda_(lambda), psi_(psi), epsilon_(epsilon) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be positive");
  if (!(psi > 0.0) || !std::isfinite(psi))
    throw std::invalid_argument("psi must be positive");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("epsilon must be non-negative");
  c_ = std::exp(epsilon_ * lambda_ * (psi_ - 1.0));
}

DelayedEffectModel DelayedEffectModel::from_medians(double control_median,
                                                    double experimental_median,
                                                    double epsilon) {
  if (!(control_median > 0.0) || !(experimental_median > 0.0))
    throw std::invalid_argument("medians must be positive");
  const double lambda = std::log(2.0) / control_median;
  return {lambda, control_median / experimental_median, epsilon};
}

double DelayedEffectModel::uncorrected_c() const {
  if (psi_ == 1.0) return epsilon_ == 0.0 ? 1.0 : INFINITY;
  return std::exp(epsilon_ * psi_ * lambda_ / (psi_ - 1.0));
}

double DelayedEffectModel::hazard(Arm arm, double t) const {
  if (arm == Arm::control || t < epsilon_) return lambda_;
  return psi_ * lambda_;
}

double DelayedEffectModel::survival(Arm arm, double t) const {
  if (t < 0.0) throw std::domain_error("survival: negative time");
  if (arm == Arm::control || t < epsilon_) return std::exp(-lambda_ * t);
  return c_ * std::exp(-psi_ * lambda_ * t);
}

double DelayedEffectModel::density(Arm arm, double t) const {
  return hazard(arm, t) * survival(arm, t);
}

DelayedEffectModel DelayedEffectModel::with_delay(double epsilon) const {
  return {lambda_, psi_, epsilon};
}

DelayedEffectModel DelayedEffectModel::with_psi(double psi) const {
  return {lambda_, psi, epsilon_};
}

void EnrollmentModel::validate() const {
  if (!(rate > 0.0)) throw std::invalid_argument("enrollment rate must be positive");
  if (!(accrual_horizon > 0.0))
    throw std::invalid_argument("accrual horizon must be positive");
  if (!(min_followup >= 0.0))
    throw std::invalid_argument("minimum follow-up must be non-negative");
}

long Allocation::round_up(double n) const {
  const long b = block();
  return static_cast<long>(std::ceil(n / b - 1e-9)) * b;
}

double survival(const DelayedEffectModel& model, Arm arm, double t) {
  return model.survival(arm, t);
}

double sample_event_time(const DelayedEffectModel& model, Arm arm, Rng& rng) {
  std::exponential_distribution<double> base(model.lambda());
  const double t = base(rng);
  if (arm == Arm::experimental && t > model.epsilon()) {
    std::exponential_distribution<double> late(model.psi() * model.lambda());
    return model.epsilon() + late(rng);
  }
  return t;
}

std::vector<double> sample_entries(const EnrollmentModel& enrollment, long n,
                                   Rng& rng) {
  enrollment.validate();
  std::vector<double> entries(static_cast<std::size_t>(n));
  switch (enrollment.mode) {
    case EnrollmentMode::per_subject_poisson: {
      std::poisson_distribution<long> draw(enrollment.rate);
      for (auto& e : entries) e = static_cast<double>(draw(rng));
      break;
    }
    case EnrollmentMode::poisson_process: {
      std::exponential_distribution<double> gap(enrollment.rate);
      double clock = 0.0;
      for (auto& e : entries) e = clock += gap(rng);
      break;
    }
    case EnrollmentMode::uniform: {
      std::uniform_real_distribution<double> draw(0.0, enrollment.accrual_horizon);
      for (auto& e : entries) e = draw(rng);
      break;
    }
  }
  return entries;
}

namespace {

void append_subjects(TrialDataset& data, const DelayedEffectModel& model,
                     const EnrollmentModel& enrollment, long n,
                     const Allocation& allocation, double entry_offset,
                     Rng& rng) {
  if (n <= 0) throw std::invalid_argument("cohort size must be positive");
  if (n % allocation.block() != 0)
    throw std::invalid_argument("cohort size " + std::to_string(n) +
                                " is not a multiple of the allocation block");
  const long n_control = n / allocation.block() * allocation.control;

  // Draw order follows the reference procedure: base exponential times,
  // then entries, then the post-delay redraws.
  std::exponential_distribution<double> base(model.lambda());
  std::vector<double> times(static_cast<std::size_t>(n));
  for (auto& t : times) t = base(rng);
  const std::vector<double> entries = sample_entries(enrollment, n, rng);
  std::exponential_distribution<double> late(model.psi() * model.lambda());

  data.subjects.reserve(data.subjects.size() + times.size());
  for (long i = 0; i < n; ++i) {
    const Arm arm = i < n_control ? Arm::control : Arm::experimental;
    double t = times[i];
    if (arm == Arm::experimental && t > model.epsilon())
      t = model.epsilon() + late(rng);
    data.subjects.push_back({arm, entry_offset + entries[i], t});
  }
}

// Subject indices ordered by (pseudo-survival, index).
std::vector<std::size_t> pseudo_order(const TrialDataset& data) {
  std::vector<std::size_t> order(data.subjects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.subjects[a].pseudo_survival() < data.subjects[b].pseudo_survival();
  });
  return order;
}

}  // namespace

TrialDataset simulate_cohort(const DelayedEffectModel& model,
                             const EnrollmentModel& enrollment, long n,
                             const Allocation& allocation, Rng& rng) {
  TrialDataset data;
  append_subjects(data, model, enrollment, n, allocation, 0.0, rng);
  return data;
}

void extend_cohort(TrialDataset& data, const DelayedEffectModel& model,
                   const EnrollmentModel& enrollment, long extra,
                   const Allocation& allocation, double entry_offset, Rng& rng) {
  append_subjects(data, model, enrollment, extra, allocation, entry_offset, rng);
}

double event_count_cut(const TrialDataset& data, std::size_t k) {
  if (k == 0 || k > data.subjects.size())
    throw std::out_of_range("event count " + std::to_string(k) +
                            " outside [1, " +
                            std::to_string(data.subjects.size()) + "]");
  std::vector<double> pseudo(data.subjects.size());
  std::transform(data.subjects.begin(), data.subjects.end(), pseudo.begin(),
                 [](const Subject& s) { return s.pseudo_survival(); });
  std::nth_element(pseudo.begin(), pseudo.begin() + (k - 1), pseudo.end());
  return pseudo[k - 1];
}

CensoredView censor_at_event_count(const TrialDataset& data, std::size_t k) {
  if (k == 0 || k > data.subjects.size())
    throw std::out_of_range("event count " + std::to_string(k) +
                            " outside [1, " +
                            std::to_string(data.subjects.size()) + "]");
  const std::vector<std::size_t> order = pseudo_order(data);
  const double cut = data.subjects[order[k - 1]].pseudo_survival();

  std::vector<char> is_event(data.subjects.size(), 0);
  for (std::size_t r = 0; r < k; ++r) is_event[order[r]] = 1;

  CensoredView view;
  view.cut_calendar_time = cut;
  view.observations.reserve(data.subjects.size());
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const Subject& s = data.subjects[i];
    if (!(s.entry < cut)) continue;
    const bool event = is_event[i];
    view.observations.push_back(
        {s.arm, event ? s.event_time : cut - s.entry, event, i});
  }
  view.events_observed = k;
  return view;
}

CensoredView censor_at_time(const TrialDataset& data, double cut) {
  return censor_at_time_if(data, cut, [](const Subject&) { return true; });
}

}  // namespace dte
