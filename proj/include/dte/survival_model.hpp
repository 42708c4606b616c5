#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dte {

using Rng = std::mt19937_64;

enum class Arm : int { control = 1, experimental = 2 };

/// Two-arm survival model with a delayed treatment effect.
///
/// Both arms share hazard `lambda` until `epsilon` months after entry; from
/// then on the experimental hazard is `psi * lambda`. The experimental
/// survival after the delay is c·exp(-ψλt) with c chosen so S₂ is continuous
/// at ε and f₂ integrates to one.
class DelayedEffectModel {
 public:
  DelayedEffectModel(double lambda, double psi, double epsilon);

  /// Model from arm medians under proportional hazards plus a delay.
  static DelayedEffectModel from_medians(double control_median,
                                         double experimental_median,
                                         double epsilon);

  double lambda() const { return lambda_; }
  double psi() const { return psi_; }
  double epsilon() const { return epsilon_; }
  /// Normalization constant c = exp[ελ(ψ−1)].
  double c() const { return c_; }

  /// The constant exp[εψλ/(ψ−1)]. It satisfies neither continuity of S₂
  /// nor ∫f₂ = 1 unless ε = 0; kept only so the two can be compared.
  double uncorrected_c() const;

  double hazard(Arm arm, double t) const;
  double survival(Arm arm, double t) const;
  double density(Arm arm, double t) const;

  /// Same λ and ψ, different delay.
  DelayedEffectModel with_delay(double epsilon) const;
  DelayedEffectModel with_psi(double psi) const;

 private:
  double lambda_;
  double psi_;
  double epsilon_;
  double c_;
};

enum class EnrollmentMode {
  /// Each entry time is an independent Poisson(rate) draw (integer months).
  per_subject_poisson,
  /// Arrivals of a homogeneous Poisson process with intensity `rate`.
  poisson_process,
  /// Entries uniform on [0, accrual_horizon].
  uniform,
};

struct EnrollmentModel {
  EnrollmentMode mode = EnrollmentMode::per_subject_poisson;
  double rate = 10.0;             // patients/month, or Poisson mean for per-subject mode
  double accrual_horizon = 17.5;  // T
  double min_followup = 7.5;      // tau

  void validate() const;
};

struct Allocation {
  int control = 1;
  int experimental = 1;

  int block() const { return control + experimental; }
  double control_fraction() const { return double(control) / block(); }
  /// Smallest multiple of the allocation block that is >= n.
  long round_up(double n) const;
};

struct Subject {
  Arm arm;
  double entry;       // calendar months from study start
  double event_time;  // months from entry, uncensored

  double pseudo_survival() const { return entry + event_time; }
};

struct TrialDataset {
  std::vector<Subject> subjects;
  std::uint64_t seed = 0;
};

struct Observation {
  Arm arm;
  double time;  // months from entry
  bool event;
  std::size_t subject;  // index into the source dataset
};

/// Administrative-censoring snapshot of a dataset at a calendar cut.
struct CensoredView {
  std::vector<Observation> observations;
  double cut_calendar_time = 0.0;
  std::size_t events_observed = 0;
};

double survival(const DelayedEffectModel& model, Arm arm, double t);

/// Draws exponential(λ); for the experimental arm a draw beyond ε is
/// replaced by ε + exponential(ψλ).
double sample_event_time(const DelayedEffectModel& model, Arm arm, Rng& rng);

/// Entry times for `n` subjects under the enrollment law.
std::vector<double> sample_entries(const EnrollmentModel& enrollment, long n,
                                   Rng& rng);

/// n subjects; the first n·w₁ are control, the rest experimental.
TrialDataset simulate_cohort(const DelayedEffectModel& model,
                             const EnrollmentModel& enrollment, long n,
                             const Allocation& allocation, Rng& rng);

/// Appends subjects whose entries are `entry_offset` plus a fresh draw from
/// the enrollment law.
void extend_cohort(TrialDataset& data, const DelayedEffectModel& model,
                   const EnrollmentModel& enrollment, long extra,
                   const Allocation& allocation, double entry_offset, Rng& rng);

/// Calendar time at which the k-th event occurs (ties broken by subject
/// index).
double event_count_cut(const TrialDataset& data, std::size_t k);

/// View cut at the k-th smallest pseudo-survival time. Exactly k events;
/// subjects with entry >= cut are excluded.
CensoredView censor_at_event_count(const TrialDataset& data, std::size_t k);

/// View cut at a calendar time; status is event iff entry + event_time <= cut.
CensoredView censor_at_time(const TrialDataset& data, double cut);

/// As censor_at_time, restricted to subjects satisfying `include`.
template <class Pred>
CensoredView censor_at_time_if(const TrialDataset& data, double cut,
                               Pred include) {
  CensoredView view;
  view.cut_calendar_time = cut;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const Subject& s = data.subjects[i];
    if (!include(s) || !(s.entry < cut)) continue;
    const bool event = s.pseudo_survival() <= cut;
    view.observations.push_back(
        {s.arm, event ? s.event_time : cut - s.entry, event, i});
    view.events_observed += event;
  }
  return view;
}

}  // namespace dte
