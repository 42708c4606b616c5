#include "dte/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dte/normal.hpp"

namespace dte {

double KaplanMeier::at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KaplanMeier::left_limit(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

void WeightSpec::validate() const {
  if (!(rho >= 0.0) || !(gamma >= 0.0))
    throw std::invalid_argument("weight parameters rho and gamma must be >= 0");
}

double WeightSpec::operator()(double s) const {
  // pow(0, 0) == 1, so (0, 0) is exactly the unweighted test.
  return std::pow(s, rho) * std::pow(1.0 - s, gamma);
}

namespace {

// Rows for all distinct times (event or not) are not needed; censored-only
// times just shrink later risk sets.
RiskTable build_table(std::vector<Observation> obs) {
  std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.event > b.event;  // events before censorings at ties
  });

  int n1 = 0, n2 = 0;
  for (const auto& o : obs) (o.arm == Arm::control ? n1 : n2) += 1;

  RiskTable table;
  std::size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].time;
    int d = 0, d1 = 0, c1 = 0, c2 = 0;
    std::size_t j = i;
    for (; j < obs.size() && obs[j].time == t; ++j) {
      const bool control = obs[j].arm == Arm::control;
      if (obs[j].event) {
        ++d;
        d1 += control;
      }
      (control ? c1 : c2) += 1;
    }
    if (d > 0) table.rows.push_back({t, d, d1, n1 + n2, n1, n2});
    n1 -= c1;
    n2 -= c2;
    i = j;
  }
  return table;
}

}  // namespace

RiskTable risk_table(const CensoredView& view) {
  RiskTable table = build_table(view.observations);
  if (table.rows.empty())
    throw std::domain_error("risk table: no events in view");
  return table;
}

KaplanMeier kaplan_meier(const CensoredView& view, std::optional<Arm> arm) {
  if (view.observations.empty())
    throw std::invalid_argument("kaplan_meier: empty view");
  std::vector<Observation> obs;
  if (arm) {
    std::copy_if(view.observations.begin(), view.observations.end(),
                 std::back_inserter(obs),
                 [&](const Observation& o) { return o.arm == *arm; });
    if (obs.empty()) throw std::invalid_argument("kaplan_meier: arm absent");
  } else {
    obs = view.observations;
  }
  const RiskTable table = build_table(std::move(obs));
  KaplanMeier km;
  double s = 1.0;
  for (const auto& row : table.rows) {
    s *= 1.0 - double(row.events) / row.at_risk;
    km.times.push_back(row.time);
    km.survival.push_back(s);
  }
  return km;
}

LogRankResult weighted_logrank(const RiskTable& table, const WeightSpec& w,
                               WeightTiming timing) {
  w.validate();
  if (table.rows.empty()) throw std::domain_error("weighted_logrank: no events");

  LogRankResult out;
  double km = 1.0;  // pooled Ŝ just before the current row
  bool has_control = false, has_experimental = false;
  for (const auto& row : table.rows) {
    const double n = row.at_risk;
    const double d = row.events;
    const double km_after = km * (1.0 - d / n);
    const double r = w(timing == WeightTiming::left_limit ? km : km_after);

    has_control |= row.control_at_risk > 0;
    has_experimental |= row.experimental_at_risk > 0;

    const double expected = row.control_at_risk * d / n;
    out.score += r * (row.control_events - expected);
    if (n > 1.0) {
      const double v = double(row.control_at_risk) * row.experimental_at_risk *
                       d * (n - d) / (n * n * (n - 1.0));
      out.variance += r * r * v;
    }
    km = km_after;
  }
  if (!has_control || !has_experimental)
    throw std::domain_error("weighted_logrank: both arms must be present");
  if (!(out.variance > 0.0))
    throw std::domain_error("weighted_logrank: zero variance");
  out.z = out.score / std::sqrt(out.variance);
  out.one_sided_p = norm_sf(out.z);
  return out;
}

LogRankResult weighted_logrank(const CensoredView& view, const WeightSpec& w,
                               WeightTiming timing) {
  return weighted_logrank(risk_table(view), w, timing);
}

}  // namespace dte
