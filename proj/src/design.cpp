#include "dte/design.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "dte/normal.hpp"

namespace dte {

int DesignSpec::resolved_subintervals() const {
  if (subintervals > 0) return subintervals;
  return std::max(1, static_cast<int>(std::ceil(horizon() - 1e-9)));
}

void DesignSpec::validate() const {
  if (!(accrual > 0.0)) throw std::invalid_argument("accrual must be positive");
  if (!(min_followup >= 0.0))
    throw std::invalid_argument("min_followup must be non-negative");
  if (!(alpha > 0.0 && alpha < 0.5))
    throw std::invalid_argument("alpha must lie in (0, 0.5)");
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("beta must lie in (0, 1)");
  if (allocation.control <= 0 || allocation.experimental <= 0)
    throw std::invalid_argument("allocation weights must be positive");
  if (subintervals < 0) throw std::invalid_argument("subintervals must be >= 0");
  weights.validate();
}

MarkovEvaluation markov_evaluate(const DesignSpec& spec) {
  spec.validate();
  const DelayedEffectModel& model = spec.model;
  const int m = spec.resolved_subintervals();
  const double horizon = spec.horizon();
  const double dt = horizon / m;
  const double w1 = spec.allocation.control_fraction();
  const double w2 = 1.0 - w1;

  MarkovEvaluation out;
  out.intervals.reserve(static_cast<std::size_t>(m));
  double n1 = w1, n2 = w2;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < m; ++i) {
    const double t = i * dt;
    if (n1 < 0.0 || n2 < 0.0)
      throw std::domain_error(
          "markov_evaluate: negative at-risk mass at t=" + std::to_string(t) +
          "; increase the number of subintervals");
    const double h1 = model.hazard(Arm::control, t);
    const double h2 = model.hazard(Arm::experimental, t);
    const double pooled = w1 * model.survival(Arm::control, t) +
                          w2 * model.survival(Arm::experimental, t);
    const double r = spec.weights(pooled);
    const double theta = h2 / h1;
    const double phi = n2 / n1;
    const double d = (h1 * n1 + h2 * n2) * dt;

    // Written as (φ/(1+φ) − φθ/(1+φθ)) so that a beneficial effect (θ < 1)
    // gives positive E*.
    num += d * r * (phi / (1.0 + phi) - phi * theta / (1.0 + phi * theta));
    den += d * r * r * phi / ((1.0 + phi) * (1.0 + phi));
    out.event_fraction += d;
    out.intervals.push_back({t, n1, n2, theta, phi, d, r});

    const double censoring = t > spec.min_followup ? dt / (horizon - t) : 0.0;
    n1 *= 1.0 - h1 * dt - censoring;
    n2 *= 1.0 - h2 * dt - censoring;
  }
  out.e_star = den > 0.0 ? num / std::sqrt(den) : 0.0;
  return out;
}

SampleSizeResult hasegawa_sample_size(const DesignSpec& spec) {
  const MarkovEvaluation eval = markov_evaluate(spec);
  if (eval.e_star == 0.0)
    throw std::domain_error("no feasible design: E* = 0 (no detectable effect)");
  const double z = upper_quantile(spec.alpha) + upper_quantile(spec.beta);
  SampleSizeResult out;
  out.e_star = eval.e_star;
  out.n_continuous = z * z / (eval.e_star * eval.e_star);
  out.n = spec.allocation.round_up(out.n_continuous);
  out.d = static_cast<long>(std::ceil(out.n * eval.event_fraction - 1e-9));
  return out;
}

double schoenfeld_events(double hr, double alpha, double beta, double w1,
                         double w2) {
  if (!(hr > 0.0) || hr == 1.0)
    throw std::domain_error("schoenfeld_events: hazard ratio must be positive and != 1");
  if (!(w1 > 0.0 && w2 > 0.0))
    throw std::invalid_argument("schoenfeld_events: allocation must be positive");
  const double z = upper_quantile(alpha) + upper_quantile(beta);
  const double l = std::log(hr);
  return z * z / (w1 * w2 * l * l);
}

namespace {

constexpr double kGridStep = 0.005;
constexpr double kTailWidth = 10.0;

// Sub-density of Z_k on the continuation region (-inf, b_k), tabulated for
// Simpson integration.
struct Grid {
  std::vector<double> z;
  std::vector<double> density;  // already multiplied by Simpson weights
};

Grid make_grid(double lo, double hi) {
  Grid g;
  if (!(hi > lo)) return g;
  int n = static_cast<int>(std::ceil((hi - lo) / kGridStep));
  if (n % 2) ++n;
  const double h = (hi - lo) / n;
  g.z.resize(n + 1);
  g.density.resize(n + 1);
  for (int i = 0; i <= n; ++i) {
    g.z[i] = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    g.density[i] = w * h / 3.0;
  }
  return g;
}

void validate_fractions(const std::vector<double>& t) {
  if (t.empty()) throw std::invalid_argument("at least one look is required");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0.0) || (k > 0 && !(t[k] > t[k - 1])))
      throw std::invalid_argument("information fractions must be strictly increasing and positive");
  }
  if (std::abs(t.back() - 1.0) > 1e-12)
    throw std::invalid_argument("last information fraction must be 1");
}

// Propagates look-by-look densities. `next_boundary(k, cross)` is called
// before tabulating look k; `cross(b)` returns the probability of first
// crossing at look k if its boundary were b.
class GroupSequentialDensity {
 public:
  GroupSequentialDensity(const std::vector<double>& t, double drift)
      : t_(t), drift_(drift) {}

  double mean(std::size_t k) const { return drift_ * std::sqrt(t_[k]); }

  double cross(std::size_t k, double b) const {
    if (k == 0) return norm_sf(b - mean(0));
    const double ik = t_[k], ip = t_[k - 1], inc = ik - ip;
    const double sd = std::sqrt(inc);
    double p = 0.0;
    for (std::size_t j = 0; j < prev_.z.size(); ++j)
      p += prev_.density[j] *
           norm_sf((b * std::sqrt(ik) - prev_.z[j] * std::sqrt(ip) - drift_ * inc) / sd);
    return p;
  }

  // Fix look k's boundary and tabulate the continuation density there.
  void advance(std::size_t k, double b) {
    Grid g = make_grid(mean(k) - kTailWidth, b);
    if (k == 0) {
      for (std::size_t i = 0; i < g.z.size(); ++i)
        g.density[i] *= norm_pdf(g.z[i] - mean(0));
    } else {
      const double ik = t_[k], ip = t_[k - 1], inc = ik - ip;
      const double sd = std::sqrt(inc);
      const double scale = std::sqrt(ik) / sd;
      for (std::size_t i = 0; i < g.z.size(); ++i) {
        double f = 0.0;
        for (std::size_t j = 0; j < prev_.z.size(); ++j)
          f += prev_.density[j] *
               norm_pdf((g.z[i] * std::sqrt(ik) - prev_.z[j] * std::sqrt(ip) -
                         drift_ * inc) / sd);
        g.density[i] *= scale * f;
      }
    }
    prev_ = std::move(g);
  }

 private:
  const std::vector<double>& t_;
  double drift_;
  Grid prev_;
};

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double tol, const char* what) {
  double flo = f(lo), fhi = f(hi);
  if (flo * fhi > 0.0)
    throw std::runtime_error(std::string(what) + ": root not bracketed in [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> crossing_probabilities(const std::vector<double>& fractions,
                                           const std::vector<double>& boundaries,
                                           double drift) {
  validate_fractions(fractions);
  if (boundaries.size() != fractions.size())
    throw std::invalid_argument("one boundary per look is required");
  GroupSequentialDensity gs(fractions, drift);
  std::vector<double> out(fractions.size());
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    out[k] = gs.cross(k, boundaries[k]);
    if (k + 1 < fractions.size()) gs.advance(k, boundaries[k]);
  }
  return out;
}

double drift_for_power(const std::vector<double>& fractions,
                       const std::vector<double>& boundaries, double power) {
  if (!(power > 0.0 && power < 1.0))
    throw std::invalid_argument("power must lie in (0, 1)");
  auto f = [&](double theta) {
    const auto p = crossing_probabilities(fractions, boundaries, theta);
    double s = 0.0;
    for (double x : p) s += x;
    return s - power;
  };
  return bisect(f, -10.0, 20.0, 1e-10, "drift_for_power");
}

LookSchedule obf_boundaries(const std::vector<double>& fractions, double alpha,
                            std::optional<double> power, BoundaryFamily family) {
  validate_fractions(fractions);
  if (!(alpha > 0.0 && alpha < 0.5))
    throw std::invalid_argument("alpha must lie in (0, 0.5)");

  LookSchedule out;
  out.fractions = fractions;
  const std::size_t looks = fractions.size();

  if (family == BoundaryFamily::lan_demets_obf) {
    const double z_half = upper_quantile(alpha / 2.0);
    auto spent = [&](double t) { return 2.0 * norm_sf(z_half / std::sqrt(t)); };
    GroupSequentialDensity gs(fractions, 0.0);
    double previous = 0.0;
    for (std::size_t k = 0; k < looks; ++k) {
      const double target = (k + 1 == looks ? alpha : spent(fractions[k])) - previous;
      const double b = bisect([&](double x) { return gs.cross(k, x) - target; },
                              -8.0, 12.0, 1e-10, "obf_boundaries");
      out.boundaries.push_back(b);
      previous += gs.cross(k, b);
      out.cumulative_alpha.push_back(previous);
      if (k + 1 < looks) gs.advance(k, b);
    }
  } else {
    auto level = [&](double c) {
      std::vector<double> b(looks);
      for (std::size_t k = 0; k < looks; ++k) b[k] = c / std::sqrt(fractions[k]);
      const auto p = crossing_probabilities(fractions, b);
      double s = 0.0;
      for (double x : p) s += x;
      return s - alpha;
    };
    const double c = bisect(level, 0.0, 12.0, 1e-10, "obf_boundaries");
    for (std::size_t k = 0; k < looks; ++k)
      out.boundaries.push_back(c / std::sqrt(fractions[k]));
    const auto p = crossing_probabilities(fractions, out.boundaries);
    double s = 0.0;
    for (double x : p) out.cumulative_alpha.push_back(s += x);
  }

  if (power) {
    out.drift = drift_for_power(fractions, out.boundaries, *power);
    out.crossing = crossing_probabilities(fractions, out.boundaries, *out.drift);
  }
  return out;
}

}  // namespace dte
