#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prowl/learner.hpp"
#include "prowl/rng.hpp"

namespace prowl {

struct SearchDim {
  std::string name;
  long lower = 0;
  long upper = 0;
  long step = 1;

  long points() const { return (upper - lower) / step + 1; }
  long value_at(long idx) const { return lower + idx * step; }
};

struct SearchSpace {
  std::vector<SearchDim> dims;

  // Truncates each upper bound to the last step multiple.
  static SearchSpace make(std::vector<SearchDim> dims) {
    SearchSpace s;
    for (SearchDim& d : dims) {
      if (d.step <= 0) throw std::runtime_error("search dim " + d.name + ": step must be > 0");
      if (d.lower > d.upper)
        throw std::runtime_error("search dim " + d.name + ": lower > upper");
      d.upper = d.lower + ((d.upper - d.lower) / d.step) * d.step;
      s.dims.push_back(std::move(d));
    }
    return s;
  }

  // Grid size saturates at a large cap; beyond it only sampled candidates
  // are used anyway.
  long grid_size() const {
    double total = 1.0;
    for (const SearchDim& d : dims) total *= static_cast<double>(d.points());
    return total > 1e15 ? static_cast<long>(1e15) : static_cast<long>(total);
  }

  std::vector<long> assignment_at(long grid_index) const {
    std::vector<long> v(dims.size());
    for (size_t d = dims.size(); d-- > 0;) {
      long p = dims[d].points();
      v[d] = dims[d].value_at(grid_index % p);
      grid_index /= p;
    }
    return v;
  }
};

struct TrialPoint {
  std::vector<long> values;
  double objective = std::numeric_limits<double>::quiet_NaN();
  enum class Status { Ok, Failed } status = Status::Ok;
  double seconds = 0.0;
};

struct GpConfig {
  std::optional<double> fixed_noise;         // observation noise variance
  std::optional<double> fixed_length_scale;  // in scaled [0,1] coordinates
};

// Gaussian process with a squared-exponential kernel over grid coordinates
// scaled into [0,1] per dimension. Objectives are standardized internally;
// the (shared) length scale and the noise are picked from a small log-grid
// by marginal likelihood unless fixed.
class GpModel {
 public:
  GpModel(const SearchSpace& space, const std::vector<TrialPoint>& observations,
          const GpConfig& config = {})
      : space_(space) {
    for (const TrialPoint& t : observations)
      if (t.status == TrialPoint::Status::Ok) obs_.push_back(t);
    if (obs_.empty()) throw std::runtime_error("GpModel: no usable observations");

    x_.reserve(obs_.size());
    for (const TrialPoint& t : obs_) x_.push_back(scale(t.values));
    double sum = 0.0;
    for (const TrialPoint& t : obs_) sum += t.objective;
    y_mean_ = sum / static_cast<double>(obs_.size());
    double var = 0.0;
    for (const TrialPoint& t : obs_) var += (t.objective - y_mean_) * (t.objective - y_mean_);
    y_scale_ = obs_.size() > 1 ? std::sqrt(var / static_cast<double>(obs_.size() - 1)) : 0.0;
    if (y_scale_ <= 0.0) y_scale_ = 1.0;
    y_.reserve(obs_.size());
    for (const TrialPoint& t : obs_) y_.push_back((t.objective - y_mean_) / y_scale_);

    std::vector<double> lengths =
        config.fixed_length_scale ? std::vector<double>{*config.fixed_length_scale}
                                  : std::vector<double>{0.1, 0.2, 0.5, 1.0, 2.0};
    std::vector<double> noises = config.fixed_noise
                                     ? std::vector<double>{*config.fixed_noise}
                                     : std::vector<double>{1e-6, 1e-4, 1e-2};
    double best_ml = -std::numeric_limits<double>::infinity();
    double best_ls = lengths[0], best_noise = noises[0];
    for (double ls : lengths) {
      for (double noise : noises) {
        double ml;
        if (!try_fit(ls, noise, &ml)) continue;
        if (ml > best_ml) {
          best_ml = ml;
          best_ls = ls;
          best_noise = noise;
        }
      }
    }
    if (best_ml == -std::numeric_limits<double>::infinity())
      throw std::runtime_error("GpModel: kernel fit failed for all hyperparameters");
    double ml;
    try_fit(best_ls, best_noise, &ml);  // leave the winner's factorization in place
  }

  size_t observation_count() const { return obs_.size(); }
  double length_scale() const { return length_scale_; }
  double noise() const { return noise_; }

  double best_objective() const {
    double best = -std::numeric_limits<double>::infinity();
    for (const TrialPoint& t : obs_) best = std::max(best, t.objective);
    return best;
  }

  bool observed(const std::vector<long>& values) const {
    for (const TrialPoint& t : obs_)
      if (t.values == values) return true;
    return false;
  }

  // Posterior mean and variance in objective units.
  std::pair<double, double> posterior(const std::vector<long>& values) const {
    std::vector<double> xs = scale(values);
    size_t n = obs_.size();
    std::vector<double> k(n);
    for (size_t i = 0; i < n; ++i) k[i] = kernel(xs, x_[i]);
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += k[i] * alpha_[i];
    std::vector<double> v = solve_lower(k);
    double var = kernel(xs, xs);
    for (size_t i = 0; i < n; ++i) var -= v[i] * v[i];
    if (var < 0.0) var = 0.0;
    return {y_mean_ + y_scale_ * mean, y_scale_ * y_scale_ * var};
  }

  // Expected improvement over the best observed objective.
  double expected_improvement(const std::vector<long>& values) const {
    auto [mu, var] = posterior(values);
    double fstar = best_objective();
    double sigma = std::sqrt(var);
    if (sigma < 1e-12) return std::max(mu - fstar, 0.0);
    double z = (mu - fstar) / sigma;
    double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.141592653589793);
    double ei = (mu - fstar) * cdf + sigma * pdf;
    return ei > 0.0 ? ei : 0.0;
  }

 private:
  std::vector<double> scale(const std::vector<long>& values) const {
    std::vector<double> x(values.size());
    for (size_t d = 0; d < values.size(); ++d) {
      const SearchDim& dim = space_.dims[d];
      double span = static_cast<double>(dim.upper - dim.lower);
      x[d] = span > 0.0 ? static_cast<double>(values[d] - dim.lower) / span : 0.0;
    }
    return x;
  }

  double kernel(const std::vector<double>& a, const std::vector<double>& b) const {
    double d2 = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-0.5 * d2 / (length_scale_ * length_scale_));
  }

  // Cholesky of K + noise*I (+ jitter retries); fills alpha = K^-1 y and
  // reports the log marginal likelihood.
  bool try_fit(double length_scale, double noise, double* ml) {
    length_scale_ = length_scale;
    size_t n = obs_.size();
    std::vector<double> k(n * n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) k[i * n + j] = kernel(x_[i], x_[j]);

    for (double jitter : {0.0, 1e-8, 1e-6, 1e-4, 1e-2}) {
      std::vector<double> a = k;
      for (size_t i = 0; i < n; ++i) a[i * n + i] += noise + jitter;
      if (!cholesky(a, n)) continue;
      chol_ = std::move(a);
      noise_ = noise;

      alpha_ = solve_lower(y_);
      std::vector<double> tmp = alpha_;
      // L^T alpha = tmp
      for (size_t i = n; i-- > 0;) {
        double s = tmp[i];
        for (size_t j = i + 1; j < n; ++j) s -= chol_[j * n + i] * alpha_[j];
        alpha_[i] = s / chol_[i * n + i];
      }

      double fit = 0.0;
      for (size_t i = 0; i < n; ++i) fit += y_[i] * alpha_[i];
      double logdet = 0.0;
      for (size_t i = 0; i < n; ++i) logdet += std::log(chol_[i * n + i]);
      *ml = -0.5 * fit - logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * 3.141592653589793);
      return true;
    }
    return false;
  }

  static bool cholesky(std::vector<double>& a, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j <= i; ++j) {
        double s = a[i * n + j];
        for (size_t k2 = 0; k2 < j; ++k2) s -= a[i * n + k2] * a[j * n + k2];
        if (i == j) {
          if (s <= 0.0) return false;
          a[i * n + i] = std::sqrt(s);
        } else {
          a[i * n + j] = s / a[j * n + j];
        }
      }
      for (size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
  }

  std::vector<double> solve_lower(const std::vector<double>& b) const {
    size_t n = obs_.size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
      double s = b[i];
      for (size_t j = 0; j < i; ++j) s -= chol_[i * n + j] * out[j];
      out[i] = s / chol_[i * n + i];
    }
    return out;
  }

  const SearchSpace& space_;
  std::vector<TrialPoint> obs_;
  std::vector<std::vector<double>> x_;
  std::vector<double> y_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  double length_scale_ = 0.5;
  double noise_ = 1e-4;
  std::vector<double> chol_;
  std::vector<double> alpha_;
};

inline size_t seed_schedule_size(const SearchSpace& space) {
  long grid = space.grid_size();
  long want = std::max<long>(2, static_cast<long>(space.dims.size()) + 1);
  return static_cast<size_t>(std::min(grid, want));
}

// Latin-hypercube-style space-filling schedule: one seeded stratum
// permutation per dimension, snapped onto the step grid.
inline std::vector<long> seed_point(const SearchSpace& space, size_t index, uint64_t seed) {
  size_t n = seed_schedule_size(space);
  index %= n;
  std::vector<long> out(space.dims.size());
  for (size_t d = 0; d < space.dims.size(); ++d) {
    std::vector<size_t> strata(n);
    for (size_t i = 0; i < n; ++i) strata[i] = i;
    rng::Stream perm = rng::fork(seed, "tuner.lhs", d);
    rng::shuffle(strata, perm);
    double frac = (static_cast<double>(strata[index]) + 0.5) / static_cast<double>(n);
    long idx = std::lround(frac * static_cast<double>(space.dims[d].points() - 1));
    out[d] = space.dims[d].value_at(idx);
  }
  return out;
}

// Next point to evaluate: seed-schedule points until enough observations
// exist, then the grid point maximizing expected improvement. Candidates are
// the full grid when small, else a random subset; already-observed points are
// suggested only when every candidate has been observed. Ties break toward
// the lowest grid index.
inline std::vector<long> suggest(const SearchSpace& space,
                                 const std::vector<TrialPoint>& observations, uint64_t seed,
                                 rng::Stream& rng, const GpConfig& gp_config = {}) {
  size_t ok = 0;
  for (const TrialPoint& t : observations)
    if (t.status == TrialPoint::Status::Ok) ++ok;
  if (ok < seed_schedule_size(space)) return seed_point(space, ok, seed);

  GpModel model(space, observations, gp_config);
  long grid = space.grid_size();
  constexpr long kFullGridCap = 10000;
  constexpr long kCandidates = 2048;

  std::vector<long> best_any, best_new;
  double best_any_ei = -1.0, best_new_ei = -1.0;
  auto consider = [&](std::vector<long> cand) {
    double ei = model.expected_improvement(cand);
    if (ei > best_any_ei) {
      best_any_ei = ei;
      best_any = cand;
    }
    if (!model.observed(cand) && ei > best_new_ei) {
      best_new_ei = ei;
      best_new = std::move(cand);
    }
  };

  if (grid <= kFullGridCap) {
    for (long i = 0; i < grid; ++i) consider(space.assignment_at(i));
  } else {
    for (long c = 0; c < kCandidates; ++c) {
      std::vector<long> cand(space.dims.size());
      for (size_t d = 0; d < space.dims.size(); ++d)
        cand[d] = space.dims[d].value_at(
            static_cast<long>(rng.below(static_cast<uint64_t>(space.dims[d].points()))));
      consider(std::move(cand));
    }
  }
  return best_new.empty() ? best_any : best_new;
}

struct TuneResult {
  TrialPoint best;
  std::vector<TrialPoint> history;
};

// Sequential Bayesian-optimization loop. Failed objective evaluations are
// recorded and kept out of the surrogate.
inline TuneResult run_tuning(const SearchSpace& space, int budget_trials,
                             const std::function<double(const std::vector<long>&)>& objective,
                             uint64_t seed, const GpConfig& gp_config = {}) {
  if (budget_trials < 1) throw std::runtime_error("run_tuning: budget must be >= 1");
  TuneResult result;
  for (int trial = 0; trial < budget_trials; ++trial) {
    rng::Stream stream = rng::fork(seed, "tuner.suggest", static_cast<uint64_t>(trial));
    TrialPoint point;
    point.values = suggest(space, result.history, seed, stream, gp_config);
    auto t0 = std::chrono::steady_clock::now();
    try {
      point.objective = objective(point.values);
      point.status = TrialPoint::Status::Ok;
    } catch (const std::exception&) {
      point.status = TrialPoint::Status::Failed;
    }
    point.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(std::move(point));
  }

  bool any_ok = false;
  for (const TrialPoint& t : result.history) {
    if (t.status != TrialPoint::Status::Ok) continue;
    if (!any_ok || t.objective > result.best.objective) result.best = t;
    any_ok = true;
  }
  if (!any_ok) throw std::runtime_error("run_tuning: all trials failed");
  return result;
}

inline std::string history_csv(const SearchSpace& space, const std::vector<TrialPoint>& history) {
  std::string out = "trial";
  for (const SearchDim& d : space.dims) out += "," + d.name;
  out += ",objective,status,seconds\n";
  for (size_t i = 0; i < history.size(); ++i) {
    const TrialPoint& t = history[i];
    out += std::to_string(i);
    for (long v : t.values) out += "," + std::to_string(v);
    out += ",";
    out += t.status == TrialPoint::Status::Ok ? format_double(t.objective) : "";
    out += t.status == TrialPoint::Status::Ok ? ",ok," : ",failed,";
    out += format_double(t.seconds);
    out += "\n";
  }
  return out;
}

}  // namespace prowl
