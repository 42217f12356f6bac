#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "prowl/tuner.hpp"

using namespace prowl;

namespace {

SearchSpace one_dim() {
  return SearchSpace::make({SearchDim{"x", 0, 100, 10}});
}

TrialPoint ok_point(std::vector<long> v, double y) {
  TrialPoint t;
  t.values = std::move(v);
  t.objective = y;
  t.status = TrialPoint::Status::Ok;
  return t;
}

// Brute-force GP posterior + EI for a 2-observation 1-D model, computed with
// closed-form 2x2 inversion rather than the model's Cholesky path. Uses the
// same kernel definition and the same standardization of objectives.
struct TwoPointGpOracle {
  double x0, x1;      // scaled coordinates
  double y0, y1;      // raw objectives
  double ls, noise;
  double ym, ys;

  TwoPointGpOracle(double x0, double x1, double y0, double y1, double ls, double noise)
      : x0(x0), x1(x1), y0(y0), y1(y1), ls(ls), noise(noise) {
    ym = 0.5 * (y0 + y1);
    ys = std::sqrt(((y0 - ym) * (y0 - ym) + (y1 - ym) * (y1 - ym)) / 1.0);  // n-1 = 1
    if (ys <= 0.0) ys = 1.0;
  }

  double k(double a, double b) const {
    return std::exp(-0.5 * (a - b) * (a - b) / (ls * ls));
  }

  std::pair<double, double> posterior(double x) const {
    double k00 = 1.0 + noise, k11 = 1.0 + noise, k01 = k(x0, x1);
    double det = k00 * k11 - k01 * k01;
    double i00 = k11 / det, i01 = -k01 / det, i11 = k00 / det;
    double z0 = (y0 - ym) / ys, z1 = (y1 - ym) / ys;
    double a0 = i00 * z0 + i01 * z1;
    double a1 = i01 * z0 + i11 * z1;
    double kx0 = k(x, x0), kx1 = k(x, x1);
    double mean = kx0 * a0 + kx1 * a1;
    double var = 1.0 - (kx0 * (i00 * kx0 + i01 * kx1) + kx1 * (i01 * kx0 + i11 * kx1));
    if (var < 0.0) var = 0.0;
    return {ym + ys * mean, ys * ys * var};
  }

  double ei(double x, double fstar) const {
    auto [mu, var] = posterior(x);
    double sigma = std::sqrt(var);
    if (sigma < 1e-12) return std::max(mu - fstar, 0.0);
    double z = (mu - fstar) / sigma;
    double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.141592653589793);
    return (mu - fstar) * cdf + sigma * pdf;
  }
};

}  // namespace

TEST(Space, StepTruncationAndGrid) {
  SearchSpace s = SearchSpace::make({SearchDim{"a", 0, 105, 10}, SearchDim{"b", 5, 6, 2}});
  EXPECT_EQ(s.dims[0].upper, 100);  // truncated to the last multiple
  EXPECT_EQ(s.dims[0].points(), 11);
  EXPECT_EQ(s.dims[1].upper, 5);
  EXPECT_EQ(s.dims[1].points(), 1);
  EXPECT_EQ(s.grid_size(), 11);
  EXPECT_EQ(s.assignment_at(0), (std::vector<long>{0, 5}));
  EXPECT_EQ(s.assignment_at(10), (std::vector<long>{100, 5}));
  EXPECT_THROW(SearchSpace::make({SearchDim{"bad", 3, 1, 1}}), std::runtime_error);
}

TEST(Suggest, ColdStartUsesSeedSchedule) {
  SearchSpace s = one_dim();
  rng::Stream rng(1);
  std::vector<long> first = suggest(s, {}, 99, rng);
  EXPECT_EQ(first, seed_point(s, 0, 99));
  rng::Stream rng2(1);
  EXPECT_EQ(suggest(s, {}, 99, rng2), first);  // deterministic
  EXPECT_EQ(first[0] % 10, 0);                 // on the grid
  EXPECT_GE(first[0], 0);
  EXPECT_LE(first[0], 100);
}

TEST(Gp, InterpolatesObservationsAtLowNoise) {
  SearchSpace s = one_dim();
  std::vector<TrialPoint> obs;
  for (long x : {0L, 30L, 60L, 100L})
    obs.push_back(ok_point({x}, -(static_cast<double>(x) - 60.0) * (static_cast<double>(x) - 60.0)));
  GpConfig cfg;
  cfg.fixed_noise = 1e-6;
  GpModel gp(s, obs, cfg);
  double spread = 3600.0;  // objective range; interpolation is judged on its scale
  for (const TrialPoint& t : obs) {
    auto [mu, var] = gp.posterior(t.values);
    EXPECT_NEAR(mu, t.objective, 1e-3 * spread);
  }
}

TEST(Gp, EiNonnegativeEverywhere) {
  SearchSpace s = one_dim();
  std::vector<TrialPoint> obs = {ok_point({0}, -3600.0), ok_point({100}, -1600.0),
                                 ok_point({50}, -100.0)};
  GpModel gp(s, obs);
  for (long i = 0; i < s.grid_size(); ++i)
    EXPECT_GE(gp.expected_improvement(s.assignment_at(i)), 0.0);
}

// The EI landscape agrees with a closed-form two-point oracle, and the
// suggestion lands strictly between the two boundary observations.
TEST(Suggest, MatchesBruteForceEiOracle) {
  SearchSpace s = one_dim();
  double y0 = -3600.0, y1 = -1600.0;  // -(x-60)^2 at x=0 and x=100
  std::vector<TrialPoint> obs = {ok_point({0}, y0), ok_point({100}, y1)};

  GpConfig cfg;
  cfg.fixed_noise = 1e-6;
  cfg.fixed_length_scale = 0.5;
  GpModel gp(s, obs, cfg);

  TwoPointGpOracle oracle(0.0, 1.0, y0, y1, 0.5, 1e-6);
  double fstar = std::max(y0, y1);
  long best_grid = -1;
  double best_ei = -1.0;
  for (long i = 0; i <= 10; ++i) {
    double model_ei = gp.expected_improvement({i * 10});
    double oracle_ei = oracle.ei(static_cast<double>(i) / 10.0, fstar);
    EXPECT_NEAR(model_ei, oracle_ei, 1e-6 * std::max(1.0, oracle_ei)) << "x=" << i * 10;
    if (oracle_ei > best_ei) {
      best_ei = oracle_ei;
      best_grid = i * 10;
    }
  }
  EXPECT_GT(best_grid, 0);
  EXPECT_LT(best_grid, 100);

  rng::Stream rng(3);
  std::vector<long> suggestion = suggest(s, obs, 5, rng, cfg);
  EXPECT_GT(suggestion[0], 0);
  EXPECT_LT(suggestion[0], 100);
  EXPECT_EQ(suggestion[0], best_grid);
}

// Every suggestion respects the step grid and the bounds.
TEST(Suggest, GridRespect) {
  SearchSpace s = SearchSpace::make({SearchDim{"a", 5, 95, 15}, SearchDim{"b", 0, 7, 3}});
  std::vector<TrialPoint> obs;
  rng::Stream obj(44);
  for (int trial = 0; trial < 12; ++trial) {
    rng::Stream rng(100 + static_cast<uint64_t>(trial));
    std::vector<long> v = suggest(s, obs, 9, rng);
    ASSERT_EQ(v.size(), 2u);
    for (size_t d = 0; d < s.dims.size(); ++d) {
      EXPECT_GE(v[d], s.dims[d].lower);
      EXPECT_LE(v[d], s.dims[d].upper);
      EXPECT_EQ((v[d] - s.dims[d].lower) % s.dims[d].step, 0);
    }
    obs.push_back(ok_point(v, obj.uniform()));
  }
}

TEST(RunTuning, QuadraticOptimumFoundExactly) {
  SearchSpace s = one_dim();
  auto objective = [](const std::vector<long>& v) {
    double x = static_cast<double>(v[0]);
    return -(x - 60.0) * (x - 60.0);
  };
  TuneResult r = run_tuning(s, 20, objective, 17);
  EXPECT_EQ(r.best.values[0], 60);
  EXPECT_EQ(r.history.size(), 20u);

  // Exhaustive check over the 11 grid points.
  double best = -1e18;
  long best_x = -1;
  for (long i = 0; i < s.grid_size(); ++i) {
    double y = objective(s.assignment_at(i));
    if (y > best) {
      best = y;
      best_x = s.assignment_at(i)[0];
    }
  }
  EXPECT_EQ(r.best.values[0], best_x);
}

TEST(RunTuning, BudgetOneReturnsSeedPoint) {
  SearchSpace s = one_dim();
  TuneResult r = run_tuning(s, 1, [](const std::vector<long>&) { return 1.0; }, 4);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.best.values, seed_point(s, 0, 4));
}

TEST(RunTuning, ConstantObjectiveFillsHistory) {
  SearchSpace s = one_dim();
  TuneResult r = run_tuning(s, 7, [](const std::vector<long>&) { return 0.25; }, 11);
  EXPECT_EQ(r.history.size(), 7u);
  EXPECT_EQ(r.best.objective, 0.25);
}

TEST(RunTuning, FailedTrialsRecordedAndExcluded) {
  SearchSpace s = one_dim();
  auto objective = [](const std::vector<long>& v) -> double {
    if (v[0] >= 50) throw std::runtime_error("diverged");
    return static_cast<double>(v[0]);
  };
  TuneResult r = run_tuning(s, 15, objective, 23);
  int failed = 0;
  for (const TrialPoint& t : r.history) failed += t.status == TrialPoint::Status::Failed;
  EXPECT_GT(failed, 0);
  EXPECT_LT(r.best.values[0], 50);

  EXPECT_THROW(
      run_tuning(s, 3, [](const std::vector<long>&) -> double { throw std::runtime_error("x"); },
                 2),
      std::runtime_error);
}

// With dedup of repeated suggestions and budget >= grid size, the tuner's
// best matches exhaustive search.
TEST(RunTuning, ExhaustiveEquivalenceOnSmallGrids) {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    SearchSpace s = SearchSpace::make({SearchDim{"a", 0, 60, 20}, SearchDim{"b", 0, 30, 10}});
    ASSERT_EQ(s.grid_size(), 16);
    rng::Stream gen(seed * 1000 + 5);
    std::map<std::vector<long>, double> table;
    for (long i = 0; i < s.grid_size(); ++i)
      table[s.assignment_at(i)] = gen.uniform();
    auto objective = [&](const std::vector<long>& v) { return table.at(v); };

    TuneResult r = run_tuning(s, 20, objective, seed);
    double best = -1.0;
    for (const auto& [k, v] : table) best = std::max(best, v);
    EXPECT_DOUBLE_EQ(r.best.objective, best) << "seed " << seed;
  }
}

TEST(History, CsvShape) {
  SearchSpace s = SearchSpace::make({SearchDim{"x", 0, 10, 5}});
  TuneResult r = run_tuning(s, 3, [](const std::vector<long>& v) {
    return static_cast<double>(v[0]);
  }, 8);
  std::string csv = history_csv(s, r.history);
  EXPECT_EQ(csv.rfind("trial,x,objective,status,seconds\n", 0), 0u);
  EXPECT_NE(csv.find(",ok,"), std::string::npos);
  size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  EXPECT_EQ(rows, 4u);
}
