#pragma once

// Self-checking Monte Carlo suites. Every tolerance used here is fixed in
// code; the suites are deterministic in their seed.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mediate/data.hpp"
#include "mediate/effects.hpp"
#include "mediate/estimators.hpp"
#include "mediate/lsem.hpp"

namespace mediate::validation {

struct Check {
  std::string name;
  bool passed = false;
  std::string observed;
  std::string required;
  bool informational = false;  ///< printed for context, never fails the suite
};

struct SuiteResult {
  std::string name;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.informational || c.passed; });
  }
};

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

/// splitmix64, for deriving independent sub-seeds from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// (K, J) pairs cycled through by the randomized suites.
inline std::pair<int, int> block_sizes(std::size_t index) {
  static constexpr int sizes[3] = {0, 1, 3};
  return {sizes[index % 3], sizes[(index / 3) % 3]};
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline Check runtime_check(double seconds, double limit) {
  return {"runtime", seconds < limit, fmt("%.2f s", seconds), "< " + fmt("%.0f s", limit)};
}

// ---------------------------------------------------------------------------
// Reference computations independent of the estimator code path

/// Least squares by explicit normal equations (long double accumulation,
/// Gaussian elimination with partial pivoting), one equation at a time.
inline ThetaVector reference_least_squares(const ObservationTable& table) {
  auto solve = [](auto rows, int p, const std::function<void(std::size_t, long double*, long double&)>& row_of) {
    std::vector<long double> xtx(static_cast<std::size_t>(p * p), 0.0L), xty(static_cast<std::size_t>(p), 0.0L);
    std::vector<long double> x(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < rows; ++i) {
      long double y = 0.0L;
      row_of(i, x.data(), y);
      for (int a = 0; a < p; ++a) {
        xty[a] += x[a] * y;
        for (int b = 0; b < p; ++b) xtx[a * p + b] += x[a] * x[b];
      }
    }
    for (int col = 0; col < p; ++col) {
      int pivot = col;
      for (int r = col + 1; r < p; ++r) {
        if (std::fabs(xtx[r * p + col]) > std::fabs(xtx[pivot * p + col])) pivot = r;
      }
      for (int c = 0; c < p; ++c) std::swap(xtx[col * p + c], xtx[pivot * p + c]);
      std::swap(xty[col], xty[pivot]);
      for (int r = col + 1; r < p; ++r) {
        const long double f = xtx[r * p + col] / xtx[col * p + col];
        for (int c = col; c < p; ++c) xtx[r * p + c] -= f * xtx[col * p + c];
        xty[r] -= f * xty[col];
      }
    }
    std::vector<long double> beta(static_cast<std::size_t>(p));
    for (int r = p - 1; r >= 0; --r) {
      long double acc = xty[r];
      for (int c = r + 1; c < p; ++c) acc -= xtx[r * p + c] * beta[c];
      beta[r] = acc / xtx[r * p + r];
    }
    return beta;
  };
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto y = table.outcome();
  const auto b_m = solve(table.size(), 2, [&](std::size_t i, long double* x, long double& out) {
    x[0] = 1.0L;
    x[1] = t[i];
    out = m[i];
  });
  const auto b_y = solve(table.size(), 4, [&](std::size_t i, long double* x, long double& out) {
    x[0] = 1.0L;
    x[1] = t[i];
    x[2] = m[i];
    x[3] = static_cast<long double>(m[i]) * t[i];
    out = y[i];
  });
  return {static_cast<double>(b_m[0]), static_cast<double>(b_m[1]), static_cast<double>(b_y[0]),
          static_cast<double>(b_y[1]), static_cast<double>(b_y[2]), static_cast<double>(b_y[3])};
}

/// Two-sided asymptotic Kolmogorov-Smirnov p-value for uniformity on [0, 1],
/// with Stephens' small-sample correction.
inline std::pair<double, double> ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

inline double two_sided_normal_quantile_95() { return 1.959963984540054; }

// ---------------------------------------------------------------------------
// Fixed specs used by the suites

/// Upstream block feeding M1 only (so the regression system recovers the
/// structural coefficients), two interacting downstream mediators and
/// non-normal errors.
inline LsemSpec sampling_study_spec() {
  LsemSpec s = LsemSpec::zeros(1, 2);
  s.alpha0 << 0.5;
  s.beta0 << 0.4;
  s.alpha1 = 1.0;
  s.beta1 = -0.2;
  s.psi1 << 0.8;
  s.xi1 << 0.3;
  s.alpha2 << 0.2, -0.1;
  s.beta2 << 0.3, 0.2;
  s.psi3 << 0.5, -0.4;
  s.xi3 << 0.2, 0.1;
  s.alpha3 = 2.0;
  s.beta3 = 0.25;
  s.gamma1 = 0.7;
  s.gamma2 << 0.6, 0.3;
  s.kappa1 = -0.2;
  s.kappa2 << 0.1, -0.3;
  s.noise_m0 = {NoiseFamily::centered_uniform, 1.0};
  s.noise_m1 = {NoiseFamily::scaled_centered_bernoulli, 0.8, 0.3};
  s.noise_m2 = {NoiseFamily::normal, 0.7};
  s.noise_y = {NoiseFamily::centered_uniform, 1.2};
  s.p_treat = 0.45;
  return s;
}

/// No treatment pathways, but a nonzero mediator-outcome slope so that the
/// GACME statistic is a well-behaved rescaling of the mediator shift.
inline LsemSpec null_calibration_spec() {
  LsemSpec s = LsemSpec::zeros(1, 1);
  s.alpha0 << 1.0;
  s.alpha1 = 0.5;
  s.psi1 << 0.6;
  s.alpha2 << 0.3;
  s.Psi2 << 0.4;
  s.psi3 << 0.5;
  s.alpha3 = 1.0;
  s.gamma0 << 0.3;
  s.gamma1 = 0.9;
  s.gamma2 << 0.5;
  s.noise_m0 = {NoiseFamily::normal, 1.0};
  s.noise_m1 = {NoiseFamily::centered_uniform, 1.0};
  s.noise_m2 = {NoiseFamily::normal, 0.8};
  s.noise_y = {NoiseFamily::scaled_centered_bernoulli, 1.0, 0.4};
  s.p_treat = 0.5;
  return s;
}

// ---------------------------------------------------------------------------
// Suites

/// Decomposition and saturation identities on randomly simulated datasets.
inline SuiteResult identity_suite(int reps = 50, std::size_t n = 5000, std::uint64_t seed = 1) {
  Stopwatch clock;
  SuiteResult out{"identity", {}, 0.0};
  double worst_control = 0.0, worst_treated = 0.0, worst_means = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto [k, j] = block_sizes(static_cast<std::size_t>(r));
    const LsemSpec spec = random_spec(k, j, derive_seed(seed, 2 * r));
    const auto table = simulate(spec, n, derive_seed(seed, 2 * r + 1));
    const auto report = analyze(table);
    const auto& [control, treated] = report.arm_summaries;
    worst_control = std::max(worst_control, std::fabs(report.ate.value - (report.gade0.value + report.gacme1.value)));
    worst_treated = std::max(worst_treated, std::fabs(report.ate.value - (report.gade1.value + report.gacme0.value)));
    worst_means = std::max(worst_means,
                           std::fabs(report.ate.value - (treated.mean_outcome - control.mean_outcome)));
  }
  out.checks.push_back({"|ATE - (GADE(0)+GACME(1))| over " + std::to_string(reps) + " datasets",
                        worst_control < 1e-10, fmt("%.3g", worst_control), "< 1e-10"});
  out.checks.push_back({"|ATE - (GADE(1)+GACME(0))| over " + std::to_string(reps) + " datasets",
                        worst_treated < 1e-10, fmt("%.3g", worst_treated), "< 1e-10"});
  out.checks.push_back({"|ATE - difference of arm means|", worst_means < 1e-10, fmt("%.3g", worst_means), "< 1e-10"});
  out.seconds = clock.seconds();
  out.checks.push_back(runtime_check(out.seconds, 10.0));
  return out;
}

struct PublishedRow {
  const char* label;
  EffectValues pct;  ///< percent changes as printed
};

/// Conversion-outcome rows of the two published mediation tables.
inline std::array<PublishedRow, 2> published_conversion_rows() {
  return {PublishedRow{"recommendation module, conversion", {0.4959, 0.4905, -0.2703, -0.2757, 0.2202}},
          PublishedRow{"promoted listings, conversion", {-0.1448, -0.1472, -0.2237, -0.2261, -0.3709}}};
}

inline SuiteResult additivity_suite() {
  Stopwatch clock;
  SuiteResult out{"additivity", {}, 0.0};
  for (const auto& row : published_conversion_rows()) {
    const auto c = check_additivity(row.pct, 5e-5);
    out.checks.push_back({std::string(row.label) + ": ATE = GADE(0)+GACME(1)",
                          std::fabs(c.residual_control) <= 5e-5, fmt("%.2g", std::fabs(c.residual_control)), "<= 5e-5"});
    out.checks.push_back({std::string(row.label) + ": ATE = GADE(1)+GACME(0)",
                          std::fabs(c.residual_treated) <= 5e-5, fmt("%.2g", std::fabs(c.residual_treated)), "<= 5e-5"});
  }
  out.seconds = clock.seconds();
  return out;
}

/// Large-sample recovery of the structural truth on random specs.
inline SuiteResult consistency_suite(int reps = 20, std::size_t n = 1'000'000, std::uint64_t seed = 3) {
  Stopwatch clock;
  SuiteResult out{"consistency", {}, 0.0};
  int failing_specs = 0;
  int failing_specs_projection = 0;
  double worst_z = 0.0;
  double worst_z_projection = 0.0;
  std::string failing_list;
  for (int r = 0; r < reps; ++r) {
    const auto [k, j] = block_sizes(static_cast<std::size_t>(r));
    const LsemSpec spec = random_spec(k, j, derive_seed(seed, 2 * r));
    const GroundTruth truth = true_effects_from_structural(spec);
    const ThetaVector projection = population_projection(spec);
    const auto report = analyze(simulate(spec, n, derive_seed(seed, 2 * r + 1)));

    double spec_z = 0.0;
    double spec_z_projection = 0.0;
    const auto est = report.estimates();
    const auto truth_values = truth.effects.as_array();
    const auto projected_effects = all_effects(projection).as_array();
    for (std::size_t e = 0; e < est.size(); ++e) {
      spec_z = std::max(spec_z, std::fabs(est[e]->value - truth_values[e]) / est[e]->std_error);
      spec_z_projection =
          std::max(spec_z_projection, std::fabs(est[e]->value - projected_effects[e]) / est[e]->std_error);
    }
    for (int c = 0; c < 6; ++c) {
      const double se = std::sqrt(report.covariance(c, c));
      spec_z = std::max(spec_z, std::fabs(report.theta[c] - truth.theta_true[c]) / se);
      spec_z_projection = std::max(spec_z_projection, std::fabs(report.theta[c] - projection[c]) / se);
    }
    worst_z = std::max(worst_z, spec_z);
    worst_z_projection = std::max(worst_z_projection, spec_z_projection);
    if (!(spec_z <= 4.0)) {
      ++failing_specs;
      failing_list += (failing_list.empty() ? "" : ",") + std::to_string(r) + "(K=" + std::to_string(k) +
                      ",J=" + std::to_string(j) + ")";
    }
    if (!(spec_z_projection <= 4.0)) ++failing_specs_projection;
  }
  out.checks.push_back({"effects and theta within 4 SE of structural truth, " + std::to_string(reps) + " specs",
                        failing_specs == 0,
                        std::to_string(failing_specs) + " specs fail, max |z| = " + fmt("%.2f", worst_z) +
                            (failing_list.empty() ? "" : " [" + failing_list + "]"),
                        "0 specs with |z| > 4"});
  out.checks.push_back({"diagnostic: within 4 SE of exact population projection",
                        failing_specs_projection == 0,
                        std::to_string(failing_specs_projection) + " specs fail, max |z| = " +
                            fmt("%.2f", worst_z_projection),
                        "0 specs with |z| > 4", true});
  out.seconds = clock.seconds();
  out.checks.push_back(runtime_check(out.seconds, 300.0));
  return out;
}

/// Replication study of the Delta-method standard errors and CI coverage.
/// Produces the checks of both the "delta" and "coverage" suites.
inline SuiteResult sampling_suite(int reps = 500, std::size_t n = 10'000, std::uint64_t seed = 4) {
  Stopwatch clock;
  SuiteResult out{"sampling", {}, 0.0};
  const LsemSpec spec = sampling_study_spec();
  const auto truth = true_effects_from_structural(spec).effects.as_array();
  std::array<std::vector<double>, 5> values;
  std::array<std::vector<double>, 5> ses;
  for (int r = 0; r < reps; ++r) {
    const auto report = analyze(simulate(spec, n, derive_seed(seed, r)));
    const auto est = report.estimates();
    for (std::size_t e = 0; e < 5; ++e) {
      values[e].push_back(est[e]->value);
      ses[e].push_back(est[e]->std_error);
    }
  }
  const double z95 = two_sided_normal_quantile_95();
  for (std::size_t e = 0; e < 5; ++e) {
    CompensatedSum sum, sum_se;
    for (int r = 0; r < reps; ++r) {
      sum.add(values[e][r]);
      sum_se.add(ses[e][r]);
    }
    const double mean = sum.value() / reps;
    CompensatedSum ss;
    int covered = 0;
    for (int r = 0; r < reps; ++r) {
      ss.add((values[e][r] - mean) * (values[e][r] - mean));
      covered += std::fabs(values[e][r] - truth[e]) <= z95 * ses[e][r] ? 1 : 0;
    }
    const double sd = std::sqrt(ss.value() / (reps - 1));
    const double mean_se = sum_se.value() / reps;
    const double rel = std::fabs(sd / mean_se - 1.0);
    const double coverage = static_cast<double>(covered) / reps;
    const std::string label(kEffectLabels[e]);
    out.checks.push_back({"delta: " + label + " replication SD vs mean Delta SE", rel <= 0.15,
                          "SD " + fmt("%.4g", sd) + ", SE " + fmt("%.4g", mean_se) + ", rel diff " + fmt("%.3f", rel),
                          "rel diff <= 0.15"});
    out.checks.push_back({"coverage: " + label + " 95% CI", coverage >= 0.92 && coverage <= 0.98,
                          fmt("%.3f", coverage), "in [0.92, 0.98]"});
  }
  out.seconds = clock.seconds();
  out.checks.push_back(runtime_check(out.seconds, 600.0));
  return out;
}

inline SuiteResult filter_suite(const SuiteResult& all, const std::string& name, const std::string& prefix) {
  SuiteResult out{name, {}, all.seconds};
  for (const auto& c : all.checks) {
    if (c.name.rfind(prefix, 0) == 0 || c.name == "runtime") out.checks.push_back(c);
  }
  return out;
}

/// Brute-force counterfactual averages against the closed forms.
inline SuiteResult oracle_suite(int specs = 10, std::size_t n_mc = 200'000, std::uint64_t seed = 5) {
  Stopwatch clock;
  SuiteResult out{"oracle", {}, 0.0};
  int failures = 0;
  double worst = 0.0;
  for (int r = 0; r < specs; ++r) {
    const auto [k, j] = block_sizes(static_cast<std::size_t>(r) + 1);
    const LsemSpec spec = random_spec(k, j, derive_seed(seed, 2 * r));
    const auto truth = true_effects_from_structural(spec).effects.as_array();
    const auto oracle = counterfactual_oracle(spec, n_mc, derive_seed(seed, 2 * r + 1));
    const auto mc = oracle.effects.as_array();
    const auto se = oracle.std_errors.as_array();
    for (std::size_t e = 0; e < 5; ++e) {
      const double diff = std::fabs(mc[e] - truth[e]);
      const double bound = 4.0 * se[e] + 1e-12 * std::max(1.0, std::fabs(truth[e]));
      if (!(diff <= bound)) ++failures;
      if (se[e] > 0.0) worst = std::max(worst, diff / se[e]);
    }
  }
  out.checks.push_back({"oracle within 4 MC SE of closed form (" + std::to_string(specs) + " specs x 5 effects)",
                        failures == 0, std::to_string(failures) + " failures, max |z| = " + fmt("%.2f", worst),
                        "0 failures"});
  out.seconds = clock.seconds();
  out.checks.push_back(runtime_check(out.seconds, 120.0));
  return out;
}

/// GMM versus per-equation least squares on exactly identified moments.
inline SuiteResult exact_identification_suite(int datasets = 20, std::size_t n = 20'000, std::uint64_t seed = 6) {
  Stopwatch clock;
  SuiteResult out{"exact", {}, 0.0};
  double worst_coef = 0.0, worst_moment_ratio = 0.0, worst_kernel = 0.0;
  int worst_iterations = 0;
  bool all_converged = true;
  auto examine = [&](const ObservationTable& table) {
    const GmmFit fit = itgmm_fit(table);
    const ThetaVector ref = reference_least_squares(table);
    worst_coef = std::max(worst_coef, (fit.theta.vec() - ref.vec()).cwiseAbs().maxCoeff());
    const double moment = moment_mean(table, fit.theta).cwiseAbs().maxCoeff();
    worst_moment_ratio = std::max(worst_moment_ratio, moment / (1e-8 * (1.0 + table.max_abs_value())));
    worst_iterations = std::max(worst_iterations, fit.iterations);
    all_converged = all_converged && fit.converged;
    const GmmFit hac = itgmm_fit(table, HacConfig::bartlett_auto());
    worst_kernel = std::max(worst_kernel, (hac.theta.vec() - fit.theta.vec()).cwiseAbs().maxCoeff());
    worst_iterations = std::max(worst_iterations, hac.iterations);
    all_converged = all_converged && hac.converged;
  };
  for (int r = 0; r < datasets; ++r) {
    const auto [k, j] = block_sizes(static_cast<std::size_t>(r));
    examine(simulate(random_spec(k, j, derive_seed(seed, 2 * r)), n, derive_seed(seed, 2 * r + 1)));
  }
  // Small handmade table with large offsets.
  examine(ObservationTable::from_columns(
      {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1},
      {1001.0, 1003.0, 1002.5, 1000.5, 1004.0, 1001.5, 1004.0, 1006.0, 1005.5, 1003.0, 1007.5, 1004.5},
      {5000.0, 5003.0, 5001.0, 4998.5, 5006.0, 5000.5, 4999.0, 5010.0, 5004.0, 4998.0, 5012.5, 5003.0}));

  out.checks.push_back({"max |theta_GMM - theta_LS|", worst_coef < 1e-8, fmt("%.3g", worst_coef), "< 1e-8"});
  out.checks.push_back({"iterations to convergence", all_converged && worst_iterations <= 2,
                        std::to_string(worst_iterations) + (all_converged ? "" : " (not converged)"), "<= 2"});
  out.checks.push_back({"max |gbar(theta)| / (1e-8 (1 + max|data|))", worst_moment_ratio < 1.0,
                        fmt("%.3g", worst_moment_ratio), "< 1"});
  out.checks.push_back({"theta invariant to HAC kernel", worst_kernel < 1e-8, fmt("%.3g", worst_kernel), "< 1e-8"});
  out.seconds = clock.seconds();
  out.checks.push_back(runtime_check(out.seconds, 30.0));
  return out;
}

/// Calibration of the GACME(1) z-test under no treatment pathways.
inline SuiteResult null_calibration_suite(int reps = 500, std::size_t n = 10'000, std::uint64_t seed = 7,
                                          int extra_batches = 0) {
  Stopwatch clock;
  SuiteResult out{"null", {}, 0.0};
  const LsemSpec spec = null_calibration_spec();
  std::vector<double> p_values;
  int rejections = 0;
  for (int r = 0; r < reps; ++r) {
    const auto report = analyze(simulate(spec, n, derive_seed(seed, r)));
    p_values.push_back(report.gacme1.p_value);
    rejections += report.gacme1.p_value < 0.05 ? 1 : 0;
  }
  const auto [d, p] = ks_uniform(p_values);
  const double rate = static_cast<double>(rejections) / reps;
  out.checks.push_back({"KS uniformity of GACME(1) p-values", p > 0.01,
                        "D = " + fmt("%.4f", d) + ", p = " + fmt("%.4f", p), "p > 0.01"});
  out.checks.push_back({"rejection rate at alpha = 0.05", rate >= 0.03 && rate <= 0.07, fmt("%.3f", rate),
                        "in [0.03, 0.07]"});

  // Extra independent batches separate a miscalibrated test from an unlucky
  // batch: at 500 reps the window above holds with only about 96% probability.
  if (extra_batches > 0) {
    int pooled_rejections = rejections;
    std::vector<double> pooled = p_values;
    for (int b = 1; b <= extra_batches; ++b) {
      for (int r = 0; r < reps; ++r) {
        const double pv = analyze(simulate(spec, n, derive_seed(derive_seed(seed, 1'000'000 + b), r))).gacme1.p_value;
        pooled.push_back(pv);
        pooled_rejections += pv < 0.05 ? 1 : 0;
      }
    }
    const double total = static_cast<double>(pooled.size());
    const double pooled_rate = pooled_rejections / total;
    const double binomial_se = std::sqrt(0.05 * 0.95 / total);
    const auto [pd, pp] = ks_uniform(pooled);
    out.checks.push_back({"diagnostic: pooled rejection rate over " + std::to_string(pooled.size()) + " reps",
                          std::fabs(pooled_rate - 0.05) <= 3.0 * binomial_se,
                          fmt("%.4f", pooled_rate) + " (binomial SE " + fmt("%.4f", binomial_se) + "), KS p = " +
                              fmt("%.4f", pp),
                          "within 3 SE of 0.05", true});
  }
  out.seconds = clock.seconds();
  out.checks.push_back(runtime_check(out.seconds, 600.0));
  return out;
}

/// Conditional-mean-zero residual check on one large simulated dataset.
inline SuiteResult residual_suite(std::size_t n = 1'000'000, std::uint64_t seed = 8) {
  Stopwatch clock;
  SuiteResult out{"residuals", {}, 0.0};
  const LsemSpec spec = sampling_study_spec();
  const auto table = simulate(spec, n, seed);
  const ThetaVector th = itgmm_fit(table).theta;
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto y = table.outcome();

  auto z_of = [](const std::vector<double>& v) {
    CompensatedSum s;
    for (double x : v) s.add(x);
    const double mean = s.value() / static_cast<double>(v.size());
    CompensatedSum ss;
    for (double x : v) ss.add((x - mean) * (x - mean));
    const double se = std::sqrt(ss.value() / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    return se > 0.0 ? std::fabs(mean) / se : (mean == 0.0 ? 0.0 : INFINITY);
  };

  double worst_mediator = 0.0;
  double worst_outcome = 0.0;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<double> mediator_resid;
    std::vector<double> arm_m;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (t[i] != arm) continue;
      mediator_resid.push_back(m[i] - th.m10 - th.m11 * arm);
      arm_m.push_back(m[i]);
    }
    worst_mediator = std::max(worst_mediator, z_of(mediator_resid));

    std::vector<double> sorted = arm_m;
    std::sort(sorted.begin(), sorted.end());
    const double cuts[3] = {sorted[sorted.size() / 4], sorted[sorted.size() / 2], sorted[3 * sorted.size() / 4]};
    std::array<std::vector<double>, 4> bins;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (t[i] != arm) continue;
      const int bin = (m[i] >= cuts[0]) + (m[i] >= cuts[1]) + (m[i] >= cuts[2]);
      bins[bin].push_back(y[i] - th.y0 - th.y1 * arm - th.y2 * m[i] - th.y3 * m[i] * arm);
    }
    for (const auto& b : bins) {
      if (b.size() >= 2) worst_outcome = std::max(worst_outcome, z_of(b));
    }
  }
  out.checks.push_back({"within-arm mean of mediator residual", worst_mediator <= 4.0,
                        "max |z| = " + fmt("%.2f", worst_mediator), "<= 4"});
  out.checks.push_back({"arm x mediator-quartile means of outcome residual", worst_outcome <= 4.0,
                        "max |z| = " + fmt("%.2f", worst_outcome), "<= 4"});
  out.seconds = clock.seconds();
  return out;
}

inline void print_suite(std::FILE* f, const SuiteResult& s) {
  for (const auto& c : s.checks) {
    std::fprintf(f, "[%s] %s: %s: observed %s, required %s\n",
                 c.informational ? "INFO" : (c.passed ? "PASS" : "FAIL"), s.name.c_str(), c.name.c_str(),
                 c.observed.c_str(), c.required.c_str());
  }
  std::fprintf(f, "%s suite: %s (%.2f s)\n", s.name.c_str(), s.passed() ? "PASS" : "FAIL", s.seconds);
}

}  // namespace mediate::validation
