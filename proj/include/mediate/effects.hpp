#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "mediate/data.hpp"
#include "mediate/error.hpp"
#include "mediate/estimators.hpp"

namespace mediate {

enum class EffectKind { gade, gacme, ate };

struct EffectValues {
  double gade0 = 0.0;
  double gade1 = 0.0;
  double gacme0 = 0.0;
  double gacme1 = 0.0;
  double ate = 0.0;

  std::array<double, 5> as_array() const { return {gade0, gade1, gacme0, gacme1, ate}; }
};

inline constexpr std::array<std::string_view, 5> kEffectLabels{"GADE(0)", "GADE(1)", "GACME(0)", "GACME(1)", "ATE"};
inline constexpr std::array<std::string_view, 5> kEffectKeys{"gade0", "gade1", "gacme0", "gacme1", "ate"};

/// Direct and mediated effect for arm t:
///   GADE(t)  = y1 + y3 (m10 + m11 t)
///   GACME(t) = m11 (y2 + y3 t)
inline std::pair<double, double> effects_from_theta(const ThetaVector& th, int t) {
  const double gade = th.y1 + th.y3 * (th.m10 + th.m11 * t);
  const double gacme = th.m11 * (th.y2 + th.y3 * t);
  return {gade, gacme};
}

inline EffectValues all_effects(const ThetaVector& th) {
  const auto [gade0, gacme0] = effects_from_theta(th, 0);
  const auto [gade1, gacme1] = effects_from_theta(th, 1);
  return {gade0, gade1, gacme0, gacme1, gade0 + gacme1};
}

/// Gradients of the effect maps with respect to theta (m10, m11, y0, y1, y2, y3).
inline Vector6 gade_gradient(const ThetaVector& th, int t) {
  Vector6 g;
  g << th.y3, th.y3 * t, 0.0, 1.0, 0.0, th.m10 + th.m11 * t;
  return g;
}

inline Vector6 gacme_gradient(const ThetaVector& th, int t) {
  Vector6 g;
  g << 0.0, th.y2 + th.y3 * t, 0.0, 0.0, th.m11, th.m11 * t;
  return g;
}

/// ATE = y1 + y3 m10 + m11 y2 + m11 y3.
inline Vector6 ate_gradient(const ThetaVector& th) {
  Vector6 g;
  g << th.y3, th.y2 + th.y3, 0.0, 1.0, th.m11, th.m10 + th.m11;
  return g;
}

inline double delta_covariance(const Vector6& grad_a, const Vector6& grad_b, const Matrix6& covariance) {
  return grad_a.dot(covariance * grad_b);
}

namespace detail {
inline double checked_variance(double v, const char* what) {
  if (v < -1e-12) {
    throw Error(ErrorKind::NegativeVariance, std::string(what) + " variance is negative (" + std::to_string(v) +
                                                 "); covariance input is not PSD");
  }
  return std::max(v, 0.0);
}
}  // namespace detail

/// Delta-method variances of GADE(t) and GACME(t), written out term by term.
/// `cov` is the covariance of theta-hat, already scaled by 1/N.
inline std::pair<double, double> delta_variances(const ThetaVector& th, const Matrix6& cov, int t) {
  using I = ThetaVector;
  auto var = [&](int a) { return cov(a, a); };
  auto acov = [&](int a, int b) { return cov(a, b); };
  const double td = t;
  const double m_t = th.m10 + th.m11 * td;
  const double y3t = th.y3 * td;

  const double gade = var(I::kY1) + m_t * m_t * var(I::kY3) + th.y3 * th.y3 * var(I::kM10) +
                      y3t * y3t * var(I::kM11) + 2.0 * th.y3 * acov(I::kY1, I::kM10) +
                      2.0 * m_t * acov(I::kY1, I::kY3) + 2.0 * y3t * acov(I::kY1, I::kM11) +
                      2.0 * m_t * th.y3 * acov(I::kY3, I::kM10) + 2.0 * m_t * y3t * acov(I::kY3, I::kM11) +
                      2.0 * th.y3 * th.y3 * td * acov(I::kM10, I::kM11);

  const double slope_t = th.y2 + th.y3 * td;
  const double m11t = th.m11 * td;
  const double gacme = slope_t * slope_t * var(I::kM11) + th.m11 * th.m11 * var(I::kY2) + m11t * m11t * var(I::kY3) +
                       2.0 * slope_t * th.m11 * acov(I::kM11, I::kY2) + 2.0 * slope_t * m11t * acov(I::kM11, I::kY3) +
                       2.0 * th.m11 * th.m11 * td * acov(I::kY2, I::kY3);

  return {detail::checked_variance(gade, "GADE"), detail::checked_variance(gacme, "GACME")};
}

struct ZTest {
  double z = 0.0;
  double p = 1.0;
  bool p_underflow = false;  ///< true when the two-sided p-value is below the smallest double
};

/// Two-sided p-value 2 (1 - Phi(|z|)) = erfc(|z| / sqrt 2).
inline double two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

inline ZTest z_test(double value, double std_error) {
  if (!(std_error > 0.0)) throw Error(ErrorKind::ZeroStdError, "standard error must be positive");
  ZTest r;
  r.z = value / std_error;
  r.p = two_sided_p(r.z);
  r.p_underflow = (r.p == 0.0);
  return r;
}

/// Table legend: *** p<0.001, ** p<0.01, * p<0.05, . p<0.1.
inline std::string_view significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

struct EffectEstimate {
  EffectKind kind = EffectKind::ate;
  std::optional<int> arm;
  double value = 0.0;
  double std_error = 0.0;
  double z_stat = 0.0;
  double p_value = 1.0;
  bool p_underflow = false;
  double pct_change = 0.0;     ///< value / control mean outcome (a fraction; rendered x100)
  double pct_std_error = 0.0;  ///< std_error / |control mean outcome|
};

struct EffectReport {
  EffectEstimate gade0, gade1, gacme0, gacme1, ate;
  ThetaVector theta;
  Matrix6 covariance = Matrix6::Zero();
  std::pair<ArmSummary, ArmSummary> arm_summaries;
  std::size_t n = 0;
  int iterations = 0;
  Kernel kernel = Kernel::lag0;
  std::size_t bandwidth = 0;

  std::array<const EffectEstimate*, 5> estimates() const { return {&gade0, &gade1, &gacme0, &gacme1, &ate}; }
  double control_mean() const { return arm_summaries.first.mean_outcome; }
};

inline EffectEstimate make_estimate(EffectKind kind, std::optional<int> arm, double value, double variance,
                                    double control_mean) {
  EffectEstimate e;
  e.kind = kind;
  e.arm = arm;
  e.value = value;
  e.std_error = std::sqrt(variance);
  const ZTest z = z_test(value, e.std_error);
  e.z_stat = z.z;
  e.p_value = z.p;
  e.p_underflow = z.p_underflow;
  e.pct_change = value / control_mean;
  e.pct_std_error = e.std_error / std::fabs(control_mean);
  return e;
}

/// Assembles the five effect estimates with Delta-method standard errors.
/// ATE is reported as GADE(0) + GACME(1) and its variance uses the joint
/// gradient, so the covariance between the two pieces is kept.
inline EffectReport build_report(const GmmFit& fit, const std::pair<ArmSummary, ArmSummary>& summaries) {
  const ThetaVector& th = fit.theta;
  const double control_mean = summaries.first.mean_outcome;

  EffectReport report;
  report.theta = th;
  report.covariance = fit.covariance;
  report.arm_summaries = summaries;
  report.n = fit.n;
  report.iterations = fit.iterations;
  report.kernel = fit.kernel;
  report.bandwidth = fit.bandwidth;

  const auto [gade0, gacme0] = effects_from_theta(th, 0);
  const auto [gade1, gacme1] = effects_from_theta(th, 1);
  const auto [v_gade0, v_gacme0] = delta_variances(th, fit.covariance, 0);
  const auto [v_gade1, v_gacme1] = delta_variances(th, fit.covariance, 1);
  const Vector6 g_ate = ate_gradient(th);
  const double v_ate = detail::checked_variance(delta_covariance(g_ate, g_ate, fit.covariance), "ATE");

  report.gade0 = make_estimate(EffectKind::gade, 0, gade0, v_gade0, control_mean);
  report.gade1 = make_estimate(EffectKind::gade, 1, gade1, v_gade1, control_mean);
  report.gacme0 = make_estimate(EffectKind::gacme, 0, gacme0, v_gacme0, control_mean);
  report.gacme1 = make_estimate(EffectKind::gacme, 1, gacme1, v_gacme1, control_mean);
  report.ate = make_estimate(EffectKind::ate, std::nullopt, gade0 + gacme1, v_ate, control_mean);
  return report;
}

/// Decomposition check on a row of percent changes, as published in tables
/// rounded to a fixed number of decimals.
struct AdditivityCheck {
  double residual_control = 0.0;  ///< ATE - (GADE(0) + GACME(1))
  double residual_treated = 0.0;  ///< ATE - (GADE(1) + GACME(0))
  bool accepted = false;
};

inline AdditivityCheck check_additivity(const EffectValues& row, double tolerance) {
  AdditivityCheck c;
  c.residual_control = row.ate - (row.gade0 + row.gacme1);
  c.residual_treated = row.ate - (row.gade1 + row.gacme0);
  c.accepted = std::fabs(c.residual_control) <= tolerance && std::fabs(c.residual_treated) <= tolerance;
  return c;
}

inline EffectValues report_values(const EffectReport& r) {
  return {r.gade0.value, r.gade1.value, r.gacme0.value, r.gacme1.value, r.ate.value};
}

inline EffectValues report_pct_changes(const EffectReport& r) {
  return {r.gade0.pct_change, r.gade1.pct_change, r.gacme0.pct_change, r.gacme1.pct_change, r.ate.pct_change};
}

/// End-to-end estimation: fit, summarize and report.
inline EffectReport analyze(const ObservationTable& table, const HacConfig& config = {}, double tol = 1e-8,
                            int max_iter = 100) {
  const GmmFit fit = itgmm_fit(table, config, tol, max_iter);
  return build_report(fit, summarize(table));
}

}  // namespace mediate
