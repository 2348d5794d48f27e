#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mediate/data.hpp"
#include "mediate/effects.hpp"
#include "mediate/error.hpp"
#include "mediate/estimators.hpp"
#include "mediate/numeric.hpp"
#include "mediate/random.hpp"

namespace mediate {

enum class NoiseFamily { normal, scaled_centered_bernoulli, centered_uniform };

/// Zero-mean error law with standard deviation `scale`.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::normal;
  double scale = 1.0;
  double p = 0.5;  ///< success probability, bernoulli only

  double variance() const { return scale * scale; }

  double draw(const rng::UnitStream& stream, std::uint32_t slot) const {
    switch (family) {
      case NoiseFamily::normal:
        return scale * stream.normal(slot);
      case NoiseFamily::scaled_centered_bernoulli: {
        const double b = stream.uniform(slot) < p ? 1.0 : 0.0;
        return scale * (b - p) / std::sqrt(p * (1.0 - p));
      }
      case NoiseFamily::centered_uniform:
        return scale * std::sqrt(3.0) * (2.0 * stream.uniform(slot) - 1.0);
    }
    return 0.0;
  }
};

/// Linear structural equation model with an unmeasured upstream block M0 (K
/// mediators), the measured mediator M1, an unmeasured downstream block M2
/// (J mediators) and the outcome Y:
///
///   M0 = alpha0 + beta0 T + e0
///   M1 = alpha1 + beta1 T + psi1'M0 + xi1'M0 T + e1
///   M2 = alpha2 + beta2 T + Psi2 M0 + psi3 M1 + Xi2 M0 T + xi3 M1 T + e2
///   Y  = alpha3 + beta3 T + gamma0'M0 + gamma1 M1 + gamma2'M2
///        + kappa0'M0 T + kappa1 M1 T + kappa2'M2 T + e3
///
/// T ~ Bernoulli(p_treat) independently of all errors, and the errors are
/// mutually independent.
struct LsemSpec {
  int k_upstream = 0;
  int j_downstream = 0;
  Eigen::VectorXd alpha0, beta0;
  double alpha1 = 0.0, beta1 = 0.0;
  Eigen::VectorXd psi1, xi1;
  Eigen::VectorXd alpha2, beta2;
  Eigen::MatrixXd Psi2, Xi2;  // J x K
  Eigen::VectorXd psi3, xi3;
  double alpha3 = 0.0, beta3 = 0.0;
  Eigen::VectorXd gamma0;
  double gamma1 = 0.0;
  Eigen::VectorXd gamma2;
  Eigen::VectorXd kappa0;
  double kappa1 = 0.0;
  Eigen::VectorXd kappa2;
  NoiseSpec noise_m0, noise_m1, noise_m2, noise_y;
  double p_treat = 0.5;

  /// All-zero spec with the given block sizes.
  static LsemSpec zeros(int k, int j) {
    LsemSpec s;
    s.k_upstream = k;
    s.j_downstream = j;
    s.alpha0 = s.beta0 = s.psi1 = s.xi1 = s.gamma0 = s.kappa0 = Eigen::VectorXd::Zero(k);
    s.alpha2 = s.beta2 = s.psi3 = s.xi3 = s.gamma2 = s.kappa2 = Eigen::VectorXd::Zero(j);
    s.Psi2 = s.Xi2 = Eigen::MatrixXd::Zero(j, k);
    return s;
  }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw Error(ErrorKind::DimensionMismatch, what);
    };
    const int k = k_upstream;
    const int j = j_downstream;
    need(k >= 0 && j >= 0, "block sizes must be nonnegative");
    for (const auto* v : {&alpha0, &beta0, &psi1, &xi1, &gamma0, &kappa0}) {
      need(v->size() == k, "upstream vectors must have length K=" + std::to_string(k));
    }
    for (const auto* v : {&alpha2, &beta2, &psi3, &xi3, &gamma2, &kappa2}) {
      need(v->size() == j, "downstream vectors must have length J=" + std::to_string(j));
    }
    need(Psi2.rows() == j && Psi2.cols() == k && Xi2.rows() == j && Xi2.cols() == k, "Psi2 and Xi2 must be J x K");
    auto valid_noise = [](const NoiseSpec& n) {
      return std::isfinite(n.scale) && n.scale >= 0.0 &&
             (n.family != NoiseFamily::scaled_centered_bernoulli || (n.p > 0.0 && n.p < 1.0));
    };
    if (!(p_treat > 0.0 && p_treat < 1.0)) throw Error(ErrorKind::InvalidArgument, "p_treat must be in (0, 1)");
    if (!valid_noise(noise_m0) || !valid_noise(noise_m1) || !valid_noise(noise_m2) || !valid_noise(noise_y)) {
      throw Error(ErrorKind::InvalidArgument, "noise scale must be finite and >= 0; bernoulli p in (0, 1)");
    }
  }

  /// Random slots used per unit: T, e0 (K), e1, e2 (J), e3.
  std::uint32_t slots_per_unit() const { return static_cast<std::uint32_t>(k_upstream + j_downstream + 3); }
};

struct GroundTruth {
  EffectValues effects;
  ThetaVector theta_true;
};

// ---------------------------------------------------------------------------
// Structural equations

namespace structural {

struct UnitErrors {
  Eigen::VectorXd e0;
  double e1 = 0.0;
  Eigen::VectorXd e2;
  double e3 = 0.0;
};

/// Scratch space for evaluating the equations on one unit without allocating.
struct Workspace {
  explicit Workspace(const LsemSpec& s)
      : errors{Eigen::VectorXd(s.k_upstream), 0.0, Eigen::VectorXd(s.j_downstream), 0.0},
        m0_a(s.k_upstream),
        m0_b(s.k_upstream),
        m2(s.j_downstream) {}
  UnitErrors errors;
  Eigen::VectorXd m0_a, m0_b, m2;
};

inline void draw_errors(const LsemSpec& s, const rng::UnitStream& stream, std::uint32_t first_slot, UnitErrors& e) {
  std::uint32_t slot = first_slot;
  for (int k = 0; k < s.k_upstream; ++k) e.e0[k] = s.noise_m0.draw(stream, slot++);
  e.e1 = s.noise_m1.draw(stream, slot++);
  for (int j = 0; j < s.j_downstream; ++j) e.e2[j] = s.noise_m2.draw(stream, slot++);
  e.e3 = s.noise_y.draw(stream, slot++);
}

inline void upstream(const LsemSpec& s, double t, const UnitErrors& e, Eigen::VectorXd& m0) {
  m0.noalias() = s.alpha0 + t * s.beta0 + e.e0;
}

inline double mediator(const LsemSpec& s, double t, const Eigen::VectorXd& m0, const UnitErrors& e) {
  return s.alpha1 + s.beta1 * t + (s.psi1 + t * s.xi1).dot(m0) + e.e1;
}

inline void downstream(const LsemSpec& s, double t, const Eigen::VectorXd& m0, double m1, const UnitErrors& e,
                       Eigen::VectorXd& m2) {
  m2.noalias() = s.alpha2 + t * s.beta2 + e.e2;
  m2.noalias() += s.Psi2 * m0;
  if (t != 0.0) m2.noalias() += t * (s.Xi2 * m0);
  m2 += (s.psi3 + t * s.xi3) * m1;
}

inline double outcome(const LsemSpec& s, double t, const Eigen::VectorXd& m0, double m1, const Eigen::VectorXd& m2,
                      const UnitErrors& e) {
  return s.alpha3 + s.beta3 * t + (s.gamma0 + t * s.kappa0).dot(m0) + (s.gamma1 + s.kappa1 * t) * m1 +
         (s.gamma2 + t * s.kappa2).dot(m2) + e.e3;
}

/// Y(a, M0(a), M1(b, M0(b)), M2(a, M0(a), M1(b, M0(b)))) for one unit's errors.
inline double nested_outcome(const LsemSpec& s, int a, int b, Workspace& w) {
  upstream(s, a, w.errors, w.m0_a);
  upstream(s, b, w.errors, w.m0_b);
  const double m1 = mediator(s, b, w.m0_b, w.errors);
  downstream(s, a, w.m0_a, m1, w.errors, w.m2);
  return outcome(s, a, w.m0_a, m1, w.m2, w.errors);
}

}  // namespace structural

// ---------------------------------------------------------------------------
// Simulation

inline constexpr std::uint32_t kSimulationStream = 0;
inline constexpr std::uint32_t kOracleStream = 1;
inline constexpr std::uint32_t kSpecStream = 2;

/// Simulated data including the withheld mediator blocks (row-major, one row
/// per unit).
struct LatentSample {
  ObservationTable table;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m2;
};

namespace detail {

template <class Sink>
void simulate_units(const LsemSpec& spec, std::size_t n, std::uint64_t seed, Sink&& sink) {
  spec.validate();
  if (n < 4) throw Error(ErrorKind::InvalidArgument, "simulate needs n >= 4");
  map_chunks(n, [&](std::size_t begin, std::size_t end) {
    structural::Workspace w(spec);
    for (std::size_t i = begin; i < end; ++i) {
      const rng::UnitStream stream(seed, kSimulationStream, i);
      const int t = stream.uniform(0) < spec.p_treat ? 1 : 0;
      structural::draw_errors(spec, stream, 1, w.errors);
      structural::upstream(spec, t, w.errors, w.m0_a);
      const double m1 = structural::mediator(spec, t, w.m0_a, w.errors);
      structural::downstream(spec, t, w.m0_a, m1, w.errors, w.m2);
      const double y = structural::outcome(spec, t, w.m0_a, m1, w.m2, w.errors);
      sink(i, t, m1, y, w.m0_a, w.m2);
    }
    return 0;
  });
}

}  // namespace detail

/// Draws n units from the structural model and returns only the measured
/// columns (T, M1, Y). Deterministic in (spec, n, seed) and independent of the
/// worker count.
inline ObservationTable simulate(const LsemSpec& spec, std::size_t n, std::uint64_t seed) {
  std::vector<std::uint8_t> t(n);
  std::vector<double> m(n), y(n);
  detail::simulate_units(spec, n, seed, [&](std::size_t i, int ti, double mi, double yi, const auto&, const auto&) {
    t[i] = static_cast<std::uint8_t>(ti);
    m[i] = mi;
    y[i] = yi;
  });
  return ObservationTable::from_columns(std::move(t), std::move(m), std::move(y));
}

/// Same draws as simulate(), additionally recording M0 and M2.
inline LatentSample simulate_latent(const LsemSpec& spec, std::size_t n, std::uint64_t seed) {
  std::vector<std::uint8_t> t(n);
  std::vector<double> m(n), y(n);
  decltype(LatentSample::m0) m0(static_cast<Eigen::Index>(n), spec.k_upstream);
  decltype(LatentSample::m2) m2(static_cast<Eigen::Index>(n), spec.j_downstream);
  detail::simulate_units(spec, n, seed,
                         [&](std::size_t i, int ti, double mi, double yi, const auto& m0_i, const auto& m2_i) {
                           t[i] = static_cast<std::uint8_t>(ti);
                           m[i] = mi;
                           y[i] = yi;
                           m0.row(static_cast<Eigen::Index>(i)) = m0_i.transpose();
                           m2.row(static_cast<Eigen::Index>(i)) = m2_i.transpose();
                         });
  return {ObservationTable::from_columns(std::move(t), std::move(m), std::move(y)), std::move(m0), std::move(m2)};
}

// ---------------------------------------------------------------------------
// Closed forms

/// Regression-system coefficients implied by the structure, obtained by
/// substituting the M0 and M2 equations into the M1 and Y equations and
/// collecting the terms in 1, T, M1 and M1 T.
///
/// These coincide with the population least-squares coefficients only when
/// the upstream block does not open a back-door path M1 <- M0 -> Y; see
/// population_projection() for the general probability limit.
inline ThetaVector theta_from_structural(const LsemSpec& s) {
  s.validate();
  const Eigen::VectorXd m0_treated = s.alpha0 + s.beta0;
  ThetaVector th;
  th.m10 = s.alpha1 + s.psi1.dot(s.alpha0);
  th.m11 = s.beta1 + s.psi1.dot(s.beta0) + s.xi1.dot(s.alpha0) + s.xi1.dot(s.beta0);
  th.y0 = s.alpha3 + s.gamma0.dot(s.alpha0) + s.gamma2.dot(s.alpha2 + s.Psi2 * s.alpha0);
  th.y1 = s.beta3 + s.gamma0.dot(s.beta0) + s.gamma2.dot(s.beta2 + s.Psi2 * s.beta0 + s.Xi2 * m0_treated) +
          s.kappa0.dot(m0_treated) + s.kappa2.dot(s.alpha2 + s.beta2 + (s.Psi2 + s.Xi2) * m0_treated);
  th.y2 = s.gamma1 + s.gamma2.dot(s.psi3);
  th.y3 = s.gamma2.dot(s.xi3) + s.kappa1 + s.kappa2.dot(s.psi3) + s.kappa2.dot(s.xi3);
  return th;
}

/// Direct expansion of the effect definitions in structural coefficients,
/// without passing through the regression coefficients.
inline EffectValues effects_from_structure(const LsemSpec& s) {
  s.validate();
  const Eigen::VectorXd m0_treated = s.alpha0 + s.beta0;
  const double m1_control = s.alpha1 + s.psi1.dot(s.alpha0);
  const double m1_shift = s.beta1 + s.psi1.dot(s.beta0) + s.xi1.dot(m0_treated);

  auto gade = [&](int t) {
    const double m1_t = m1_control + m1_shift * t;
    return s.beta3 + s.gamma0.dot(s.beta0) + s.gamma2.dot(s.beta2 + s.Psi2 * s.beta0 + s.Xi2 * m0_treated) +
           s.gamma2.dot(s.xi3) * m1_t + s.kappa0.dot(m0_treated) + s.kappa1 * m1_t +
           s.kappa2.dot(s.alpha2 + s.beta2 + (s.Psi2 + s.Xi2) * m0_treated) + s.kappa2.dot(s.psi3 + s.xi3) * m1_t;
  };
  auto gacme = [&](int t) {
    return (s.gamma2 + t * s.kappa2).dot(s.psi3 + t * s.xi3) * m1_shift + (s.gamma1 + s.kappa1 * t) * m1_shift;
  };

  EffectValues v;
  v.gade0 = gade(0);
  v.gade1 = gade(1);
  v.gacme0 = gacme(0);
  v.gacme1 = gacme(1);
  v.ate = v.gade0 + v.gacme1;
  return v;
}

/// Ground truth by two routes: the structural expansion above and the
/// identification formulas applied to theta_from_structural(). The routes are
/// algebraically identical; disagreement means a bug.
inline GroundTruth true_effects_from_structural(const LsemSpec& s) {
  const EffectValues direct = effects_from_structure(s);
  const ThetaVector theta = theta_from_structural(s);
  const EffectValues via_theta = all_effects(theta);
  const auto a = direct.as_array();
  const auto b = via_theta.as_array();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
    if (!(std::fabs(a[i] - b[i]) <= 1e-12 * scale)) {
      throw Error(ErrorKind::InternalInconsistency, std::string(kEffectLabels[i]) + ": structural route " +
                                                        std::to_string(a[i]) + " vs regression route " +
                                                        std::to_string(b[i]));
    }
  }
  return {direct, theta};
}

/// Exact population least-squares coefficients of the regression system
/// under the spec, accounting for the covariance that the unmeasured upstream
/// block induces between M1 and the outcome error. This is the probability
/// limit of the estimator for any spec.
inline ThetaVector population_projection(const LsemSpec& s) {
  s.validate();
  double intercept[2];
  double slope[2];
  double mean_m1[2];
  const Eigen::VectorXd var_e0 = Eigen::VectorXd::Constant(s.k_upstream, s.noise_m0.variance());
  for (int t = 0; t < 2; ++t) {
    const Eigen::VectorXd m0 = s.alpha0 + t * s.beta0;
    const Eigen::VectorXd w = s.psi1 + t * s.xi1;
    const double m1 = s.alpha1 + s.beta1 * t + w.dot(m0);
    const Eigen::MatrixXd mix = s.Psi2 + t * s.Xi2;
    const Eigen::VectorXd down = s.gamma2 + t * s.kappa2;
    const Eigen::VectorXd m2 = s.alpha2 + t * s.beta2 + mix * m0 + (s.psi3 + t * s.xi3) * m1;
    const double y = s.alpha3 + s.beta3 * t + (s.gamma0 + t * s.kappa0).dot(m0) + (s.gamma1 + s.kappa1 * t) * m1 +
                     down.dot(m2);

    // Within arm t: Y = c + a'M0 + b M1 + noise independent of (M0, M1).
    const Eigen::VectorXd a = s.gamma0 + t * s.kappa0 + mix.transpose() * down;
    const double b = s.gamma1 + s.kappa1 * t + down.dot(s.psi3 + t * s.xi3);
    const double var_m1 = w.cwiseProduct(var_e0).dot(w) + s.noise_m1.variance();
    if (!(var_m1 > 0.0)) {
      throw Error(ErrorKind::SingularDesign, "mediator has zero variance within an arm; projection undefined");
    }
    slope[t] = b + a.cwiseProduct(var_e0).dot(w) / var_m1;
    intercept[t] = y - slope[t] * m1;
    mean_m1[t] = m1;
  }
  ThetaVector th;
  th.m10 = mean_m1[0];
  th.m11 = mean_m1[1] - mean_m1[0];
  th.y0 = intercept[0];
  th.y1 = intercept[1] - intercept[0];
  th.y2 = slope[0];
  th.y3 = slope[1] - slope[0];
  return th;
}

/// True when the closed-form coefficients are the population regression
/// coefficients, i.e. no unmeasured upstream confounding of M1 and Y.
inline bool structurally_identified(const LsemSpec& s, double tol = 1e-12) {
  const Vector6 diff = theta_from_structural(s).vec() - population_projection(s).vec();
  return diff.cwiseAbs().maxCoeff() <= tol * (1.0 + theta_from_structural(s).vec().cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------------------
// Brute-force counterfactual oracle

struct OracleResult {
  EffectValues effects;
  EffectValues std_errors;  ///< Monte Carlo standard errors of the means
  std::size_t n_mc = 0;
};

/// The four nested potential outcomes Y(a, b) of one simulated unit, where a
/// sets T, M0 and M2 and b sets the arm that generates M1:
/// (Y(0,0), Y(1,0), Y(0,1), Y(1,1)).
inline std::array<double, 4> counterfactual_unit(const LsemSpec& spec, std::uint64_t seed, std::uint64_t unit) {
  spec.validate();
  structural::Workspace w(spec);
  structural::draw_errors(spec, rng::UnitStream(seed, kOracleStream, unit), 0, w.errors);
  return {structural::nested_outcome(spec, 0, 0, w), structural::nested_outcome(spec, 1, 0, w),
          structural::nested_outcome(spec, 0, 1, w), structural::nested_outcome(spec, 1, 1, w)};
}

/// Averages per-unit counterfactual contrasts from the effect definitions,
/// with all arms of a unit sharing one error draw.
inline OracleResult counterfactual_oracle(const LsemSpec& spec, std::size_t n_mc, std::uint64_t seed) {
  spec.validate();
  if (n_mc < 1000) throw Error(ErrorKind::InvalidArgument, "counterfactual_oracle needs n_mc >= 1000");

  struct Partial {
    CompensatedArray<10> s;  // sum and sum of squares for the five contrasts
    void merge(const Partial& o) { s.merge(o.s); }
  };
  auto contrasts = [&](std::size_t i, structural::Workspace& w, double* d) {
    structural::draw_errors(spec, rng::UnitStream(seed, kOracleStream, i), 0, w.errors);
    const double y00 = structural::nested_outcome(spec, 0, 0, w);
    const double y10 = structural::nested_outcome(spec, 1, 0, w);
    const double y01 = structural::nested_outcome(spec, 0, 1, w);
    const double y11 = structural::nested_outcome(spec, 1, 1, w);
    d[0] = y10 - y00;
    d[1] = y11 - y01;
    d[2] = y01 - y00;
    d[3] = y11 - y10;
    d[4] = y11 - y00;
  };
  // Sums are taken around the first unit's contrasts to keep the variance
  // accurate when it is tiny relative to the mean.
  double shift[5];
  {
    structural::Workspace w(spec);
    contrasts(0, w, shift);
  }
  const auto total = reduce_chunks<Partial>(n_mc, [&](std::size_t b, std::size_t e) {
    Partial p;
    structural::Workspace w(spec);
    double d[5];
    for (std::size_t i = b; i < e; ++i) {
      contrasts(i, w, d);
      for (int k = 0; k < 5; ++k) {
        const double c = d[k] - shift[k];
        p.s.add(2 * k, c);
        p.s.add(2 * k + 1, c * c);
      }
    }
    return p;
  });

  const double n = static_cast<double>(n_mc);
  double mean[5];
  double se[5];
  for (int k = 0; k < 5; ++k) {
    const double centered = total.s[2 * k] / n;
    mean[k] = shift[k] + centered;
    const double var = std::max(0.0, (total.s[2 * k + 1] - n * centered * centered) / (n - 1.0));
    se[k] = std::sqrt(var / n);
  }
  return {{mean[0], mean[1], mean[2], mean[3], mean[4]}, {se[0], se[1], se[2], se[3], se[4]}, n_mc};
}

// ---------------------------------------------------------------------------
// Random specs for Monte Carlo studies

enum class SpecShape {
  generic,         ///< every coefficient random
  null_treatment,  ///< every treatment coefficient zero
  unconfounded,    ///< upstream block affects Y only through M1
};

/// Deterministic random spec. Coefficients are U(-1, 1), noise scales
/// U(0.5, 1.5) with a random family per block, p_treat U(0.3, 0.7).
inline LsemSpec random_spec(int k, int j, std::uint64_t seed, SpecShape shape = SpecShape::generic) {
  const rng::UnitStream stream(seed, kSpecStream, 0);
  std::uint32_t slot = 0;
  auto coef = [&] { return 2.0 * stream.uniform(slot++) - 1.0; };
  auto vec = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = coef();
    return v;
  };
  auto mat = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int jj = 0; jj < c; ++jj) m(i, jj) = coef();
    return m;
  };
  auto noise = [&] {
    NoiseSpec n;
    n.family = static_cast<NoiseFamily>(static_cast<int>(stream.uniform(slot++) * 3.0) % 3);
    n.scale = 0.5 + stream.uniform(slot++);
    n.p = n.family == NoiseFamily::scaled_centered_bernoulli ? 0.2 + 0.6 * stream.uniform(slot++) : 0.5;
    return n;
  };

  LsemSpec s;
  s.k_upstream = k;
  s.j_downstream = j;
  s.alpha0 = vec(k);
  s.beta0 = vec(k);
  s.alpha1 = coef();
  s.beta1 = coef();
  s.psi1 = vec(k);
  s.xi1 = vec(k);
  s.alpha2 = vec(j);
  s.beta2 = vec(j);
  s.Psi2 = mat(j, k);
  s.Xi2 = mat(j, k);
  s.psi3 = vec(j);
  s.xi3 = vec(j);
  s.alpha3 = coef();
  s.beta3 = coef();
  s.gamma0 = vec(k);
  s.gamma1 = coef();
  s.gamma2 = vec(j);
  s.kappa0 = vec(k);
  s.kappa1 = coef();
  s.kappa2 = vec(j);
  s.noise_m0 = noise();
  s.noise_m1 = noise();
  s.noise_m2 = noise();
  s.noise_y = noise();
  s.p_treat = 0.3 + 0.4 * stream.uniform(slot++);

  if (shape == SpecShape::null_treatment) {
    s.beta0.setZero();
    s.beta1 = 0.0;
    s.xi1.setZero();
    s.beta2.setZero();
    s.Xi2.setZero();
    s.xi3.setZero();
    s.beta3 = 0.0;
    s.kappa0.setZero();
    s.kappa1 = 0.0;
    s.kappa2.setZero();
  } else if (shape == SpecShape::unconfounded) {
    s.gamma0.setZero();
    s.kappa0.setZero();
    s.Psi2.setZero();
    s.Xi2.setZero();
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSON

namespace json_io {

using nlohmann::json;

inline std::string_view family_name(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::normal: return "normal";
    case NoiseFamily::scaled_centered_bernoulli: return "scaled-centered-bernoulli";
    case NoiseFamily::centered_uniform: return "centered-uniform";
  }
  return "normal";
}

inline json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

inline json noise_json(const NoiseSpec& n) {
  json j{{"family", family_name(n.family)}, {"scale", n.scale}};
  if (n.family == NoiseFamily::scaled_centered_bernoulli) j["p"] = n.p;
  return j;
}

inline json theta_json(const ThetaVector& th) {
  json j;
  const Vector6 v = th.vec();
  for (int i = 0; i < 6; ++i) j[std::string(ThetaVector::names[i])] = v[i];
  return j;
}

inline json effects_json(const EffectValues& v) {
  return {{"gade0", v.gade0}, {"gade1", v.gade1}, {"gacme0", v.gacme0}, {"gacme1", v.gacme1}, {"ate", v.ate}};
}

inline json truth_json(const GroundTruth& g) {
  json j = effects_json(g.effects);
  j["theta_true"] = theta_json(g.theta_true);
  return j;
}

}  // namespace json_io

inline nlohmann::json spec_to_json(const LsemSpec& s) {
  using namespace json_io;
  return {{"k_upstream", s.k_upstream},
          {"j_downstream", s.j_downstream},
          {"alpha0", vector_json(s.alpha0)},
          {"beta0", vector_json(s.beta0)},
          {"alpha1", s.alpha1},
          {"beta1", s.beta1},
          {"psi1", vector_json(s.psi1)},
          {"xi1", vector_json(s.xi1)},
          {"alpha2", vector_json(s.alpha2)},
          {"beta2", vector_json(s.beta2)},
          {"Psi2", matrix_json(s.Psi2)},
          {"Xi2", matrix_json(s.Xi2)},
          {"psi3", vector_json(s.psi3)},
          {"xi3", vector_json(s.xi3)},
          {"alpha3", s.alpha3},
          {"beta3", s.beta3},
          {"gamma0", vector_json(s.gamma0)},
          {"gamma1", s.gamma1},
          {"gamma2", vector_json(s.gamma2)},
          {"kappa0", vector_json(s.kappa0)},
          {"kappa1", s.kappa1},
          {"kappa2", vector_json(s.kappa2)},
          {"noise",
           {{"m0", noise_json(s.noise_m0)},
            {"m1", noise_json(s.noise_m1)},
            {"m2", noise_json(s.noise_m2)},
            {"y", noise_json(s.noise_y)}}},
          {"p_treat", s.p_treat}};
}

/// Parses a spec document. Absent coefficient fields default to zero, absent
/// noise blocks to normal(scale 1), absent p_treat to 0.5. Present fields must
/// have the right type and dimension.
inline LsemSpec spec_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) -> void { throw Error(ErrorKind::SpecParseError, what); };
  if (!j.is_object()) fail("spec must be a JSON object");

  auto integer = [&](const char* key) {
    if (!j.contains(key)) return 0;
    if (!j[key].is_number_integer()) fail(std::string(key) + " must be an integer");
    return j[key].get<int>();
  };
  LsemSpec s = LsemSpec::zeros(std::max(0, integer("k_upstream")), std::max(0, integer("j_downstream")));
  if (integer("k_upstream") < 0 || integer("j_downstream") < 0) {
    throw Error(ErrorKind::DimensionMismatch, "block sizes must be nonnegative");
  }

  auto scalar = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) fail(std::string(key) + " must be a number");
    out = j[key].get<double>();
  };
  auto vector = [&](const char* key, Eigen::VectorXd& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_array()) fail(std::string(key) + " must be an array");
    const auto& arr = j[key];
    if (static_cast<Eigen::Index>(arr.size()) != out.size()) {
      throw Error(ErrorKind::DimensionMismatch, std::string(key) + " has length " + std::to_string(arr.size()) +
                                                    ", expected " + std::to_string(out.size()));
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) fail(std::string(key) + " entries must be numbers");
      out[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
  };
  auto matrix = [&](const char* key, Eigen::MatrixXd& out) {
    if (!j.contains(key)) return;
    const auto& rows = j[key];
    if (!rows.is_array()) fail(std::string(key) + " must be an array of rows");
    if (static_cast<Eigen::Index>(rows.size()) != out.rows()) {
      throw Error(ErrorKind::DimensionMismatch, std::string(key) + " must have J rows");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].is_array() || static_cast<Eigen::Index>(rows[r].size()) != out.cols()) {
        throw Error(ErrorKind::DimensionMismatch, std::string(key) + " rows must have length K");
      }
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        if (!rows[r][c].is_number()) fail(std::string(key) + " entries must be numbers");
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
      }
    }
  };
  auto noise = [&](const nlohmann::json& block, const char* key, NoiseSpec& out) {
    if (!block.contains(key)) return;
    const auto& n = block[key];
    if (!n.is_object()) fail(std::string("noise.") + key + " must be an object");
    if (n.contains("family")) {
      if (!n["family"].is_string()) fail("noise family must be a string");
      const auto f = n["family"].get<std::string>();
      if (f == "normal") {
        out.family = NoiseFamily::normal;
      } else if (f == "scaled-centered-bernoulli") {
        out.family = NoiseFamily::scaled_centered_bernoulli;
      } else if (f == "centered-uniform") {
        out.family = NoiseFamily::centered_uniform;
      } else {
        fail("unknown noise family '" + f + "'");
      }
    }
    for (const char* field : {"scale", "p"}) {
      if (!n.contains(field)) continue;
      if (!n[field].is_number()) fail(std::string("noise ") + field + " must be a number");
      (std::string(field) == "scale" ? out.scale : out.p) = n[field].get<double>();
    }
  };

  vector("alpha0", s.alpha0);
  vector("beta0", s.beta0);
  scalar("alpha1", s.alpha1);
  scalar("beta1", s.beta1);
  vector("psi1", s.psi1);
  vector("xi1", s.xi1);
  vector("alpha2", s.alpha2);
  vector("beta2", s.beta2);
  matrix("Psi2", s.Psi2);
  matrix("Xi2", s.Xi2);
  vector("psi3", s.psi3);
  vector("xi3", s.xi3);
  scalar("alpha3", s.alpha3);
  scalar("beta3", s.beta3);
  vector("gamma0", s.gamma0);
  scalar("gamma1", s.gamma1);
  vector("gamma2", s.gamma2);
  vector("kappa0", s.kappa0);
  scalar("kappa1", s.kappa1);
  vector("kappa2", s.kappa2);
  scalar("p_treat", s.p_treat);
  if (j.contains("noise")) {
    const auto& block = j["noise"];
    if (!block.is_object()) fail("noise must be an object");
    noise(block, "m0", s.noise_m0);
    noise(block, "m1", s.noise_m1);
    noise(block, "m2", s.noise_m2);
    noise(block, "y", s.noise_y);
  }
  s.validate();
  return s;
}

}  // namespace mediate
