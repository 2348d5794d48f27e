#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mediate/data.hpp"
#include "mediate/error.hpp"
#include "mediate/numeric.hpp"

namespace mediate {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Coefficients of the two-equation regression system
///   M = m10 + m11 T + u_M
///   Y = y0 + y1 T + y2 M + y3 M T + u_Y
/// stored in that fixed order.
struct ThetaVector {
  enum Index : int { kM10 = 0, kM11, kY0, kY1, kY2, kY3 };

  double m10 = 0.0;
  double m11 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;
  double y2 = 0.0;
  double y3 = 0.0;

  static constexpr std::array<std::string_view, 6> names{"theta_m10", "theta_m11", "theta_y0",
                                                         "theta_y1",  "theta_y2",  "theta_y3"};

  Vector6 vec() const {
    Vector6 v;
    v << m10, m11, y0, y1, y2, y3;
    return v;
  }
  static ThetaVector from_vec(const Vector6& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

  double operator[](int i) const { return vec()[i]; }
  bool all_finite() const { return vec().allFinite(); }
};

/// Moment functions g_1..g_6 for one observation.
struct MomentVector {
  std::array<double, 6> g{};

  double operator[](std::size_t i) const { return g[i]; }
  Vector6 vec() const { return Vector6(g.data()); }
};

inline MomentVector moment_eval(const ThetaVector& theta, double t, double m, double y) noexcept {
  const double u_m = m - theta.m10 - theta.m11 * t;
  const double u_y = y - theta.y0 - theta.y1 * t - theta.y2 * m - theta.y3 * m * t;
  return MomentVector{{u_m, t * u_m, u_y, t * u_y, m * u_y, m * t * u_y}};
}

inline MomentVector moment_eval(const ThetaVector& theta, const ObservationRecord& r) noexcept {
  return moment_eval(theta, static_cast<double>(r.treatment), r.mediator, r.outcome);
}

enum class Kernel { lag0, bartlett };

struct AutoBandwidth {};
struct FixedBandwidth {
  std::size_t lags = 0;
};

struct HacConfig {
  Kernel kernel = Kernel::lag0;
  std::variant<AutoBandwidth, FixedBandwidth> bandwidth = AutoBandwidth{};

  static HacConfig lag0() { return {}; }
  static HacConfig bartlett(std::size_t lags) { return {Kernel::bartlett, FixedBandwidth{lags}}; }
  static HacConfig bartlett_auto() { return {Kernel::bartlett, AutoBandwidth{}}; }
};

/// Newey-West plug-in lag count floor(4 (N/100)^(2/9)).
inline std::size_t newey_west_bandwidth(std::size_t n) {
  return static_cast<std::size_t>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
}

/// Number of lags the HAC sum actually uses for a table of `n` rows.
inline std::size_t resolve_bandwidth(const HacConfig& config, std::size_t n) {
  if (config.kernel == Kernel::lag0) return 0;
  if (const auto* fixed = std::get_if<FixedBandwidth>(&config.bandwidth)) {
    if (fixed->lags >= n) {
      throw Error(ErrorKind::BandwidthTooLarge,
                  "bandwidth " + std::to_string(fixed->lags) + " must be below N=" + std::to_string(n));
    }
    return fixed->lags;
  }
  return std::min(newey_west_bandwidth(n), n - 1);
}

/// Bartlett weight 1 - |s|/(h+1) for |s| <= h, else 0.
inline double bartlett_weight(std::size_t s, std::size_t h) {
  return s > h ? 0.0 : 1.0 - static_cast<double>(s) / static_cast<double>(h + 1);
}

/// Sample mean of the moment vector, gbar(theta).
inline Vector6 moment_mean(const ObservationTable& table, const ThetaVector& theta) {
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto y = table.outcome();
  const auto total = reduce_chunks<CompensatedArray<6>>(table.size(), [&](std::size_t b, std::size_t e) {
    CompensatedArray<6> acc;
    for (std::size_t i = b; i < e; ++i) {
      const auto g = moment_eval(theta, t[i], m[i], y[i]);
      for (std::size_t k = 0; k < 6; ++k) acc.add(k, g[k]);
    }
    return acc;
  });
  Vector6 out;
  for (int k = 0; k < 6; ++k) out[k] = total[k] / static_cast<double>(table.size());
  return out;
}

/// Analytic Jacobian d gbar / d theta. The moments are linear in theta, so it
/// depends only on the data: entries are minus sample means of 1, T, M, MT,
/// M^2 and M^2 T.
inline Matrix6 moment_jacobian(const ObservationTable& table) {
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto total = reduce_chunks<CompensatedArray<5>>(table.size(), [&](std::size_t b, std::size_t e) {
    CompensatedArray<5> acc;
    for (std::size_t i = b; i < e; ++i) {
      const double ti = t[i];
      const double mi = m[i];
      acc.add(0, ti);
      acc.add(1, mi);
      acc.add(2, mi * ti);
      acc.add(3, mi * mi);
      acc.add(4, mi * mi * ti);
    }
    return acc;
  });
  const double n = static_cast<double>(table.size());
  const double T = total[0] / n, M = total[1] / n, MT = total[2] / n, MM = total[3] / n, MMT = total[4] / n;

  Matrix6 g = Matrix6::Zero();
  g.block<2, 2>(0, 0) << 1.0, T, T, T;
  g.block<4, 4>(2, 2) << 1.0, T, M, MT,  //
      T, T, MT, MT,                        //
      M, MT, MM, MMT,                      //
      MT, MT, MMT, MMT;
  return -g;
}

/// Identity-weighted GMM start value. With six moments and six parameters the
/// minimizer solves gbar = 0, i.e. least squares on each equation separately.
/// Because T is binary both regressions saturate by arm, so they are solved
/// as per-arm centered simple regressions.
inline ThetaVector ols_init(const ObservationTable& table) {
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto y = table.outcome();

  struct Means {
    CompensatedArray<4> s;  // per arm: sum M, sum Y
    void merge(const Means& o) { s.merge(o.s); }
  };
  const auto sums = reduce_chunks<Means>(table.size(), [&](std::size_t b, std::size_t e) {
    Means p;
    for (std::size_t i = b; i < e; ++i) {
      p.s.add(2 * t[i], m[i]);
      p.s.add(2 * t[i] + 1, y[i]);
    }
    return p;
  });
  const double n_arm[2] = {static_cast<double>(table.n_control()), static_cast<double>(table.n_treated())};
  const double m_bar[2] = {sums.s[0] / n_arm[0], sums.s[2] / n_arm[1]};
  const double y_bar[2] = {sums.s[1] / n_arm[0], sums.s[3] / n_arm[1]};

  struct Cross {
    CompensatedArray<6> s;  // per arm: Sxx, Sxy, sum M^2
    void merge(const Cross& o) { s.merge(o.s); }
  };
  const auto cross = reduce_chunks<Cross>(table.size(), [&](std::size_t b, std::size_t e) {
    Cross p;
    for (std::size_t i = b; i < e; ++i) {
      const std::size_t a = t[i];
      const double dm = m[i] - m_bar[a];
      p.s.add(3 * a, dm * dm);
      p.s.add(3 * a + 1, dm * (y[i] - y_bar[a]));
      p.s.add(3 * a + 2, m[i] * m[i]);
    }
    return p;
  });

  double slope[2];
  double intercept[2];
  for (int a = 0; a < 2; ++a) {
    const double sxx = cross.s[3 * a];
    const double sxy = cross.s[3 * a + 1];
    const double mm = cross.s[3 * a + 2];
    if (!(sxx > 64.0 * std::numeric_limits<double>::epsilon() * mm) || sxx <= 0.0) {
      throw Error(ErrorKind::SingularDesign, std::string("outcome equation: mediator has no variance in the ") +
                                                 (a == 0 ? "control" : "treated") + " arm");
    }
    slope[a] = sxy / sxx;
    intercept[a] = y_bar[a] - slope[a] * m_bar[a];
  }

  ThetaVector theta;
  theta.m10 = m_bar[0];
  theta.m11 = m_bar[1] - m_bar[0];
  theta.y0 = intercept[0];
  theta.y1 = intercept[1] - intercept[0];
  theta.y2 = slope[0];
  theta.y3 = slope[1] - slope[0];
  return theta;
}

/// HAC long-run covariance of the moments,
///   Omega = Gamma_0 + sum_{s=1..h} k(s) (Gamma_s + Gamma_s^T),
///   Gamma_s = (1/N) sum_i g_i g_{i+s}^T,
/// in input row order. Symmetrized after accumulation.
inline Matrix6 hac_matrix(const ObservationTable& table, const ThetaVector& theta, const HacConfig& config) {
  const std::size_t n = table.size();
  const std::size_t h = resolve_bandwidth(config, n);
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto y = table.outcome();

  struct Partial {
    std::vector<CompensatedSum> s;
    void merge(const Partial& o) {
      if (s.empty()) s.resize(o.s.size());
      for (std::size_t k = 0; k < o.s.size(); ++k) s[k].merge(o.s[k]);
    }
  };

  const auto total = reduce_chunks<Partial>(n, [&](std::size_t b, std::size_t e) {
    Partial p;
    p.s.resize((h + 1) * 36);
    const std::size_t stop = std::min(n, e + h);
    std::vector<MomentVector> g;
    g.reserve(stop - b);
    for (std::size_t i = b; i < stop; ++i) g.push_back(moment_eval(theta, t[i], m[i], y[i]));
    for (std::size_t i = b; i < e; ++i) {
      const auto& gi = g[i - b];
      for (std::size_t lag = 0; lag <= h && i + lag < n; ++lag) {
        const auto& gj = g[i + lag - b];
        CompensatedSum* out = &p.s[lag * 36];
        for (std::size_t r = 0; r < 6; ++r) {
          for (std::size_t c = 0; c < 6; ++c) out[r * 6 + c].add(gi[r] * gj[c]);
        }
      }
    }
    return p;
  });

  Matrix6 omega = Matrix6::Zero();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t lag = 0; lag <= h; ++lag) {
    Matrix6 gamma;
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) gamma(r, c) = total.s[lag * 36 + r * 6 + c].value() * inv_n;
    }
    if (lag == 0) {
      omega += gamma;
    } else {
      omega += bartlett_weight(lag, h) * (gamma + gamma.transpose());
    }
  }
  return 0.5 * (omega + omega.transpose());
}

struct GmmFit {
  ThetaVector theta;
  Matrix6 covariance = Matrix6::Zero();  ///< (G' Omega^-1 G)^-1 / N
  Matrix6 omega = Matrix6::Zero();       ///< HAC matrix at the solution
  Matrix6 jacobian = Matrix6::Zero();    ///< G = d gbar / d theta
  int iterations = 0;
  bool converged = false;
  std::size_t n = 0;
  std::size_t bandwidth = 0;
  Kernel kernel = Kernel::lag0;
};

namespace detail {

inline Eigen::LLT<Matrix6> factor_omega(const Matrix6& omega) {
  Eigen::LLT<Matrix6> llt(omega);
  const double scale = omega.diagonal().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || !(scale > 0.0) || llt.rcond() < 1e-14) {
    throw Error(ErrorKind::SingularOmega, "HAC matrix is not invertible (degenerate moments, e.g. constant outcome)");
  }
  return llt;
}

}  // namespace detail

/// Iterated GMM with a HAC weighting matrix. Each pass recomputes Omega at the
/// current estimate and takes the exact minimizing step of
/// gbar(theta)' Omega^-1 gbar(theta), solved through the Cholesky factor of
/// Omega rather than by forming the weighted normal equations explicitly.
inline GmmFit itgmm_fit(const ObservationTable& table, const HacConfig& config = {}, double tol = 1e-8,
                        int max_iter = 100) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
  if (max_iter < 1) throw Error(ErrorKind::InvalidArgument, "max_iter must be at least 1");

  GmmFit fit;
  fit.n = table.size();
  fit.kernel = config.kernel;
  fit.bandwidth = resolve_bandwidth(config, table.size());
  fit.jacobian = moment_jacobian(table);

  ThetaVector current = ols_init(table);
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix6 omega = hac_matrix(table, current, config);
    const auto llt = detail::factor_omega(omega);
    // gbar(theta + d) = gbar(theta) + G d, so the weighted minimizer is the
    // least-squares solution of L^-1 G d = -L^-1 gbar(theta).
    const Matrix6 whitened_g = llt.matrixL().solve(fit.jacobian);
    const Vector6 whitened_gbar = llt.matrixL().solve(moment_mean(table, current));
    const Vector6 step = whitened_g.colPivHouseholderQr().solve(-whitened_gbar);
    const ThetaVector next = ThetaVector::from_vec(current.vec() + step);
    fit.iterations = it;
    const bool done = (next.vec() - current.vec()).norm() < tol;
    current = next;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    throw Error(ErrorKind::NoConvergence, "ITGMM did not converge in " + std::to_string(max_iter) + " iterations");
  }
  if (!current.all_finite()) throw Error(ErrorKind::SingularDesign, "non-finite coefficient estimate");

  fit.theta = current;
  fit.omega = hac_matrix(table, current, config);
  const auto llt = detail::factor_omega(fit.omega);

  // (G' Omega^-1 G)^-1 = (B'B)^-1 with B = L^-1 G = QR, i.e. R^-1 R^-T.
  const Matrix6 whitened_g = llt.matrixL().solve(fit.jacobian);
  const Eigen::HouseholderQR<Matrix6> qr(whitened_g);
  const Matrix6 r = qr.matrixQR().triangularView<Eigen::Upper>();
  if (r.diagonal().cwiseAbs().minCoeff() <= 1e-14 * r.diagonal().cwiseAbs().maxCoeff()) {
    throw Error(ErrorKind::SingularDesign, "moment Jacobian is rank deficient");
  }
  const Matrix6 r_inv = r.triangularView<Eigen::Upper>().solve(Matrix6::Identity());
  const Matrix6 v_inv = r_inv * r_inv.transpose();
  fit.covariance = 0.5 * (v_inv + v_inv.transpose()) / static_cast<double>(fit.n);
  return fit;
}

}  // namespace mediate
