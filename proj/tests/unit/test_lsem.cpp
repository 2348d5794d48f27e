#include <catch_amalgamated.hpp>

#include <cmath>

#include "mediate/effects.hpp"
#include "mediate/lsem.hpp"
#include "oracles.hpp"

using namespace mediate;

namespace {

LsemSpec noiseless(LsemSpec s) {
  for (NoiseSpec* n : {&s.noise_m0, &s.noise_m1, &s.noise_m2, &s.noise_y}) n->scale = 0.0;
  return s;
}

/// Conditional means E[M1 | T=t] and E[Y | T=t, M1=m] by evaluating the
/// structural equations with errors at their means, except that the mediator
/// error is set so M1 takes the requested value. Exact for specs without
/// upstream confounding of M1 and Y.
struct ConditionalMeans {
  const LsemSpec& s;

  double mediator(int t) const {
    structural::UnitErrors e{Eigen::VectorXd::Zero(s.k_upstream), 0.0, Eigen::VectorXd::Zero(s.j_downstream), 0.0};
    Eigen::VectorXd m0(s.k_upstream);
    structural::upstream(s, t, e, m0);
    return structural::mediator(s, t, m0, e);
  }

  double outcome(int t, double m) const {
    structural::UnitErrors e{Eigen::VectorXd::Zero(s.k_upstream), 0.0, Eigen::VectorXd::Zero(s.j_downstream), 0.0};
    Eigen::VectorXd m0(s.k_upstream), m2(s.j_downstream);
    structural::upstream(s, t, e, m0);
    e.e1 = m - mediator(t);
    const double m1 = structural::mediator(s, t, m0, e);
    structural::downstream(s, t, m0, m1, e, m2);
    return structural::outcome(s, t, m0, m1, m2, e);
  }

  ThetaVector theta() const {
    double slope[2], intercept[2];
    for (int t = 0; t < 2; ++t) {
      intercept[t] = outcome(t, 0.0);
      slope[t] = outcome(t, 1.0) - intercept[t];
    }
    return {mediator(0), mediator(1) - mediator(0), intercept[0], intercept[1] - intercept[0], slope[0],
            slope[1] - slope[0]};
  }
};

double max_abs(const Vector6& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("closed-form regression coefficients match evaluated conditional means") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const int k = static_cast<int>(seed % 4);
    const int j = static_cast<int>((seed / 4) % 4);
    const LsemSpec s = random_spec(k, j, seed, SpecShape::unconfounded);
    const ThetaVector expect = ConditionalMeans{s}.theta();
    CHECK(max_abs(theta_from_structural(s).vec() - expect.vec()) < 1e-12);
    CHECK(structurally_identified(s));
  }
}

TEST_CASE("one upstream mediator folded into the mediator equation by hand") {
  // M0 = a0 + b0 T + e0, M1 = a1 + b1 T + (p + x T) M0 + e1 gives
  // E[M1 | T=1] - E[M1 | T=0] = b1 + p b0 + x (a0 + b0).
  LsemSpec s = LsemSpec::zeros(1, 0);
  s.alpha0 << 0.7;
  s.beta0 << -0.4;
  s.alpha1 = 0.2;
  s.beta1 = 0.9;
  s.psi1 << 1.5;
  s.xi1 << 0.25;
  const ThetaVector th = theta_from_structural(s);
  CHECK(th.m10 == Catch::Approx(0.2 + 1.5 * 0.7));
  CHECK(th.m11 == Catch::Approx(0.9 + 1.5 * -0.4 + 0.25 * (0.7 - 0.4)));
}

TEST_CASE("both ground-truth routes agree on random specs") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const LsemSpec s = random_spec(static_cast<int>(seed % 4), static_cast<int>((seed / 4) % 4), seed);
    const auto truth = true_effects_from_structural(s);
    const auto via_theta = all_effects(truth.theta_true).as_array();
    const auto direct = truth.effects.as_array();
    for (std::size_t e = 0; e < 5; ++e) CHECK(direct[e] == Catch::Approx(via_theta[e]).epsilon(1e-12).margin(1e-12));
  }
}

TEST_CASE("spec without treatment pathways has identically zero effects") {
  const LsemSpec s = random_spec(2, 3, 77, SpecShape::null_treatment);
  const auto truth = true_effects_from_structural(s);
  for (double v : truth.effects.as_array()) CHECK(v == 0.0);
}

TEST_CASE("counterfactual outcomes of a noiseless unit") {
  LsemSpec s = noiseless(LsemSpec::zeros(0, 1));
  s.alpha1 = 1.0;
  s.beta1 = 2.0;
  s.alpha2 << 0.5;
  s.psi3 << 1.0;
  s.xi3 << 0.5;
  s.alpha3 = 0.1;
  s.beta3 = 0.2;
  s.gamma1 = 0.3;
  s.kappa1 = 0.4;
  s.gamma2 << 0.6;
  s.kappa2 << -0.1;
  // M1(b) = 1 + 2b; M2(a, m) = 0.5 + (1 + 0.5a) m;
  // Y(a, m) = 0.1 + 0.2a + (0.3 + 0.4a) m + (0.6 - 0.1a) M2.
  auto y = [](int a, int b) {
    const double m1 = 1.0 + 2.0 * b;
    const double m2 = 0.5 + (1.0 + 0.5 * a) * m1;
    return 0.1 + 0.2 * a + (0.3 + 0.4 * a) * m1 + (0.6 - 0.1 * a) * m2;
  };
  const auto cf = counterfactual_unit(s, 1, 0);
  CHECK(cf[0] == Catch::Approx(y(0, 0)));
  CHECK(cf[1] == Catch::Approx(y(1, 0)));
  CHECK(cf[2] == Catch::Approx(y(0, 1)));
  CHECK(cf[3] == Catch::Approx(y(1, 1)));

  const auto truth = true_effects_from_structural(s).effects;
  CHECK(truth.gade0 == Catch::Approx(y(1, 0) - y(0, 0)));
  CHECK(truth.gade1 == Catch::Approx(y(1, 1) - y(0, 1)));
  CHECK(truth.gacme0 == Catch::Approx(y(0, 1) - y(0, 0)));
  CHECK(truth.gacme1 == Catch::Approx(y(1, 1) - y(1, 0)));

  const auto oracle = counterfactual_oracle(s, 1000, 3);
  CHECK(oracle.effects.ate == Catch::Approx(y(1, 1) - y(0, 0)));
  CHECK(oracle.std_errors.ate == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("estimates on a large sample converge to the population projection") {
  // Includes upstream confounding: the projection, not the closed form, is
  // the limit in that case.
  const LsemSpec s = random_spec(1, 1, 5);
  const auto fit = itgmm_fit(simulate(s, 400'000, 6));
  const ThetaVector proj = population_projection(s);
  for (int c = 0; c < 6; ++c) {
    CHECK(std::fabs(fit.theta[c] - proj[c]) < 4.5 * std::sqrt(fit.covariance(c, c)));
  }
  CHECK_FALSE(structurally_identified(s));
}

TEST_CASE("simulation is a pure function of seed and unit index") {
  const LsemSpec s = random_spec(2, 2, 9);
  const auto small = simulate(s, 100, 10);
  const auto large = simulate(s, 1000, 10);
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK(small.treatment()[i] == large.treatment()[i]);
    CHECK(small.mediator()[i] == large.mediator()[i]);
    CHECK(small.outcome()[i] == large.outcome()[i]);
  }
  const auto other = simulate(s, 100, 11);
  CHECK(other.outcome()[0] != small.outcome()[0]);

  set_thread_count(1);
  const auto serial = simulate(s, 2 * kChunkRows + 7, 12);
  set_thread_count(4);
  const auto parallel = simulate(s, 2 * kChunkRows + 7, 12);
  set_thread_count(0);
  CHECK(std::equal(serial.outcome().begin(), serial.outcome().end(), parallel.outcome().begin()));
}

TEST_CASE("latent draws reproduce the observed columns through the equations") {
  LsemSpec s = random_spec(2, 3, 13);
  s.noise_m1.scale = 0.0;
  s.noise_m2.scale = 0.0;
  s.noise_y.scale = 0.0;
  const auto latent = simulate_latent(s, 200, 14);
  const auto observed = simulate(s, 200, 14);
  for (std::size_t i = 0; i < 200; ++i) {
    const double t = latent.table.treatment()[i];
    const Eigen::VectorXd m0 = latent.m0.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd m2 = latent.m2.row(static_cast<Eigen::Index>(i)).transpose();
    const double m1 = s.alpha1 + s.beta1 * t + (s.psi1 + t * s.xi1).dot(m0);
    const Eigen::VectorXd m2_expect =
        s.alpha2 + t * s.beta2 + (s.Psi2 + t * s.Xi2) * m0 + (s.psi3 + t * s.xi3) * m1;
    const double y = s.alpha3 + s.beta3 * t + (s.gamma0 + t * s.kappa0).dot(m0) + (s.gamma1 + s.kappa1 * t) * m1 +
                     (s.gamma2 + t * s.kappa2).dot(m2);
    CHECK(latent.table.mediator()[i] == Catch::Approx(m1).margin(1e-12));
    CHECK((m2 - m2_expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(latent.table.outcome()[i] == Catch::Approx(y).margin(1e-12));
    CHECK(observed.outcome()[i] == latent.table.outcome()[i]);
  }
}

TEST_CASE("treatment share follows p_treat") {
  LsemSpec s = LsemSpec::zeros(0, 0);
  s.p_treat = 0.3;
  const auto table = simulate(s, 100'000, 15);
  const double share = static_cast<double>(table.n_treated()) / table.size();
  CHECK(std::fabs(share - 0.3) < 5.0 * std::sqrt(0.3 * 0.7 / 100'000));
}

TEST_CASE("spec JSON round trip and typed parse errors") {
  const LsemSpec s = random_spec(2, 3, 16);
  const LsemSpec back = spec_from_json(nlohmann::json::parse(spec_to_json(s).dump()));
  CHECK(spec_to_json(back) == spec_to_json(s));
  CHECK(theta_from_structural(back).vec() == theta_from_structural(s).vec());

  auto kind_of = [](const std::string& text) {
    try {
      spec_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InternalInconsistency;
  };
  CHECK(kind_of(R"({"k_upstream": 1, "alpha0": [1, 2]})") == ErrorKind::DimensionMismatch);
  CHECK(kind_of(R"({"j_downstream": 1, "k_upstream": 1, "Psi2": [[1, 2]]})") == ErrorKind::DimensionMismatch);
  CHECK(kind_of(R"({"alpha1": "x"})") == ErrorKind::SpecParseError);
  CHECK(kind_of(R"({"noise": {"y": {"family": "cauchy"}}})") == ErrorKind::SpecParseError);
  CHECK(kind_of(R"([1, 2])") == ErrorKind::SpecParseError);
  CHECK(kind_of(R"({"p_treat": 1.0})") == ErrorKind::InvalidArgument);

  const LsemSpec defaults = spec_from_json(nlohmann::json::object());
  CHECK(defaults.k_upstream == 0);
  CHECK(defaults.p_treat == 0.5);
  CHECK(defaults.noise_y.family == NoiseFamily::normal);
  CHECK(defaults.noise_y.scale == 1.0);
}

TEST_CASE("random spec shapes zero the intended blocks") {
  const LsemSpec null = random_spec(2, 2, 17, SpecShape::null_treatment);
  CHECK(null.beta0.isZero());
  CHECK(null.beta1 == 0.0);
  CHECK(null.Xi2.isZero());
  CHECK(null.kappa2.isZero());
  const LsemSpec unconf = random_spec(2, 2, 17, SpecShape::unconfounded);
  CHECK(unconf.gamma0.isZero());
  CHECK(unconf.Psi2.isZero());
  CHECK(unconf.beta0 == random_spec(2, 2, 17).beta0);
}
