#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qf/kalman.hpp"
#include "qf/models.hpp"
#include "qf/rng.hpp"

using namespace qf;

namespace {

PhaseSpaceModel homodyne_test_model() {
  PhaseSpaceModel m;
  m.n_modes = 1;
  m.S = canonical_symplectic(1);
  m.Omega = 0.3 * RMat::Identity(2, 2);
  m.upsilon = RVec::Zero(2);
  Vec zeta(2);
  zeta << cplx(0.5, 0.1), cplx(-0.3, 0.2);
  m.channels = {{zeta, 0.7, true, Detection::homodyne}};
  m.theta0 = RVec::Zero(2);
  m.theta0 << 0.4, -0.2;
  m.P0 = 1.5 * RMat::Identity(2, 2);
  return m;
}

std::vector<double> pseudo_records(int n, double scale, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = scale * rng.gaussian();
  return out;
}

}  // namespace

TEST_CASE("scalar covariance closed form") {
  // quantum-scale fixed point c/2 is approached exponentially
  const double q0 = (1.0 - 0.5) / (1.0 + 0.5);
  const double q = q0 * std::exp(-1.0);
  CHECK(scalar_riccati_closed_form(1.0, 1.0, 1.0, 1.0) ==
        doctest::Approx(0.5 * (1.0 + q) / (1.0 - q)).epsilon(1e-14));
  CHECK(scalar_riccati_closed_form(1.0, 2.0, 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(scalar_riccati_closed_form(1.0, 2.0, 1.0, 50.0) == doctest::Approx(1.0).epsilon(1e-12));
  // algebraic decay in the commutative limit
  CHECK(scalar_riccati_closed_form(2.0, 0.0, 0.5, 3.0) ==
        doctest::Approx(0.5 / (1.0 + 2.0 * 0.5 * 3.0)).epsilon(1e-14));

  CHECK_THROWS_AS(scalar_riccati_closed_form(0.0, 1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(scalar_riccati_closed_form(1.0, -1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("closed form agrees with a brute-force scalar integration") {
  for (const auto& [eps, c, p0] : std::vector<std::tuple<double, double, double>>{
           {1.0, 1.0, 1.0}, {1.7, 2.2, 0.3}, {0.9, 0.0, 2.0}}) {
    const double dt = 1e-6;
    double p = p0;
    for (int k = 0; k < 1000000; ++k) p += dt * eps * (0.25 * c * c - p * p);
    CHECK(p == doctest::Approx(scalar_riccati_closed_form(eps, c, p0, 1.0)).epsilon(1e-5));
  }
}

TEST_CASE("covariance flow: fixed points and closed-form marches") {
  // fully quantum damped mode: P = I is stationary
  const PhaseSpaceModel quantum =
      open_oscillator(1.0, 0.0, 2.0, RVec::Zero(2), RMat::Identity(2, 2));
  const DriftData dq = build_drift_data(quantum);
  CHECK(riccati_rhs(RMat::Identity(2, 2), dq).norm() <= 1e-13);
  RMat P = quantum.P0;
  for (int k = 0; k < 100; ++k) P = riccati_step(P, dq, 1e-2);
  CHECK((P - RMat::Identity(2, 2)).norm() <= 1e-12);

  // classical limit: P = I / (1 + t)
  const PhaseSpaceModel classical =
      open_oscillator(1.0, 0.0, 0.0, RVec::Zero(2), RMat::Identity(2, 2));
  const DriftData dc = build_drift_data(classical);
  P = classical.P0;
  const int n = 2000;
  for (int k = 0; k < n; ++k) P = riccati_step(P, dc, 2.0 / n);
  CHECK((P - RMat::Identity(2, 2) / 3.0).norm() <= 1e-8);

  // amplifying mode relaxes onto the same fixed point from above
  const PhaseSpaceModel unstable =
      open_oscillator(1.0, 0.0, -2.0, RVec::Zero(2), 4.0 * RMat::Identity(2, 2));
  const DriftData du = build_drift_data(unstable);
  P = unstable.P0;
  const double dt = 1e-3;
  for (int k = 0; k < 6000; ++k) {
    P = riccati_step(P, du, dt);
    const double p_ref = scalar_riccati_closed_form(1.0, 2.0, 4.0, (k + 1) * dt);
    REQUIRE((P - p_ref * RMat::Identity(2, 2)).norm() <= 1e-7);
  }
  CHECK((P - RMat::Identity(2, 2)).norm() <= 1e-4);
}

TEST_CASE("innovation and raw record forms agree") {
  const PhaseSpaceModel m = homodyne_test_model();
  const DriftData data = build_drift_data(m);
  const double dt = 1e-3;
  const auto noise = pseudo_records(200, std::sqrt(0.7 * dt), 77);

  GaussianPosterior a{m.theta0, m.P0, 0.0, 0.0};
  GaussianPosterior b{m.theta0, m.P0, 0.0, 0.0};
  for (int k = 0; k < 200; ++k) {
    const std::vector<double> dY = {noise[k]};
    kalman_step_homodyne(a, data, dY, dt);
    kalman_step_homodyne_raw(b, data, dY, dt);
  }
  CHECK((a.theta - b.theta).norm() <= 1e-10 * std::max(1.0, a.theta.norm()));
  CHECK((a.P - b.P).norm() == 0.0);  // identical Riccati call sequence
  CHECK(a.log_rho == doctest::Approx(b.log_rho).epsilon(1e-12));
}

TEST_CASE("posterior mean is affine in the record and the start") {
  const PhaseSpaceModel m = homodyne_test_model();
  const DriftData data = build_drift_data(m);
  const double dt = 1e-3;
  const auto noise = pseudo_records(150, std::sqrt(0.7 * dt), 11);

  auto run = [&](const RVec& theta0, double record_scale) {
    GaussianPosterior post{theta0, m.P0, 0.0, 0.0};
    for (int k = 0; k < 150; ++k) {
      const std::vector<double> dY = {record_scale * noise[k]};
      kalman_step_homodyne(post, data, dY, dt);
    }
    return post;
  };

  const GaussianPosterior zero = run(m.theta0, 0.0);
  const GaussianPosterior one = run(m.theta0, 1.0);
  const GaussianPosterior two = run(m.theta0, 2.0);
  // doubling the centered record doubles the centered mean
  const RVec centered_one = one.theta - zero.theta;
  const RVec centered_two = two.theta - zero.theta;
  CHECK((centered_two - 2.0 * centered_one).norm() <= 1e-10);

  // affinity in theta0 at a fixed record
  RVec shifted(2);
  shifted << -1.0, 0.7;
  const GaussianPosterior from_shifted = run(shifted, 1.0);
  RVec mid = 0.5 * (m.theta0 + shifted);
  const GaussianPosterior from_mid = run(mid, 1.0);
  CHECK((from_mid.theta - 0.5 * (one.theta + from_shifted.theta)).norm() <= 1e-12);

  // covariance never depends on the record
  CHECK((one.P - zero.P).norm() == 0.0);
  CHECK((two.P - zero.P).norm() == 0.0);
}

TEST_CASE("admissibility is preserved and its loss aborts") {
  const PhaseSpaceModel m = open_oscillator(1.0, 0.3, 2.0, RVec::Zero(2),
                                            2.0 * RMat::Identity(2, 2));
  const DriftData data = build_drift_data(m);
  RMat P = m.P0;
  for (int k = 0; k < 2000; ++k) {
    P = riccati_step(P, data, 1e-3);
    REQUIRE(admissibility_min_eig(P, m.S) >= -1e-8);
  }

  // a sub-Heisenberg covariance is rejected
  const RMat bad = 0.1 * RMat::Identity(2, 2);
  CHECK(admissibility_min_eig(bad, m.S) < -0.5);
  CHECK_THROWS_WITH_AS(riccati_step(bad, data, 1e-3), doctest::Contains("admissibility"),
                       std::runtime_error);
}

TEST_CASE("record-free transport is a semigroup") {
  const PhaseSpaceModel m = open_oscillator(1.0, 0.7, 2.0, RVec::Zero(2), RMat::Identity(2, 2));
  const DriftData data = build_drift_data(m);

  const RMat full = transport_propagator(data, 0.0, 0.8);
  const RMat late = transport_propagator(data, 0.3, 0.8);
  const RMat early = transport_propagator(data, 0.0, 0.3);
  CHECK((full - late * early).norm() <= 1e-10);
  CHECK((transport_propagator(data, 0.5, 0.5) - RMat::Identity(2, 2)).norm() <= 1e-14);
  CHECK_THROWS_AS(transport_propagator(data, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("unconditional moments: endpoints and structure") {
  const PhaseSpaceModel m = homodyne_test_model();
  const DriftData data = build_drift_data(m);

  const PriorMoments at_zero = prior_moments(data, m.theta0, m.P0, 0.0);
  CHECK((at_zero.mean - m.theta0).norm() <= 1e-14);
  CHECK((at_zero.cov - m.P0).norm() <= 1e-14);
  CHECK_THROWS_AS(prior_moments(data, m.theta0, m.P0, -1.0), std::invalid_argument);

  // without channels the law just transports: mean rotates, cov is congruent
  PhaseSpaceModel closed = m;
  closed.channels.clear();
  const DriftData dclosed = build_drift_data(closed);
  const double t = 1.3;
  const PriorMoments pm = prior_moments(dclosed, m.theta0, m.P0, t);
  const RMat T = transport_propagator(dclosed, 0.0, t);
  CHECK((pm.mean - T * m.theta0).norm() <= 1e-12);
  CHECK((pm.cov - T * m.P0 * T.transpose()).norm() <= 1e-12);
}

TEST_CASE("tower property: conditional moments average to the prior law") {
  const PhaseSpaceModel m = open_oscillator(1.0, 0.4, 2.0, RVec::Zero(2),
                                            RMat::Identity(2, 2));
  const DriftData data = build_drift_data(m);
  const double dt = 2e-3, t1 = 0.2;
  const int n_steps = 100, n_traj = 4000;
  const double Lambda = m.channels[0].weight;
  const Vec zeta = m.channels[0].zeta;

  RVec mean_sum = RVec::Zero(2);
  RMat outer_sum = RMat::Zero(2, 2);
  RMat p_final;
  std::vector<RVec> means(n_traj);
  for (int traj = 0; traj < n_traj; ++traj) {
    CounterRng rng(stable_hash(404, traj));
    GaussianPosterior post{m.theta0, m.P0, 0.0, 0.0};
    for (int k = 0; k < n_steps; ++k) {
      const cplx pred = zeta.transpose() * post.theta.cast<cplx>();
      const cplx noise = cplx(rng.gaussian(), rng.gaussian()) *
                         std::sqrt(Lambda * dt / 2.0);
      const std::vector<cplx> dZ = {Lambda * pred * dt + noise};
      kalman_step_heterodyne(post, data, dZ, dt);
    }
    means[traj] = post.theta;
    mean_sum += post.theta;
    p_final = post.P;  // identical across trajectories
  }
  const RVec mc_mean = mean_sum / n_traj;
  for (int traj = 0; traj < n_traj; ++traj) {
    const RVec d = means[traj] - mc_mean;
    outer_sum += d * d.transpose();
  }
  const RMat mean_cov = outer_sum / (n_traj - 1);

  const PriorMoments pm = prior_moments(data, m.theta0, m.P0, t1);
  // E[theta_hat] = prior mean; Cov(theta_hat) + P = prior covariance
  for (int i = 0; i < 2; ++i) {
    const double se = std::sqrt(mean_cov(i, i) / n_traj);
    CHECK(std::abs(mc_mean[i] - pm.mean[i]) <= 4.0 * se + 1e-3);
  }
  CHECK(((mean_cov + p_final) - pm.cov).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("stationary covariance closed form") {
  CHECK((stationary_covariance(open_oscillator(2.0, 0.0, 3.0, RVec::Zero(2),
                                               2.0 * RMat::Identity(2, 2))) -
         1.5 * RMat::Identity(2, 2))
            .norm() <= 1e-10);
  // a scalar rotation commutes, so the fixed point is unchanged
  CHECK((stationary_covariance(open_oscillator(2.0, 0.7, 3.0, RVec::Zero(2),
                                               2.0 * RMat::Identity(2, 2))) -
         1.5 * RMat::Identity(2, 2))
            .norm() <= 1e-10);
  CHECK((stationary_covariance(open_oscillator(1.0, 0.0, -2.0, RVec::Zero(2),
                                               4.0 * RMat::Identity(2, 2))) -
         RMat::Identity(2, 2))
            .norm() <= 1e-10);

  // hidden dissipation is refused
  PhaseSpaceModel hidden = open_oscillator(1.0, 0.0, 2.0, RVec::Zero(2), RMat::Identity(2, 2));
  hidden.channels[0].observed = false;
  CHECK_THROWS_WITH_AS(stationary_covariance(hidden), doctest::Contains("observed"),
                       std::invalid_argument);

  // anisotropic commutation obstruction is refused, not guessed around
  PhaseSpaceModel skew;
  skew.n_modes = 1;
  skew.S = canonical_symplectic(1);
  skew.Omega = RMat::Zero(2, 2);
  skew.Omega(0, 0) = 0.5;
  skew.Omega(1, 1) = 0.3;
  skew.upsilon = RVec::Zero(2);
  Vec z1 = Vec::Zero(2), z2 = Vec::Zero(2);
  z1(0) = 1.0;
  z2(1) = 0.6;
  skew.channels = {{z1, 1.0, true, Detection::heterodyne},
                   {z2, 1.0, true, Detection::heterodyne}};
  skew.theta0 = RVec::Zero(2);
  skew.P0 = 2.0 * RMat::Identity(2, 2);
  CHECK_THROWS_WITH_AS(stationary_covariance(skew), doctest::Contains("Omega S X"),
                       std::invalid_argument);
}

TEST_CASE("stationary gains: damped mode ignores the record, amplified does not") {
  const RVec t0 = RVec::Zero(2);
  const RMat p0 = RMat::Identity(2, 2);
  CHECK(std::abs(stationary_gain_coefficient(open_oscillator(1.0, 0.0, 2.0, t0, p0))) <= 1e-12);
  CHECK(stationary_gain_coefficient(open_oscillator(1.0, 0.0, -2.0, t0, 4.0 * p0)) ==
        doctest::Approx(2.0).epsilon(1e-12));
  // half the gap |c| - c, at a different rate
  CHECK(stationary_gain_coefficient(open_oscillator(0.7, 0.0, -2.0, t0, 4.0 * p0)) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("collapse rate values and refusals") {
  const RVec t0 = RVec::Zero(2);
  const RMat p0 = 2.0 * RMat::Identity(2, 2);
  CHECK(collapse_rate(open_oscillator(1.0, 0.0, -2.0, t0, 2.0 * p0)) == doctest::Approx(2.0));
  CHECK(collapse_rate(open_oscillator(2.0, 0.5, 1.0, t0, p0)) == doctest::Approx(2.0));
  CHECK_THROWS_WITH_AS(collapse_rate(open_oscillator(1.0, 0.0, 0.0, t0, p0)),
                       doctest::Contains("classical limit"), std::invalid_argument);
}

TEST_CASE("gain identities and the raw-form coordinate matrices") {
  PhaseSpaceModel m;
  m.n_modes = 2;
  m.S = canonical_symplectic(2);
  m.Omega = RMat::Zero(4, 4);
  m.Omega << 0.4, 0.1, 0.0, 0.2, 0.1, 0.3, 0.1, 0.0, 0.0, 0.1, 0.5, 0.0, 0.2, 0.0, 0.0, 0.1;
  m.upsilon = RVec::Zero(4);
  auto make_zeta = [](std::uint64_t seed) {
    CounterRng rng(seed);
    Vec z(4);
    for (int i = 0; i < 4; ++i) z(i) = 0.5 * cplx(rng.gaussian(), rng.gaussian());
    return z;
  };
  m.channels = {{make_zeta(1), 0.8, true, Detection::homodyne},
                {make_zeta(2), 0.5, true, Detection::homodyne},
                {make_zeta(3), 1.2, true, Detection::homodyne},
                {make_zeta(4), 0.4, false, Detection::homodyne}};
  m.theta0 = RVec::Zero(4);
  m.P0 = 3.0 * RMat::Identity(4, 4);
  const DriftData data = build_drift_data(m);

  // g = 2 Re[(P + K0) zeta] decomposes as P (2 Re zeta) + S Im zeta
  RMat P = m.P0;
  P(0, 1) = P(1, 0) = 0.4;
  P(2, 3) = P(3, 2) = -0.3;
  for (const auto& ob : data.observed) {
    const RVec g = homodyne_gain(P, data.K0, ob.zeta);
    const RVec decomposed = P * ob.two_re_zeta + data.S * ob.zeta.imag();
    CHECK((g - decomposed).norm() <= 1e-13);
  }

  // observation reduction assembled from the raw-form pieces
  RMat direct = RMat::Zero(4, 4);
  for (const auto& ob : data.observed) {
    const RVec g = homodyne_gain(P, data.K0, ob.zeta);
    direct += ob.Lambda * g * g.transpose();
  }
  const RMat assembled = P * data.mu_bar * P + P * data.cross.transpose() +
                         data.cross * P + data.S * data.n_im * data.S.transpose();
  CHECK((direct - assembled).norm() <= 1e-12 * std::max(1.0, assembled.norm()));

  // complex detection splits into two real detections at half strength
  const Vec zc = make_zeta(9);
  const double Lam = 0.9;
  const Vec w = heterodyne_gain(P, data.K0, zc);
  const RMat het_red = Lam * 2.0 * (w * w.adjoint()).real();
  const RVec g1 = homodyne_gain(P, data.K0, zc);
  const RVec g2 = homodyne_gain(P, data.K0, (I1 * zc).eval());
  const RMat two_real = 0.5 * Lam * (g1 * g1.transpose() + g2 * g2.transpose());
  CHECK((het_red - two_real).norm() <= 1e-12);
}

TEST_CASE("raw-form noise matrix for a fully observed model") {
  PhaseSpaceModel m = homodyne_test_model();
  const DriftData data = build_drift_data(m);
  const Vec zeta = m.channels[0].zeta;
  const RMat expected = m.channels[0].weight * zeta.real() * zeta.real().transpose();
  CHECK((data.epsilon_tilde - expected).norm() <= 1e-14);
}

TEST_CASE("a blind detector transports the prior") {
  PhaseSpaceModel m;
  m.n_modes = 1;
  m.S = canonical_symplectic(1);
  m.Omega = RMat::Zero(2, 2);
  m.upsilon = RVec::Zero(2);
  m.upsilon << 1.0, -1.0;
  m.channels = {{Vec::Zero(2), 0.8, true, Detection::heterodyne}};
  m.theta0 = RVec::Zero(2);
  m.theta0 << 0.3, 0.1;
  m.P0 = 2.0 * RMat::Identity(2, 2);
  const DriftData data = build_drift_data(m);

  GaussianPosterior post{m.theta0, m.P0, 0.0, 0.0};
  const double dt = 1e-2;
  const std::vector<cplx> dZ = {cplx(0.37, -0.81)};  // arbitrary; must be ignored
  kalman_step_heterodyne(post, data, dZ, dt);

  const RVec expected = m.theta0 + (data.A * m.theta0 - data.Sv) * dt;
  CHECK((post.theta - expected).norm() <= 1e-15);
  CHECK((post.P - m.P0).norm() <= 1e-14);  // A = 0, Q = 0, no reduction
  CHECK(post.log_rho == 0.0);
}

TEST_CASE("one homodyne step by hand") {
  const PhaseSpaceModel m = homodyne_test_model();
  const DriftData data = build_drift_data(m);
  GaussianPosterior post{m.theta0, m.P0, 0.0, 0.0};
  const double dt = 1e-3, dY = 0.042;
  const auto& ob = data.observed[0];

  const double pred = ob.two_re_zeta.dot(m.theta0);
  const RVec g = homodyne_gain(m.P0, data.K0, ob.zeta);
  const RVec expected_theta = m.theta0 + (data.A * m.theta0 - data.Sv) * dt +
                              g * (dY - ob.Lambda * pred * dt);
  const double expected_log = pred * dY - 0.5 * ob.Lambda * pred * pred * dt;

  kalman_step_homodyne(post, data, std::vector<double>{dY}, dt);
  CHECK((post.theta - expected_theta).norm() <= 1e-15);
  CHECK(post.log_rho == doctest::Approx(expected_log).epsilon(1e-14));
  CHECK(post.t == doctest::Approx(dt));
}

TEST_CASE("record count and kind validation") {
  const PhaseSpaceModel m = homodyne_test_model();
  const DriftData data = build_drift_data(m);
  GaussianPosterior post{m.theta0, m.P0, 0.0, 0.0};
  const std::vector<double> two = {0.0, 0.0};
  CHECK_THROWS_AS(kalman_step_homodyne(post, data, two, 1e-3), std::invalid_argument);
  const std::vector<cplx> one = {cplx(0.0, 0.0)};
  CHECK_THROWS_AS(kalman_step_heterodyne(post, data, one, 1e-3), std::invalid_argument);
}
