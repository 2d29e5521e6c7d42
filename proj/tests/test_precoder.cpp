#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dfrc/precoder.hpp"

using namespace dfrc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using C = Complex;

namespace {

// Instances mirrored in tests/oracles/sdr_step_oracle.py.
struct Instance {
  Scenario scenario;
  ChannelSet channels;
  std::vector<ComplexVector> receivers;
};

Instance instance_a() {
  Instance in;
  in.scenario.num_tx = 4;
  in.scenario.num_rx = 2;
  in.scenario.rx_noise_power = 0.01;
  ComplexMatrix h1(2, 4), h2(2, 4);
  h1 << C(0.8, 0.1), C(-0.3, 0.5), C(0.2, -0.4), C(0.6, 0),
        C(0.1, -0.7), C(0.4, 0.2), C(-0.5, 0.3), C(0.2, 0.9);
  h2 << C(-0.2, 0.6), C(0.7, -0.1), C(0.3, 0.3), C(-0.4, -0.2),
        C(0.5, 0.5), C(-0.1, 0.8), C(0.6, -0.2), C(0.1, 0.1);
  in.channels.H = {h1, h2};
  ComplexVector u1(2), u2(2);
  u1 << C(1, 0), C(0.5, -0.5);
  u2 << C(0.3, 0.4), C(1, 0);
  in.receivers = {u1, u2};
  return in;
}

Instance instance_b() {
  Instance in;
  in.scenario.num_tx = 6;
  in.scenario.num_rx = 1;
  in.scenario.rx_noise_power = 0.05;
  ComplexMatrix h(1, 6);
  h << C(0.3, -0.2), C(-0.6, 0.1), C(0.9, 0.4), C(0.1, -0.8), C(-0.2, 0.2),
       C(0.5, 0.5);
  in.channels.H = {h};
  ComplexVector u(1);
  u << C(1, 0);
  in.receivers = {u};
  return in;
}

Scenario desk_scenario() {
  Scenario s;
  s.user_positions = {{800, 100}, {750, 300}};
  s.target_position = {550, 400};
  return s;
}

}  // namespace

TEST_CASE("dB conversions") {
  CHECK_THAT(db_to_linear(12.0), WithinRel(15.848931924611133, 1e-12));
  CHECK_THAT(linear_to_db(100.0), WithinAbs(20.0, 1e-12));
}

TEST_CASE("desired_beampattern is the inclusive indicator") {
  const auto d = desired_beampattern(36.0, 10.0, AngleGrid::quadrant());
  CHECK(d.values.sum() == 101.0);
  CHECK(d.values(310) == 1.0);
  CHECK(d.values(410) == 1.0);
  CHECK(d.values(309) == 0.0);
  CHECK(d.values(411) == 0.0);
  CHECK_THROWS_AS(desired_beampattern(36.0, 0.0, AngleGrid::quadrant()),
                  ConfigError);
}

TEST_CASE("beampattern of the isotropic covariance is flat") {
  const HermitianMatrix r(ComplexMatrix(ComplexMatrix::Identity(8, 8) / 8.0));
  const RealVector b =
      beampattern_curve(r, AngleGrid::quadrant(1.0).samples(), 0.5);
  CHECK((b.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("SDR step matches the cvxpy reference") {
  // Frozen from tests/oracles/sdr_step_oracle.py (CLARABEL, SCS agree to
  // 1e-6 relative).
  const auto in = instance_a();
  const auto d = desired_beampattern(36.0, 10.0, AngleGrid(0, 90, 1.0));
  const std::pair<double, double> cases[] = {
      {0.0, 1.77497775223}, {6.0, 3.94868875229}, {12.0, 32.6375874823}};
  for (const auto& [gamma_db, expected] : cases) {
    const auto r = solve_sdr_step(in.channels, in.receivers, d, in.scenario,
                                  db_to_linear(gamma_db));
    CHECK_THAT(r.objective, WithinRel(expected, 1e-5));
    const auto mm = beampattern_mismatch(r.covariance, d, 0.5);
    CHECK_THAT(mm.objective, WithinRel(r.objective, 1e-8));
  }
  const auto b = instance_b();
  const auto db = desired_beampattern(60.0, 10.0, AngleGrid(0, 90, 0.5));
  const auto rb = solve_sdr_step(b.channels, b.receivers, db, b.scenario, 10.0);
  CHECK_THAT(rb.objective, WithinRel(7.02711121213, 1e-5));
}

TEST_CASE("SDR step output is feasible") {
  const auto in = instance_a();
  const auto d = desired_beampattern(36.0, 10.0, AngleGrid(0, 90, 1.0));
  const double gamma = db_to_linear(6.0);
  const auto r = solve_sdr_step(in.channels, in.receivers, d, in.scenario, gamma);
  CHECK((r.covariance.matrix().diagonal().real().array() - 0.25).abs().maxCoeff() <
        1e-12);
  ComplexMatrix residual = r.covariance.matrix();
  for (const auto& rk : r.user_covariances) {
    CHECK(min_eigenvalue(rk) >= -1e-9);
    residual -= rk.matrix();
  }
  CHECK(min_eigenvalue(residual) >= -1e-9);
  for (int k = 0; k < 2; ++k) {
    const ComplexVector h = in.channels.H[k].adjoint() * in.receivers[k];
    const double sig = h.dot(r.user_covariances[k].matrix() * h).real();
    const double tot = h.dot(r.covariance.matrix() * h).real();
    const double noise =
        in.scenario.rx_noise_power * in.receivers[k].squaredNorm();
    CHECK((1.0 + 1.0 / gamma) * sig >= (tot + noise) * (1.0 - 1e-7));
  }
}

TEST_CASE("SDR step rejects an unreachable SINR") {
  auto in = instance_a();
  in.scenario.rx_noise_power = 10.0;
  const auto d = desired_beampattern(36.0, 10.0, AngleGrid(0, 90, 1.0));
  CHECK_THROWS_AS(solve_sdr_step(in.channels, in.receivers, d, in.scenario,
                                 db_to_linear(30.0)),
                  InfeasibleQoS);
}

TEST_CASE("communication precoder of a rank-one covariance") {
  const auto in = instance_a();
  ComplexVector v(4);
  v << C(0.2, 0.1), C(-0.3, 0.0), C(0.1, 0.4), C(0.0, -0.2);
  const HermitianMatrix rk(ComplexMatrix(v * v.adjoint()));
  const ComplexMatrix w =
      extract_communication_precoder({rk, rk}, in.channels, in.receivers);
  REQUIRE(w.cols() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK((w.col(k) * w.col(k).adjoint() - rk.matrix()).norm() < 1e-14);
  }
  const HermitianMatrix zero = HermitianMatrix::zero(4);
  CHECK_THROWS_AS(
      extract_communication_precoder({zero, rk}, in.channels, in.receivers),
      RankDeficientUser);
}

TEST_CASE("radar precoder completes the covariance") {
  const HermitianMatrix r(ComplexMatrix(ComplexMatrix::Identity(4, 4) / 4.0));
  ComplexMatrix wc(4, 1);
  wc << 0.3, C(0, 0.2), -0.1, 0.05;
  const ComplexMatrix wr = extract_radar_precoder(r, wc);
  CHECK(wr.rows() == 4);
  CHECK(wr.cols() == 4);
  CHECK((wc * wc.adjoint() + wr * wr.adjoint() - r.matrix()).norm() < 1e-14);

  ComplexMatrix big(4, 1);
  big << 1.0, 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(extract_radar_precoder(r, big), ResidualNotPSD);
}

TEST_CASE("MMSE receivers do not lower the SINR") {
  Scenario s = desk_scenario();
  const auto ch = generate_channels(s, 21);
  const auto sol = design_precoder(s, ch, DesignOptions{}, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto u = random_receivers(2, 2, seed);
    const auto mmse = update_receive_beamformers(
        sol.comm_precoder, sol.radar_precoder, ch, s.rx_noise_power);
    for (int k = 0; k < 2; ++k) {
      const double with_random = sinr(k, sol.comm_precoder, sol.radar_precoder,
                                      u[k], ch.H[k], s.rx_noise_power);
      const double with_mmse = sinr(k, sol.comm_precoder, sol.radar_precoder,
                                    mmse[k], ch.H[k], s.rx_noise_power);
      CHECK(with_mmse >= with_random * (1.0 - 1e-9));
    }
  }
  CHECK_THROWS_AS(update_receive_beamformers(sol.comm_precoder,
                                             sol.radar_precoder, ch, 0.0),
                  ConfigError);
}

TEST_CASE("sinr by hand") {
  // One user, one antenna: |h w|^2 / (|h wr|^2 + noise).
  ComplexMatrix h(1, 2);
  h << 1.0, 0.0;
  ComplexMatrix wc(2, 1), wr(2, 1);
  wc << 2.0, 0.0;
  wr << 1.0, 0.0;
  ComplexVector u(1);
  u << 1.0;
  CHECK_THAT(sinr(0, wc, wr, u, h, 1.0), WithinAbs(4.0 / 2.0, 1e-15));
}

TEST_CASE("design_precoder on the desk scenario") {
  Scenario s = desk_scenario();
  const auto ch = generate_channels(s, 100);
  const auto sol = design_precoder(s, ch, DesignOptions{}, 7);
  CHECK(sol.converged);
  CHECK(sol.num_users() == 2);
  CHECK(sol.radar_precoder.cols() == 8);
  CHECK((sol.covariance.matrix().diagonal().real().array() - 1.0 / 8).abs().maxCoeff() <
        1e-6);
  CHECK((sol.full_precoder() * sol.full_precoder().adjoint() -
         sol.covariance.matrix()).norm() <= 1e-6);
  for (int k = 0; k < 2; ++k) {
    CHECK(linear_to_db(sinr(k, sol, ch, s.rx_noise_power)) >= 12.0 - 0.01);
    CHECK_THAT(sol.receivers[k].norm(), WithinAbs(1.0, 1e-12));
  }
  for (std::size_t i = 1; i < sol.objective_trace.size(); ++i) {
    CHECK(sol.objective_trace[i] <= sol.objective_trace[i - 1] + 1e-6);
  }
  // Same seeds, same answer.
  const auto again = design_precoder(s, ch, DesignOptions{}, 7);
  CHECK((again.full_precoder() - sol.full_precoder()).norm() == 0.0);
}
