/**
 * @file dfrc/precoder.hpp
 * @brief Joint radar-communication transmit precoder design.
 *
 * The transmit covariance R and the per-user covariances R_k are obtained
 * from the semidefinite relaxation of the beampattern-matching problem with
 * fixed receive beamformers; precoders are then extracted from them and the
 * receive beamformers refreshed with the MMSE receiver. The three steps
 * alternate until the relative objective change drops below epsilon.
 */
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dfrc/errors.hpp"
#include "dfrc/numerics.hpp"
#include "dfrc/random.hpp"
#include "dfrc/scene.hpp"
#include "dfrc/sdp.hpp"

namespace dfrc {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

struct DesiredBeampattern {
  RealVector angles;  ///< theta_l, degrees
  RealVector values;  ///< d(theta_l) in {0, 1}
  double beam_center = 0.0;
  double beam_width = 0.0;
};

/// Indicator of |theta_l - center| <= width / 2 (inclusive).
inline DesiredBeampattern desired_beampattern(double beam_center,
                                              double beam_width,
                                              const AngleGrid& grid) {
  if (!(beam_width > 0.0)) throw ConfigError("beam_width must be positive");
  DesiredBeampattern d;
  d.angles = grid.samples();
  d.values = RealVector::Zero(grid.size());
  d.beam_center = beam_center;
  d.beam_width = beam_width;
  for (Index l = 0; l < grid.size(); ++l) {
    if (std::abs(grid[l] - beam_center) <= 0.5 * beam_width + 1e-9) {
      d.values(l) = 1.0;
    }
  }
  return d;
}

/// a^H(theta) R a(theta), clipped at zero.
inline double beampattern(const HermitianMatrix& r, double theta_deg,
                          double spacing) {
  const auto a = steering_vector(theta_deg, static_cast<int>(r.dim()), spacing);
  const double b = a.dot(r.matrix() * a).real();  // dot conjugates the lhs
  return std::max(0.0, b);
}

inline RealVector beampattern_curve(const HermitianMatrix& r,
                                    const RealVector& angles, double spacing) {
  RealVector out(angles.size());
  for (Index l = 0; l < angles.size(); ++l) {
    out(l) = beampattern(r, angles(l), spacing);
  }
  return out;
}

struct PrecoderSolution {
  ComplexMatrix comm_precoder;   ///< W_c, M_T x K
  ComplexMatrix radar_precoder;  ///< W_r, M_T x M_T
  HermitianMatrix covariance;    ///< R
  std::vector<HermitianMatrix> user_covariances;  ///< R_k
  std::vector<ComplexVector> receivers;           ///< u_k, N_R x 1
  double scale = 0.0;  ///< optimal alpha of the last SDR step
  std::vector<double> objective_trace;
  bool converged = false;

  int num_tx() const { return static_cast<int>(comm_precoder.rows()); }
  int num_users() const { return static_cast<int>(comm_precoder.cols()); }

  /// W = [W_c, W_r].
  ComplexMatrix full_precoder() const {
    ComplexMatrix w(comm_precoder.rows(),
                    comm_precoder.cols() + radar_precoder.cols());
    w << comm_precoder, radar_precoder;
    return w;
  }
};

/// SINR of user k (0-based), linear, with receive beamformer u_k.
inline double sinr(int k, const ComplexMatrix& comm_precoder,
                   const ComplexMatrix& radar_precoder,
                   const ComplexVector& receiver, const ComplexMatrix& channel,
                   double noise_power) {
  const double u_norm_sq = receiver.squaredNorm();
  if (u_norm_sq == 0.0) throw DegenerateBeamformer("zero receive beamformer");
  if (channel.cols() != comm_precoder.rows() ||
      channel.rows() != receiver.size()) {
    throw ShapeError("sinr: channel/precoder/receiver shapes disagree");
  }
  const Eigen::RowVectorXcd g = receiver.adjoint() * channel;
  const Eigen::RowVectorXcd gc = g * comm_precoder;
  const Eigen::RowVectorXcd gr = g * radar_precoder;
  const double signal = std::norm(gc(k));
  const double interference =
      gc.squaredNorm() - signal + gr.squaredNorm();
  return signal / (interference + noise_power * u_norm_sq);
}

inline double sinr(int k, const PrecoderSolution& s, const ChannelSet& ch,
                   double noise_power) {
  if (k < 0 || k >= s.num_users() || k >= ch.num_users()) {
    throw ShapeError("sinr: user index out of range");
  }
  return sinr(k, s.comm_precoder, s.radar_precoder,
              s.receivers[static_cast<std::size_t>(k)],
              ch.H[static_cast<std::size_t>(k)], noise_power);
}

struct SdrStepResult {
  HermitianMatrix covariance;
  std::vector<HermitianMatrix> user_covariances;
  double scale = 0.0;
  double objective = 0.0;
  int newton_steps = 0;
};

/// Beampattern-mismatch objective sum_l |alpha d_l - b_l|^2 at the optimal
/// alpha = sum d b / sum d^2, with b_l = a^H(theta_l) R a(theta_l).
struct MismatchValue {
  double objective = 0.0;
  double scale = 0.0;
};

inline MismatchValue beampattern_mismatch(const HermitianMatrix& r,
                                          const DesiredBeampattern& d,
                                          double spacing) {
  const RealVector b = beampattern_curve(r, d.angles, spacing);
  const double dd = d.values.squaredNorm();
  MismatchValue v;
  v.scale = dd > 0.0 ? d.values.dot(b) / dd : 0.0;
  v.objective = (v.scale * d.values - b).squaredNorm();
  return v;
}

struct SdrOptions {
  double gap_tol_rel = 1e-10;  ///< solver gap relative to max(1, objective)
  double barrier_growth = 50.0;
};

/// One convex step of the alternating scheme: receive beamformers fixed.
///
/// Variables are R (diagonal pinned to P_t / M_T) and R_1..R_K. The QoS
/// constraint is written in the equivalent form
///   u^H H R_k H^H u >= Gamma/(1+Gamma) (u^H H R H^H u + sigma^2 ||u||^2),
/// normalised by P_t ||H^H u||^2, which stays well posed as Gamma -> 0.
inline SdrStepResult solve_sdr_step(const ChannelSet& channels,
                                    const std::vector<ComplexVector>& receivers,
                                    const DesiredBeampattern& desired,
                                    const Scenario& scenario, double gamma,
                                    const SdrOptions& opts = {}) {
  const int m = scenario.num_tx;
  const int k_users = channels.num_users();
  if (static_cast<int>(receivers.size()) != k_users) {
    throw ShapeError("solve_sdr_step: one receive beamformer per user required");
  }
  const double p_per_antenna = scenario.tx_power / m;

  sdp::Problem prob;
  prob.blocks.push_back(sdp::HermitianParameterization::pinned_diagonal(
      RealVector::Constant(m, p_per_antenna)));
  for (int k = 0; k < k_users; ++k) {
    prob.blocks.push_back(sdp::HermitianParameterization::free(m));
  }
  const int n = prob.num_params();
  const int n_r = prob.blocks[0].size();

  // R >= 0, R - sum R_k >= 0, R_k >= 0.
  prob.lmis.push_back({{{0, 1.0}}, {}});
  sdp::Lmi residual{{{0, 1.0}}, {}};
  for (int k = 0; k < k_users; ++k) residual.terms.push_back({k + 1, -1.0});
  prob.lmis.push_back(residual);
  for (int k = 0; k < k_users; ++k) prob.lmis.push_back({{{k + 1, 1.0}}, {}});

  const double ratio = gamma / (1.0 + gamma);
  for (int k = 0; k < k_users; ++k) {
    const auto& h_k = channels.H[static_cast<std::size_t>(k)];
    const auto& u_k = receivers[static_cast<std::size_t>(k)];
    if (h_k.rows() != u_k.size() || h_k.cols() != m) {
      throw ShapeError("solve_sdr_step: channel/receiver shape mismatch");
    }
    const double u_sq = u_k.squaredNorm();
    if (u_sq == 0.0) throw DegenerateBeamformer("zero receive beamformer");
    const ComplexVector h = h_k.adjoint() * u_k;  // H_k^H u_k
    const double norm = scenario.tx_power * h.squaredNorm();
    if (!(norm > 0.0)) {
      throw InfeasibleQoS("user " + std::to_string(k + 1) +
                          " has no effective channel");
    }
    const ComplexMatrix hh = h * h.adjoint();
    sdp::AffineInequality ineq;
    ineq.coefficients = RealVector::Zero(n);
    ineq.coefficients.segment(prob.block_offset(k + 1), prob.blocks[k + 1].size()) =
        prob.blocks[k + 1].functional(hh) / norm;
    ineq.coefficients.head(n_r) -= ratio * prob.blocks[0].functional(hh) / norm;
    ineq.constant = -ratio *
                    (prob.blocks[0].offset_functional(hh) +
                     scenario.rx_noise_power * u_sq) /
                    norm;
    prob.inequalities.push_back(std::move(ineq));
  }

  // b = G x_R + b0 with G_li = a_l^H B_i a_l; objective ||P b||^2 where P
  // projects out d (alpha eliminated in closed form).
  const Index L = desired.angles.size();
  RealMatrix g(L, n_r);
  RealVector b0(L);
  for (Index l = 0; l < L; ++l) {
    const ComplexVector a = steering_vector(desired.angles(l), m, scenario.spacing);
    const ComplexMatrix aa = a * a.adjoint();  // Re tr(a a^H X) = a^H X a
    g.row(l) = prob.blocks[0].functional(aa).transpose();
    b0(l) = prob.blocks[0].offset_functional(aa);
  }
  const double dd = desired.values.squaredNorm();
  RealMatrix pg = g;
  RealVector pb0 = b0;
  if (dd > 0.0) {
    pg -= desired.values * (desired.values.transpose() * g) / dd;
    pb0 -= desired.values * (desired.values.dot(b0) / dd);
  }
  prob.quadratic = RealMatrix::Zero(n, n);
  prob.quadratic.topLeftCorner(n_r, n_r) = 2.0 * pg.transpose() * pg;
  prob.linear = RealVector::Zero(n);
  prob.linear.head(n_r) = 2.0 * pg.transpose() * pb0;
  prob.constant = pb0.squaredNorm();

  // Start: R = (P_t / M_T) I, R_k = R / (2K).
  RealVector start = RealVector::Zero(n);
  for (int k = 0; k < k_users; ++k) {
    start.segment(prob.block_offset(k + 1), m).setConstant(
        p_per_antenna / (2.0 * k_users));
  }

  sdp::Options so;
  so.gap_tol = opts.gap_tol_rel * std::max(1.0, prob.objective(start));
  so.barrier_growth = opts.barrier_growth;
  const auto res = sdp::solve(prob, start, so);
  if (res.status == sdp::Status::kInfeasible) {
    throw InfeasibleQoS("SINR threshold " +
                        std::to_string(linear_to_db(gamma)) +
                        " dB infeasible for this channel draw");
  }
  if (res.status != sdp::Status::kOptimal) {
    throw SolverError("SDR step did not converge");
  }

  SdrStepResult out;
  out.covariance = HermitianMatrix(prob.block_value(0, res.x));
  for (int k = 0; k < k_users; ++k) {
    out.user_covariances.emplace_back(prob.block_value(k + 1, res.x));
  }
  const auto mm = beampattern_mismatch(out.covariance, desired, scenario.spacing);
  out.scale = mm.scale;
  out.objective = res.objective;
  out.newton_steps = res.newton_steps;
  return out;
}

/// Column k: (u^H H R_k H^H u)^(-1/2) R_k H^H u.
inline ComplexMatrix extract_communication_precoder(
    const std::vector<HermitianMatrix>& user_covariances,
    const ChannelSet& channels, const std::vector<ComplexVector>& receivers) {
  const auto k_users = user_covariances.size();
  if (channels.H.size() != k_users || receivers.size() != k_users ||
      k_users == 0) {
    throw ShapeError("extract_communication_precoder: inconsistent user count");
  }
  const Index m = user_covariances.front().dim();
  ComplexMatrix wc(m, static_cast<Index>(k_users));
  for (std::size_t k = 0; k < k_users; ++k) {
    const ComplexVector h = channels.H[k].adjoint() * receivers[k];
    const ComplexVector rh = user_covariances[k].matrix() * h;
    const double q = h.dot(rh).real();
    const double scale = user_covariances[k].matrix().cwiseAbs().maxCoeff() *
                         h.squaredNorm();
    if (!(q > 1e-14 * scale) || !(q > 0.0)) {
      throw RankDeficientUser("user " + std::to_string(k + 1) +
                              " receives no usable power");
    }
    wc.col(static_cast<Index>(k)) = rh / std::sqrt(q);
  }
  return wc;
}

/// W_r = psd_sqrt(R - W_c W_c^H).
inline ComplexMatrix extract_radar_precoder(const HermitianMatrix& r,
                                            const ComplexMatrix& comm_precoder) {
  if (comm_precoder.rows() != r.dim()) {
    throw ShapeError("extract_radar_precoder: shape mismatch");
  }
  const HermitianMatrix residual(
      ComplexMatrix(r.matrix() - comm_precoder * comm_precoder.adjoint()));
  const RealVector ev = eigenvalues(r);
  const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  try {
    return psd_sqrt(residual, scale);
  } catch (const NotPositiveSemidefinite& e) {
    throw ResidualNotPSD(std::string("R - W_c W_c^H: ") + e.what());
  }
}

/// MMSE receivers u_k = (H_k (sum_{i != k} w_i w_i^H) H_k^H + sigma^2 I)^-1 H_k w_k
/// over all columns w_i of W = [W_c, W_r].
inline std::vector<ComplexVector> update_receive_beamformers(
    const ComplexMatrix& comm_precoder, const ComplexMatrix& radar_precoder,
    const ChannelSet& channels, double noise_power) {
  if (!(noise_power > 0.0)) {
    throw ConfigError("MMSE update requires positive receiver noise power");
  }
  ComplexMatrix w(comm_precoder.rows(),
                  comm_precoder.cols() + radar_precoder.cols());
  w << comm_precoder, radar_precoder;
  std::vector<ComplexVector> out;
  for (int k = 0; k < channels.num_users(); ++k) {
    const auto& h = channels.H[static_cast<std::size_t>(k)];
    const ComplexMatrix hw = h * w;
    ComplexMatrix cov = hw * hw.adjoint();
    cov -= hw.col(k) * hw.col(k).adjoint();
    cov += noise_power * ComplexMatrix::Identity(h.rows(), h.rows());
    out.push_back(cov.ldlt().solve(hw.col(k)));
  }
  return out;
}

inline std::vector<ComplexVector> update_receive_beamformers(
    const PrecoderSolution& s, const ChannelSet& channels, double noise_power) {
  return update_receive_beamformers(s.comm_precoder, s.radar_precoder,
                                    channels, noise_power);
}

struct DesignOptions {
  double gamma_db = 12.0;
  double epsilon = 0.01;
  int max_iters = 20;
  double beam_width = 10.0;
  double angle_step = 0.1;
  SdrOptions sdr;
};

inline std::vector<ComplexVector> random_receivers(int k_users, int n_rx,
                                                   std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<ComplexVector> out;
  for (int k = 0; k < k_users; ++k) {
    ComplexVector u(n_rx);
    for (int i = 0; i < n_rx; ++i) u(i) = complex_gaussian(rng, 1.0);
    out.push_back(u / u.norm());
  }
  return out;
}

/// Alternating optimisation: SDR step -> precoder extraction -> MMSE update,
/// until |phi_l - phi_{l-1}| <= epsilon |phi_l| or max_iters.
inline PrecoderSolution design_precoder(const Scenario& scenario,
                                        const ChannelSet& channels,
                                        const DesignOptions& opts,
                                        std::uint64_t seed) {
  scenario.validate();
  if (channels.num_users() != scenario.num_users()) {
    throw ShapeError("design_precoder: channel count differs from user count");
  }
  const double gamma = db_to_linear(opts.gamma_db);
  const auto grid = AngleGrid::quadrant(opts.angle_step);
  const auto desired =
      desired_beampattern(scenario.target_angle(), opts.beam_width, grid);

  auto receivers = random_receivers(scenario.num_users(), scenario.num_rx, seed);
  std::optional<PrecoderSolution> best;
  std::vector<double> trace;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    SdrStepResult step;
    try {
      step = solve_sdr_step(channels, receivers, desired, scenario, gamma,
                            opts.sdr);
    } catch (const Error&) {
      if (!best) throw;
      break;  // keep the last good iterate, flagged non-converged
    }
    trace.push_back(step.objective);

    PrecoderSolution s;
    s.comm_precoder =
        extract_communication_precoder(step.user_covariances, channels, receivers);
    s.radar_precoder = extract_radar_precoder(step.covariance, s.comm_precoder);
    s.covariance = step.covariance;
    s.user_covariances = step.user_covariances;
    s.scale = step.scale;
    receivers = update_receive_beamformers(s, channels, scenario.rx_noise_power);
    for (auto& u : receivers) u /= u.norm();
    s.receivers = receivers;
    s.objective_trace = trace;

    const auto n = trace.size();
    if (n >= 2 && std::abs(trace[n - 1] - trace[n - 2]) <=
                      opts.epsilon * std::abs(trace[n - 1])) {
      s.converged = true;
      return s;
    }
    if (!best || step.objective <= best->objective_trace.back()) best = s;
  }
  best->objective_trace = trace;
  best->converged = false;
  return *best;
}

}  // namespace dfrc
