/**
 * @file dfrc/adversary.hpp
 * @brief The eavesdropping user's attack: noisy precoder observations,
 *        beampattern reconstruction, a grid particle filter and the
 *        outcome classification.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dfrc/errors.hpp"
#include "dfrc/numerics.hpp"
#include "dfrc/precoder.hpp"
#include "dfrc/random.hpp"
#include "dfrc/scene.hpp"

namespace dfrc {

struct PrecoderObservation {
  ComplexMatrix W_tilde;     ///< [W_c + N_c, W_r + N_r]
  double noise_power = 0.0;  ///< per-entry variance, watts
  int index = 0;
};

/// Additive CN(0, sigma_sq) noise on every entry of [W_c, W_r]. The noise
/// stream is keyed by (seed, index).
inline PrecoderObservation observe_precoder(const PrecoderSolution& sol,
                                            double sigma_sq,
                                            std::uint64_t seed, int index) {
  if (!(sigma_sq >= 0.0)) throw ConfigError("observation noise must be >= 0");
  PrecoderObservation obs;
  obs.W_tilde = sol.full_precoder();
  obs.noise_power = sigma_sq;
  obs.index = index;
  if (sigma_sq > 0.0) {
    Rng rng = make_rng(derive_seed(seed, Stream::kObservation,
                                   static_cast<std::uint64_t>(index)));
    for (Index c = 0; c < obs.W_tilde.cols(); ++c) {
      for (Index r = 0; r < obs.W_tilde.rows(); ++r) {
        obs.W_tilde(r, c) += complex_gaussian(rng, sigma_sq);
      }
    }
  }
  return obs;
}

struct CellLikelihoodTable {
  RealVector beampattern;  ///< B_En >= 0 per cell
  RealVector likelihood;   ///< 1 - exp(-B_En)

  int size() const { return static_cast<int>(likelihood.size()); }

  static CellLikelihoodTable from_beampattern(const RealVector& b) {
    CellLikelihoodTable t;
    t.beampattern = b.cwiseMax(0.0);
    t.likelihood = 1.0 - (-t.beampattern.array()).exp();
    return t;
  }
};

/// Angle-grid sample index nearest to each cell's midpoint angle.
inline std::vector<Index> cell_angle_indices(const GridWorld& grid,
                                             const AngleGrid& angles) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  for (const auto& c : grid.cells()) out.push_back(angles.nearest(c.angle));
  return out;
}

/// R~ = W~ W~^H evaluated at the nearest angle sample of every cell.
inline CellLikelihoodTable reconstruct_beampattern(
    const PrecoderObservation& obs, const GridWorld& grid,
    const AngleGrid& angles, double spacing) {
  const ComplexMatrix r = obs.W_tilde * obs.W_tilde.adjoint();
  const int m = static_cast<int>(r.rows());
  const auto idx = cell_angle_indices(grid, angles);
  RealVector b(grid.size());
  for (int n = 0; n < grid.size(); ++n) {
    const auto a = steering_vector(angles[idx[static_cast<std::size_t>(n)]], m,
                                   spacing);
    b(n) = a.dot(r * a).real();
  }
  return CellLikelihoodTable::from_beampattern(b);
}

struct ParticleSet {
  std::vector<Point> positions;
  RealVector weights;
  int generation = 0;

  int size() const { return static_cast<int>(positions.size()); }
};

inline ParticleSet init_particles(const GridWorld& grid, int count,
                                  std::uint64_t seed) {
  if (count < 1) throw ConfigError("particle count must be >= 1");
  Rng rng = make_rng(seed);
  ParticleSet ps;
  ps.positions.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    ps.positions.push_back({uniform(rng, 0.0, grid.area().width),
                            uniform(rng, 0.0, grid.area().height)});
  }
  ps.weights = RealVector::Constant(count, 1.0 / count);
  return ps;
}

/// Multiply each weight by its cell's likelihood and renormalize.
inline ParticleSet update_weights(ParticleSet ps,
                                  const CellLikelihoodTable& table,
                                  const GridWorld& grid) {
  if (table.size() != grid.size()) {
    throw ShapeError("likelihood table does not match the grid");
  }
  for (int i = 0; i < ps.size(); ++i) {
    const int n = grid.cell_index(ps.positions[static_cast<std::size_t>(i)]);
    ps.weights(i) *= table.likelihood(n);
  }
  const double total = ps.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateLikelihood("every particle sits in a zero-likelihood cell");
  }
  ps.weights /= total;
  ++ps.generation;
  return ps;
}

/// How resident particle weights are pooled into a per-cell draw mass.
enum class CellMass { kSum, kAverage };

inline std::string to_string(CellMass m) {
  return m == CellMass::kSum ? "sum" : "average";
}

inline CellMass cell_mass_from_string(const std::string& s) {
  if (s == "sum") return CellMass::kSum;
  if (s == "average") return CellMass::kAverage;
  throw ConfigError("unknown cell mass mode '" + s + "'");
}

inline RealVector cell_masses(const ParticleSet& ps, const GridWorld& grid,
                              CellMass mode) {
  RealVector mass = RealVector::Zero(grid.size());
  Eigen::VectorXi count = Eigen::VectorXi::Zero(grid.size());
  for (int i = 0; i < ps.size(); ++i) {
    const int n = grid.cell_index(ps.positions[static_cast<std::size_t>(i)]);
    mass(n) += ps.weights(i);
    ++count(n);
  }
  if (mode == CellMass::kAverage) {
    for (int n = 0; n < grid.size(); ++n) {
      if (count(n) > 0) mass(n) /= count(n);
    }
  }
  return mass;
}

/// Multinomial draw of cells from the pooled masses, then a uniform point
/// inside each drawn cell. Weights are reset to 1/M.
inline ParticleSet resample(const ParticleSet& ps, const GridWorld& grid,
                            std::uint64_t seed,
                            CellMass mode = CellMass::kSum) {
  const RealVector mass = cell_masses(ps, grid, mode);
  if (!(mass.sum() > 0.0)) {
    throw DegenerateLikelihood("all cell masses are zero");
  }
  Rng rng = make_rng(seed);
  std::discrete_distribution<int> pick(mass.data(), mass.data() + mass.size());
  ParticleSet out;
  out.generation = ps.generation;
  out.positions.reserve(ps.positions.size());
  for (int i = 0; i < ps.size(); ++i) {
    out.positions.push_back(grid.uniform_point_in_cell(pick(rng), rng));
  }
  out.weights = RealVector::Constant(ps.size(), 1.0 / ps.size());
  return out;
}

struct FilterOptions {
  CellMass cell_mass = CellMass::kSum;
  double spacing = 0.5;
};

/// Particle positions at t = 0 and after the last step.
struct FilterTrace {
  ParticleSet initial;
  ParticleSet final;
};

/// Generic loop: likelihood(t) supplies the table for step t = 1..T.
inline ParticleSet run_filter_loop(
    const GridWorld& grid, int count, int steps, std::uint64_t seed,
    CellMass mode,
    const std::function<CellLikelihoodTable(int)>& likelihood,
    FilterTrace* trace = nullptr) {
  if (steps < 0) throw ConfigError("observation count must be >= 0");
  ParticleSet ps =
      init_particles(grid, count, derive_seed(seed, Stream::kParticleInit));
  if (trace) trace->initial = ps;
  for (int t = 1; t <= steps; ++t) {
    ps = update_weights(std::move(ps), likelihood(t), grid);
    ps = resample(ps, grid,
                  derive_seed(seed, Stream::kResampling,
                              static_cast<std::uint64_t>(t)),
                  mode);
  }
  if (trace) trace->final = ps;
  return ps;
}

inline ParticleSet run_particle_filter(const PrecoderSolution& sol,
                                       const GridWorld& grid,
                                       const AngleGrid& angles, int count,
                                       int steps, double sigma_sq,
                                       std::uint64_t seed,
                                       const FilterOptions& opts = {},
                                       FilterTrace* trace = nullptr) {
  if (!(sigma_sq >= 0.0)) throw ConfigError("observation noise must be >= 0");
  const ComplexMatrix w = sol.full_precoder();
  const auto idx = cell_angle_indices(grid, angles);
  std::vector<ComplexVector> steer;
  steer.reserve(idx.size());
  for (Index l : idx) {
    steer.push_back(steering_vector(angles[l], static_cast<int>(w.rows()),
                                    opts.spacing));
  }
  auto table_at = [&](int t) {
    const auto obs = observe_precoder(sol, sigma_sq, seed, t);
    // a^H W W^H a = ||W^H a||^2
    RealVector b(grid.size());
    for (int n = 0; n < grid.size(); ++n) {
      b(n) = (obs.W_tilde.adjoint() * steer[static_cast<std::size_t>(n)])
                 .squaredNorm();
    }
    return CellLikelihoodTable::from_beampattern(b);
  };
  return run_filter_loop(grid, count, steps, seed, opts.cell_mass, table_at,
                         trace);
}

/// Same filter with one likelihood table reused at every step.
inline ParticleSet run_static_filter(const GridWorld& grid,
                                     const CellLikelihoodTable& table,
                                     int count, int steps, std::uint64_t seed,
                                     CellMass mode = CellMass::kSum) {
  return run_filter_loop(grid, count, steps, seed, mode,
                         [&table](int) { return table; });
}

/// Fraction of particles per cell.
inline RealVector occupancy(const ParticleSet& ps, const GridWorld& grid) {
  RealVector occ = RealVector::Zero(grid.size());
  for (const auto& p : ps.positions) occ(grid.cell_index(p)) += 1.0;
  if (ps.size() > 0) occ /= ps.size();
  return occ;
}

/// Normalized L_n^t * prior_n, computed in the log domain.
inline RealVector exact_cell_posterior(const RealVector& likelihood,
                                       const RealVector& prior, int steps) {
  if (likelihood.size() != prior.size()) {
    throw ShapeError("likelihood and prior sizes differ");
  }
  RealVector logp(likelihood.size());
  double top = -std::numeric_limits<double>::infinity();
  for (Index n = 0; n < likelihood.size(); ++n) {
    if (prior(n) <= 0.0 || (likelihood(n) <= 0.0 && steps > 0)) {
      logp(n) = -std::numeric_limits<double>::infinity();
    } else {
      logp(n) = std::log(prior(n));
      if (steps > 0) logp(n) += steps * std::log(likelihood(n));
    }
    top = std::max(top, logp(n));
  }
  if (!std::isfinite(top)) throw DegenerateLikelihood("posterior has no mass");
  RealVector p = (logp.array() - top).exp();
  return p / p.sum();
}

inline double total_variation(const RealVector& a, const RealVector& b) {
  if (a.size() != b.size()) throw ShapeError("total_variation size mismatch");
  return 0.5 * (a - b).cwiseAbs().sum();
}

enum class Label { kDetection, kFalseAlarm, kMissDetection, kUndetection };

inline constexpr Label kAllLabels[] = {Label::kDetection, Label::kFalseAlarm,
                                       Label::kMissDetection,
                                       Label::kUndetection};

inline std::string to_string(Label l) {
  switch (l) {
    case Label::kDetection: return "Detection";
    case Label::kFalseAlarm: return "FalseAlarm";
    case Label::kMissDetection: return "MissDetection";
    case Label::kUndetection: return "Undetection";
  }
  return "?";
}

inline Label label_from_string(const std::string& s) {
  for (Label l : kAllLabels) {
    if (to_string(l) == s) return l;
  }
  throw ConfigError("unknown label '" + s + "'");
}

inline Label label_for(double confidence, double angle_error,
                       double conf_threshold = 0.9,
                       double angle_threshold = 10.0) {
  const bool confident = confidence >= conf_threshold;
  const bool close = angle_error < angle_threshold;
  if (confident) return close ? Label::kDetection : Label::kFalseAlarm;
  return close ? Label::kMissDetection : Label::kUndetection;
}

struct EstimationOutcome {
  Label label = Label::kUndetection;
  double confidence = 0.0;
  double estimated_angle = 0.0;
  double angle_error = 0.0;
  int cell = -1;  ///< most-occupied cell
};

/// Most-occupied cell (lowest index on ties) decides the estimate.
inline EstimationOutcome classify(const ParticleSet& ps, const GridWorld& grid,
                                  double theta_target,
                                  double conf_threshold = 0.9,
                                  double angle_threshold = 10.0) {
  if (ps.size() == 0) throw ShapeError("classify needs at least one particle");
  std::vector<int> count(static_cast<std::size_t>(grid.size()), 0);
  for (const auto& p : ps.positions) {
    ++count[static_cast<std::size_t>(grid.cell_index(p))];
  }
  const auto best = std::max_element(count.begin(), count.end());
  EstimationOutcome out;
  out.cell = static_cast<int>(best - count.begin());
  out.confidence = static_cast<double>(*best) / ps.size();
  out.estimated_angle = grid.cell(out.cell).angle;
  out.angle_error = std::abs(out.estimated_angle - theta_target);
  out.label = label_for(out.confidence, out.angle_error, conf_threshold,
                        angle_threshold);
  return out;
}

}  // namespace dfrc
