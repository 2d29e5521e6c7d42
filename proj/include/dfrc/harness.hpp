/**
 * @file dfrc/harness.hpp
 * @brief Experiment configuration, the seeded Monte Carlo driver, outcome
 *        aggregation and result files.
 */
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dfrc/adversary.hpp"
#include "dfrc/errors.hpp"
#include "dfrc/precoder.hpp"
#include "dfrc/random.hpp"
#include "dfrc/scene.hpp"

namespace dfrc {

inline double dbm_to_watts(double dbm) {
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

enum class Placement { kFixed, kRandom };

inline std::string to_string(Placement p) {
  return p == Placement::kFixed ? "fixed" : "random";
}

inline Placement placement_from_string(const std::string& s) {
  if (s == "fixed") return Placement::kFixed;
  if (s == "random") return Placement::kRandom;
  throw ConfigError("unknown placement mode '" + s + "'");
}

struct SweepAxis {
  std::string parameter;
  std::vector<double> values;

  friend bool operator==(const SweepAxis&, const SweepAxis&) = default;
};

/// Names accepted as sweep parameters.
inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names = {
      "T", "M", "M_T", "N_R", "Gamma_dB", "sigma_sq_dBm", "sigma_k_sq_dBm"};
  return names;
}

struct ExperimentConfig {
  // geometry
  double area_width = 1000.0;
  double area_height = 1000.0;
  double cell_size = 100.0;
  Point bs_position{0.0, 0.0};
  Placement placement = Placement::kFixed;
  std::vector<Point> user_positions{{800.0, 100.0}, {750.0, 300.0}};
  int adversary_index = 1;
  Point target_position{550.0, 400.0};
  int num_users = 2;  ///< user count for random placement

  // link
  int num_tx = 8;
  int num_rx = 2;
  double spacing = 0.5;
  double tx_power = 1.0;
  double path_loss_exponent = 3.0;
  double sigma_k_sq_dbm = -100.0;

  // precoder
  double gamma_db = 12.0;
  double beam_width = 10.0;
  double angle_step = 0.1;
  double epsilon = 0.01;
  int max_iters = 20;

  // attack
  double sigma_sq_dbm = -10.0;
  int particles = 200;
  int observations = 300;
  CellMass cell_mass = CellMass::kSum;
  double conf_threshold = 0.9;
  double angle_threshold = 10.0;

  // experiment
  int num_runs = 100;
  std::uint64_t root_seed = 1;
  std::vector<SweepAxis> sweep;

  // output
  std::string output_dir = "results";
  std::string run_name = "experiment";
  bool write_beampattern = true;
  bool write_particles = true;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;

  void validate() const {
    if (num_runs < 1) throw ConfigError("num_runs must be >= 1");
    if (particles < 1) throw ConfigError("M must be >= 1");
    if (observations < 0) throw ConfigError("T must be >= 0");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(angle_step > 0.0) || !(beam_width > 0.0)) {
      throw ConfigError("angle_step and beam_width must be positive");
    }
    if (conf_threshold < 0.0 || conf_threshold > 1.0) {
      throw ConfigError("conf_threshold must lie in [0, 1]");
    }
    if (placement == Placement::kRandom && num_users < 1) {
      throw ConfigError("num_users must be >= 1");
    }
    for (const auto& axis : sweep) {
      bool known = false;
      for (const auto& n : sweep_parameters()) known = known || n == axis.parameter;
      if (!known) throw ConfigError("unknown sweep parameter '" + axis.parameter + "'");
      if (axis.values.empty()) {
        throw ConfigError("sweep axis '" + axis.parameter + "' has no values");
      }
    }
    build_grid(area(), cell_size, bs_position);
  }

  SearchArea area() const { return {area_width, area_height}; }
};

/// Copy of `base` with one sweep parameter overridden.
inline ExperimentConfig with_parameter(ExperimentConfig c,
                                       const std::string& name, double v) {
  const auto as_int = [&](double x) {
    if (x != std::round(x)) {
      throw ConfigError("sweep value for " + name + " must be an integer");
    }
    return static_cast<int>(x);
  };
  if (name == "T") c.observations = as_int(v);
  else if (name == "M") c.particles = as_int(v);
  else if (name == "M_T") c.num_tx = as_int(v);
  else if (name == "N_R") c.num_rx = as_int(v);
  else if (name == "Gamma_dB") c.gamma_db = v;
  else if (name == "sigma_sq_dBm") c.sigma_sq_dbm = v;
  else if (name == "sigma_k_sq_dBm") c.sigma_k_sq_dbm = v;
  else throw ConfigError("unknown sweep parameter '" + name + "'");
  return c;
}

struct SweepPoint {
  std::vector<double> values;  ///< one per axis, in axis order
  ExperimentConfig config;     ///< base config with the values applied
};

/// Cartesian product of the axes; the last axis varies fastest.
inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& base) {
  std::vector<SweepPoint> points{{{}, base}};
  for (const auto& axis : base.sweep) {
    std::vector<SweepPoint> next;
    for (const auto& p : points) {
      for (double v : axis.values) {
        SweepPoint q = p;
        q.values.push_back(v);
        q.config = with_parameter(q.config, axis.parameter, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

inline std::uint64_t run_seed(std::uint64_t root, int run) {
  return derive_seed(root, Stream::kRun, static_cast<std::uint64_t>(run));
}

/// Scenario of one run. Random placement draws users and target per run.
inline Scenario make_scenario(const ExperimentConfig& c, int run) {
  Scenario s;
  s.area = c.area();
  s.bs_position = c.bs_position;
  s.num_tx = c.num_tx;
  s.num_rx = c.num_rx;
  s.spacing = c.spacing;
  s.tx_power = c.tx_power;
  s.rx_noise_power = dbm_to_watts(c.sigma_k_sq_dbm);
  s.path_loss_exponent = c.path_loss_exponent;
  s.adversary_index = c.adversary_index;
  if (c.placement == Placement::kFixed) {
    s.user_positions = c.user_positions;
    s.target_position = c.target_position;
  } else {
    const GridWorld grid = build_grid(c.area(), c.cell_size, c.bs_position);
    Rng rng = make_rng(derive_seed(run_seed(c.root_seed, run),
                                   Stream::kPlacement));
    for (int k = 0; k < c.num_users; ++k) {
      s.user_positions.push_back(random_placement(grid, rng));
    }
    s.target_position = random_placement(grid, rng);
  }
  s.validate();
  return s;
}

inline DesignOptions design_options(const ExperimentConfig& c) {
  DesignOptions o;
  o.gamma_db = c.gamma_db;
  o.epsilon = c.epsilon;
  o.max_iters = c.max_iters;
  o.beam_width = c.beam_width;
  o.angle_step = c.angle_step;
  return o;
}

/// Precoder of one run; everything it needs comes from the run seed.
inline PrecoderSolution design_for_run(const ExperimentConfig& c,
                                       const Scenario& s, int run) {
  const std::uint64_t seed = run_seed(c.root_seed, run);
  const ChannelSet ch = generate_channels(s, derive_seed(seed, Stream::kChannels));
  return design_precoder(s, ch, design_options(c),
                         derive_seed(seed, Stream::kReceiveInit));
}

enum class RunStatus { kOk, kInfeasible, kFailed };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kOk: return "ok";
    case RunStatus::kInfeasible: return "infeasible";
    case RunStatus::kFailed: return "failed";
  }
  return "?";
}

struct RunRecord {
  int point = 0;
  int run = 0;
  RunStatus status = RunStatus::kOk;
  std::string error;  ///< error code when not ok
  double target_angle = 0.0;
  bool converged = false;
  int iterations = 0;
  EstimationOutcome outcome;
};

struct PointStats {
  std::vector<double> values;
  int runs = 0;  ///< runs that produced an estimate
  int infeasible = 0;
  int failed = 0;
  std::map<Label, int> counts;
  double mean_confidence = 0.0;
  double mean_angle_error = 0.0;

  double percentage(Label l) const {
    if (runs == 0) return 0.0;
    const auto it = counts.find(l);
    return 100.0 * (it == counts.end() ? 0 : it->second) / runs;
  }
};

struct AggregateStats {
  ExperimentConfig config;
  std::vector<PointStats> points;
  std::vector<RunRecord> records;  ///< point-major, then run order
};

/// Beampattern and particle traces of run 0 at the first sweep point.
struct ExperimentTraces {
  RealVector angles;
  RealVector true_beampattern;
  RealVector reconstructed_beampattern;
  FilterTrace particles;
  bool available = false;
};

inline PointStats aggregate(const std::vector<RunRecord>& recs,
                            std::vector<double> values) {
  PointStats ps;
  ps.values = std::move(values);
  for (Label l : kAllLabels) ps.counts[l] = 0;
  double conf = 0.0;
  double err = 0.0;
  for (const auto& r : recs) {
    if (r.status == RunStatus::kInfeasible) {
      ++ps.infeasible;
    } else if (r.status == RunStatus::kFailed) {
      ++ps.failed;
    } else {
      ++ps.runs;
      ++ps.counts[r.outcome.label];
      conf += r.outcome.confidence;
      err += r.outcome.angle_error;
    }
  }
  if (ps.runs > 0) {
    ps.mean_confidence = conf / ps.runs;
    ps.mean_angle_error = err / ps.runs;
  }
  return ps;
}

namespace detail {

struct DesignKey {
  int num_tx;
  int num_rx;
  double gamma_db;
  double sigma_k_sq_dbm;

  auto tie() const { return std::tie(num_tx, num_rx, gamma_db, sigma_k_sq_dbm); }
  bool operator<(const DesignKey& o) const { return tie() < o.tie(); }
};

/// All sweep points of one run. Points that share the design inputs reuse
/// one precoder.
inline std::vector<RunRecord> run_one(const std::vector<SweepPoint>& points,
                                      int run, ExperimentTraces* traces) {
  std::map<DesignKey, std::optional<PrecoderSolution>> designs;
  std::map<DesignKey, std::pair<RunStatus, std::string>> design_errors;
  std::vector<RunRecord> out;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const ExperimentConfig& c = points[p].config;
    RunRecord rec;
    rec.point = static_cast<int>(p);
    rec.run = run;
    const Scenario s = make_scenario(c, run);
    rec.target_angle = s.target_angle();
    const DesignKey key{c.num_tx, c.num_rx, c.gamma_db, c.sigma_k_sq_dbm};
    if (!designs.count(key)) {
      try {
        designs[key] = design_for_run(c, s, run);
      } catch (const InfeasibleQoS& e) {
        designs[key] = std::nullopt;
        design_errors[key] = {RunStatus::kInfeasible, e.code()};
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        designs[key] = std::nullopt;
        design_errors[key] = {RunStatus::kFailed, e.code()};
      }
    }
    const auto& sol = designs[key];
    if (!sol) {
      rec.status = design_errors[key].first;
      rec.error = design_errors[key].second;
      out.push_back(rec);
      continue;
    }
    rec.converged = sol->converged;
    rec.iterations = static_cast<int>(sol->objective_trace.size());

    const GridWorld grid = build_grid(c.area(), c.cell_size, c.bs_position);
    const AngleGrid angles = AngleGrid::quadrant(c.angle_step);
    FilterOptions fo;
    fo.cell_mass = c.cell_mass;
    fo.spacing = c.spacing;
    const double sigma_sq = dbm_to_watts(c.sigma_sq_dbm);
    const bool want_trace = traces && p == 0 && run == 0;
    FilterTrace ft;
    try {
      const ParticleSet ps =
          run_particle_filter(*sol, grid, angles, c.particles, c.observations,
                              sigma_sq, run_seed(c.root_seed, run), fo,
                              want_trace ? &ft : nullptr);
      rec.outcome = classify(ps, grid, rec.target_angle, c.conf_threshold,
                             c.angle_threshold);
    } catch (const DegenerateLikelihood& e) {
      rec.status = RunStatus::kFailed;
      rec.error = e.code();
    }
    if (want_trace) {
      traces->angles = angles.samples();
      traces->true_beampattern =
          beampattern_curve(sol->covariance, angles.samples(), c.spacing);
      const auto obs =
          observe_precoder(*sol, sigma_sq, run_seed(c.root_seed, run), 1);
      traces->reconstructed_beampattern = beampattern_curve(
          HermitianMatrix(ComplexMatrix(obs.W_tilde * obs.W_tilde.adjoint())),
          angles.samples(), c.spacing);
      traces->particles = std::move(ft);
      traces->available = rec.status == RunStatus::kOk;
    }
    out.push_back(rec);
  }
  return out;
}

}  // namespace detail

/// Runs are spread over `workers` threads; results are reduced in run order.
inline AggregateStats run_experiment(const ExperimentConfig& config,
                                     int workers = 1,
                                     ExperimentTraces* traces = nullptr) {
  config.validate();
  const auto points = expand_sweep(config);
  for (const auto& p : points) p.config.validate();

  std::vector<std::vector<RunRecord>> per_run(
      static_cast<std::size_t>(config.num_runs));
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto work = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= config.num_runs) return;
      try {
        per_run[static_cast<std::size_t>(r)] = detail::run_one(points, r, traces);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = config.num_runs;
      }
    }
  };
  const int n = std::max(1, std::min(workers, config.num_runs));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  AggregateStats stats;
  stats.config = config;
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<RunRecord> recs;
    for (const auto& run : per_run) recs.push_back(run[p]);
    stats.points.push_back(aggregate(recs, points[p].values));
    stats.records.insert(stats.records.end(), recs.begin(), recs.end());
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Serialization

using Json = nlohmann::ordered_json;

inline Json to_json(const Point& p) { return Json::array({p.x, p.y}); }

inline Point point_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json to_json(const ExperimentConfig& c) {
  Json users = Json::array();
  for (const auto& u : c.user_positions) users.push_back(to_json(u));
  Json sweep = Json::array();
  for (const auto& a : c.sweep) {
    sweep.push_back({{"parameter", a.parameter}, {"values", a.values}});
  }
  return Json{
      {"area_width", c.area_width},
      {"area_height", c.area_height},
      {"cell_size", c.cell_size},
      {"bs_position", to_json(c.bs_position)},
      {"placement", to_string(c.placement)},
      {"user_positions", users},
      {"adversary_index", c.adversary_index},
      {"target_position", to_json(c.target_position)},
      {"num_users", c.num_users},
      {"M_T", c.num_tx},
      {"N_R", c.num_rx},
      {"spacing", c.spacing},
      {"P_t", c.tx_power},
      {"path_loss_exponent", c.path_loss_exponent},
      {"sigma_k_sq_dBm", c.sigma_k_sq_dbm},
      {"Gamma_dB", c.gamma_db},
      {"beam_width", c.beam_width},
      {"angle_step", c.angle_step},
      {"epsilon", c.epsilon},
      {"max_iters", c.max_iters},
      {"sigma_sq_dBm", c.sigma_sq_dbm},
      {"M", c.particles},
      {"T", c.observations},
      {"cell_mass", to_string(c.cell_mass)},
      {"conf_threshold", c.conf_threshold},
      {"angle_threshold", c.angle_threshold},
      {"num_runs", c.num_runs},
      {"root_seed", c.root_seed},
      {"sweep", sweep},
      {"output_dir", c.output_dir},
      {"run_name", c.run_name},
      {"write_beampattern", c.write_beampattern},
      {"write_particles", c.write_particles},
  };
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const Json& v = it.value();
      if (k == "area_width") c.area_width = v.get<double>();
      else if (k == "area_height") c.area_height = v.get<double>();
      else if (k == "cell_size") c.cell_size = v.get<double>();
      else if (k == "bs_position") c.bs_position = point_from_json(v);
      else if (k == "placement") c.placement = placement_from_string(v.get<std::string>());
      else if (k == "user_positions") {
        c.user_positions.clear();
        for (const auto& u : v) c.user_positions.push_back(point_from_json(u));
      }
      else if (k == "adversary_index") c.adversary_index = v.get<int>();
      else if (k == "target_position") c.target_position = point_from_json(v);
      else if (k == "num_users") c.num_users = v.get<int>();
      else if (k == "M_T") c.num_tx = v.get<int>();
      else if (k == "N_R") c.num_rx = v.get<int>();
      else if (k == "spacing") c.spacing = v.get<double>();
      else if (k == "P_t") c.tx_power = v.get<double>();
      else if (k == "path_loss_exponent") c.path_loss_exponent = v.get<double>();
      else if (k == "sigma_k_sq_dBm") c.sigma_k_sq_dbm = v.get<double>();
      else if (k == "Gamma_dB") c.gamma_db = v.get<double>();
      else if (k == "beam_width") c.beam_width = v.get<double>();
      else if (k == "angle_step") c.angle_step = v.get<double>();
      else if (k == "epsilon") c.epsilon = v.get<double>();
      else if (k == "max_iters") c.max_iters = v.get<int>();
      else if (k == "sigma_sq_dBm") c.sigma_sq_dbm = v.get<double>();
      else if (k == "M") c.particles = v.get<int>();
      else if (k == "T") c.observations = v.get<int>();
      else if (k == "cell_mass") c.cell_mass = cell_mass_from_string(v.get<std::string>());
      else if (k == "conf_threshold") c.conf_threshold = v.get<double>();
      else if (k == "angle_threshold") c.angle_threshold = v.get<double>();
      else if (k == "num_runs") c.num_runs = v.get<int>();
      else if (k == "root_seed") c.root_seed = v.get<std::uint64_t>();
      else if (k == "sweep") {
        c.sweep.clear();
        for (const auto& a : v) {
          c.sweep.push_back({a.at("parameter").get<std::string>(),
                             a.at("values").get<std::vector<double>>()});
        }
      }
      else if (k == "output_dir") c.output_dir = v.get<std::string>();
      else if (k == "run_name") c.run_name = v.get<std::string>();
      else if (k == "write_beampattern") c.write_beampattern = v.get<bool>();
      else if (k == "write_particles") c.write_particles = v.get<bool>();
      else throw ConfigError("unknown config key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot read " + path.string());
  try {
    return config_from_json(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline Json to_json(const EstimationOutcome& o) {
  return Json{{"label", to_string(o.label)},
              {"confidence", o.confidence},
              {"estimated_angle", o.estimated_angle},
              {"angle_error", o.angle_error},
              {"cell", o.cell}};
}

inline Json to_json(const RunRecord& r) {
  Json j{{"point", r.point}, {"run", r.run}, {"status", to_string(r.status)}};
  if (r.status != RunStatus::kOk) {
    j["error"] = r.error;
    return j;
  }
  j["target_angle"] = r.target_angle;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["outcome"] = to_json(r.outcome);
  return j;
}

inline Json to_json(const PointStats& p, const ExperimentConfig& c) {
  Json values = Json::object();
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    values[c.sweep[i].parameter] = p.values[i];
  }
  Json pct = Json::object();
  Json cnt = Json::object();
  for (Label l : kAllLabels) {
    pct[to_string(l)] = p.percentage(l);
    cnt[to_string(l)] = p.counts.at(l);
  }
  return Json{{"values", values},
              {"runs", p.runs},
              {"infeasible", p.infeasible},
              {"failed", p.failed},
              {"counts", cnt},
              {"percentages", pct},
              {"mean_confidence", p.mean_confidence},
              {"mean_angle_error", p.mean_angle_error}};
}

struct OutputPaths {
  std::filesystem::path summary;      ///< CSV, one row per sweep point
  std::filesystem::path document;     ///< JSON config echo and per-run records
  std::filesystem::path beampattern;  ///< CSV, true vs reconstructed
  std::filesystem::path particles;    ///< CSV, t = 0 and t = T positions

  static OutputPaths in(const std::filesystem::path& dir,
                        const std::string& name) {
    return {dir / (name + "_summary.csv"), dir / (name + ".json"),
            dir / (name + "_beampattern.csv"), dir / (name + "_particles.csv")};
  }
};

/// %.17g: exact round-trip, same bytes for the same double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot write " + p.string());
  return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& p) {
  out.close();
  if (!out) throw IOError("write failed for " + p.string());
}

}  // namespace detail

inline void write_summary_csv(const AggregateStats& s,
                              const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "point";
  for (const auto& a : s.config.sweep) out << ',' << a.parameter;
  out << ",runs,infeasible,failed";
  for (Label l : kAllLabels) out << ',' << to_string(l);
  out << ",mean_confidence,mean_angle_error\n";
  for (std::size_t p = 0; p < s.points.size(); ++p) {
    const auto& ps = s.points[p];
    out << p;
    for (double v : ps.values) out << ',' << fmt(v);
    out << ',' << ps.runs << ',' << ps.infeasible << ',' << ps.failed;
    for (Label l : kAllLabels) out << ',' << fmt(ps.percentage(l));
    out << ',' << fmt(ps.mean_confidence) << ',' << fmt(ps.mean_angle_error)
        << '\n';
  }
  detail::close_out(out, path);
}

inline Json results_document(const AggregateStats& s) {
  Json points = Json::array();
  for (const auto& p : s.points) points.push_back(to_json(p, s.config));
  Json runs = Json::array();
  for (const auto& r : s.records) runs.push_back(to_json(r));
  return Json{{"config", to_json(s.config)}, {"points", points}, {"runs", runs}};
}

inline void write_beampattern_csv(const RealVector& angles,
                                  const RealVector& truth,
                                  const RealVector& reconstructed,
                                  const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "angle_deg,true,reconstructed\n";
  for (Index l = 0; l < angles.size(); ++l) {
    out << fmt(angles(l)) << ',' << fmt(truth(l)) << ','
        << fmt(reconstructed.size() ? reconstructed(l) : 0.0) << '\n';
  }
  detail::close_out(out, path);
}

inline void write_particles_csv(const FilterTrace& trace,
                                const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "generation,x,y,weight\n";
  for (const ParticleSet* ps : {&trace.initial, &trace.final}) {
    for (int i = 0; i < ps->size(); ++i) {
      const auto& p = ps->positions[static_cast<std::size_t>(i)];
      out << ps->generation << ',' << fmt(p.x) << ',' << fmt(p.y) << ','
          << fmt(ps->weights(i)) << '\n';
    }
  }
  detail::close_out(out, path);
}

/// Writes the summary table and JSON document; traces when available and
/// enabled. Returns the paths written.
inline std::vector<std::filesystem::path> emit_results(
    const AggregateStats& s, const ExperimentTraces* traces,
    const OutputPaths& paths) {
  std::vector<std::filesystem::path> written;
  write_summary_csv(s, paths.summary);
  written.push_back(paths.summary);
  {
    auto out = detail::open_out(paths.document);
    out << results_document(s).dump(2) << '\n';
    detail::close_out(out, paths.document);
    written.push_back(paths.document);
  }
  if (traces && traces->angles.size() > 0 && s.config.write_beampattern) {
    write_beampattern_csv(traces->angles, traces->true_beampattern,
                          traces->reconstructed_beampattern, paths.beampattern);
    written.push_back(paths.beampattern);
  }
  if (traces && traces->available && s.config.write_particles) {
    write_particles_csv(traces->particles, paths.particles);
    written.push_back(paths.particles);
  }
  return written;
}

inline std::vector<std::filesystem::path> emit_results(
    const AggregateStats& s, const ExperimentTraces* traces = nullptr) {
  return emit_results(
      s, traces, OutputPaths::in(s.config.output_dir, s.config.run_name));
}

// ---------------------------------------------------------------------------
// Exact-Bayes oracle on a static likelihood table

struct OracleResult {
  RealVector pf_occupancy;  ///< mean over seeds
  RealVector exact;         ///< L^t * prior, normalized
  double total_variation = 0.0;
};

inline OracleResult oracle_compare(const GridWorld& grid,
                                   const CellLikelihoodTable& table,
                                   int particles, int steps, int seeds,
                                   std::uint64_t root_seed,
                                   CellMass mode = CellMass::kSum) {
  if (seeds < 1) throw ConfigError("oracle needs at least one seed");
  OracleResult r;
  r.pf_occupancy = RealVector::Zero(grid.size());
  for (int s = 0; s < seeds; ++s) {
    const ParticleSet ps = run_static_filter(
        grid, table, particles, steps, run_seed(root_seed, s), mode);
    r.pf_occupancy += occupancy(ps, grid);
  }
  r.pf_occupancy /= seeds;
  // Uniform initial positions: prior occupancy is each cell's area share.
  const RealVector prior = RealVector::Constant(grid.size(), 1.0 / grid.size());
  r.exact = exact_cell_posterior(table.likelihood, prior, steps);
  r.total_variation = dfrc::total_variation(r.pf_occupancy, r.exact);
  return r;
}

}  // namespace dfrc
