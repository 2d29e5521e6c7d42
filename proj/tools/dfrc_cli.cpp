// Command-line driver: design, attack, sweep and oracle.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dfrc/dfrc.hpp"

namespace {

using dfrc::ExperimentConfig;
using dfrc::Json;

constexpr const char* kOutputEnv = "DFRC_OUTPUT_DIR";

dfrc::Point parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) {
    throw dfrc::ConfigError("point '" + s + "' must be x,y");
  }
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw dfrc::ConfigError("point '" + s + "' must be x,y");
  }
}

// "T=30,300"
dfrc::SweepAxis parse_axis(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw dfrc::ConfigError("sweep '" + s + "' must be NAME=v1,v2,...");
  }
  dfrc::SweepAxis axis;
  axis.parameter = s.substr(0, eq);
  std::stringstream ss(s.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      axis.values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw dfrc::ConfigError("bad sweep value '" + item + "'");
    }
  }
  return axis;
}

// Options are collected first and applied on top of the loaded config, so
// an explicit flag always wins over the config file.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App& app) : app_(app) {}

  template <typename T>
  void add(const std::string& name, T ExperimentConfig::*member,
           const std::string& desc) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_.add_option(name, *value, desc)->group("Experiment");
    appliers_.push_back([opt, value, member](ExperimentConfig& c) {
      if (opt->count() > 0) c.*member = *value;
    });
  }

  void add_point(const std::string& name, dfrc::Point ExperimentConfig::*member,
                 const std::string& desc) {
    auto value = std::make_shared<std::string>();
    CLI::Option* opt =
        app_.add_option(name, *value, desc)->group("Experiment")->type_name("X,Y");
    appliers_.push_back([opt, value, member](ExperimentConfig& c) {
      if (opt->count() > 0) c.*member = parse_point(*value);
    });
  }

  void add_custom(CLI::Option* opt,
                  std::function<void(ExperimentConfig&)> apply) {
    opt->group("Experiment");
    appliers_.push_back([opt, apply](ExperimentConfig& c) {
      if (opt->count() > 0) apply(c);
    });
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  CLI::App& app_;
  std::vector<std::function<void(ExperimentConfig&)>> appliers_;
};

void print_error(const std::string& code, const std::string& message) {
  Json rec{{"status", "error"}, {"code", code}, {"message", message}};
  std::cerr << rec.dump() << std::endl;
}

std::filesystem::path out_path(const ExperimentConfig& c,
                               const std::string& suffix) {
  return std::filesystem::path(c.output_dir) / (c.run_name + suffix);
}

void write_json(const std::filesystem::path& p, const Json& j) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw dfrc::IOError("cannot write " + p.string());
  out << j.dump(2) << '\n';
  out.close();
  if (!out) throw dfrc::IOError("write failed for " + p.string());
}

Json design_summary(const dfrc::PrecoderSolution& sol,
                    const dfrc::Scenario& s, const dfrc::ChannelSet& ch) {
  Json sinr = Json::array();
  for (int k = 0; k < sol.num_users(); ++k) {
    sinr.push_back(dfrc::linear_to_db(dfrc::sinr(k, sol, ch, s.rx_noise_power)));
  }
  Json users = Json::array();
  for (const auto& u : s.user_positions) users.push_back(dfrc::to_json(u));
  return Json{{"target_angle", s.target_angle()},
              {"user_positions", users},
              {"target_position", dfrc::to_json(s.target_position)},
              {"converged", sol.converged},
              {"iterations", sol.objective_trace.size()},
              {"objective_trace", sol.objective_trace},
              {"scale", sol.scale},
              {"sinr_dB", sinr}};
}

int cmd_design(const ExperimentConfig& c, int run) {
  const dfrc::Scenario s = dfrc::make_scenario(c, run);
  const std::uint64_t seed = dfrc::run_seed(c.root_seed, run);
  const auto ch = dfrc::generate_channels(
      s, dfrc::derive_seed(seed, dfrc::Stream::kChannels));
  const auto sol = dfrc::design_for_run(c, s, run);
  const auto angles = dfrc::AngleGrid::quadrant(c.angle_step);
  const auto desired =
      dfrc::desired_beampattern(s.target_angle(), c.beam_width, angles);
  const auto curve =
      dfrc::beampattern_curve(sol.covariance, angles.samples(), c.spacing);

  const auto bp = out_path(c, "_design_beampattern.csv");
  {
    std::error_code ec;
    std::filesystem::create_directories(bp.parent_path(), ec);
    std::ofstream out(bp, std::ios::binary | std::ios::trunc);
    if (!out) throw dfrc::IOError("cannot write " + bp.string());
    out << "angle_deg,beampattern,desired\n";
    for (dfrc::Index l = 0; l < angles.size(); ++l) {
      out << dfrc::fmt(angles[l]) << ',' << dfrc::fmt(curve(l)) << ','
          << dfrc::fmt(desired.values(l)) << '\n';
    }
  }
  Json doc{{"config", dfrc::to_json(c)}, {"run", run},
           {"design", design_summary(sol, s, ch)}};
  const auto js = out_path(c, "_design.json");
  write_json(js, doc);
  std::cout << Json{{"status", "ok"},
                    {"files", {bp.string(), js.string()}},
                    {"design", doc["design"]}}
                   .dump()
            << std::endl;
  return 0;
}

int cmd_attack(const ExperimentConfig& c, int run) {
  ExperimentConfig one = c;
  one.sweep.clear();
  const dfrc::Scenario s = dfrc::make_scenario(one, run);
  const auto sol = dfrc::design_for_run(one, s, run);
  const auto grid = dfrc::build_grid(one.area(), one.cell_size, one.bs_position);
  const auto angles = dfrc::AngleGrid::quadrant(one.angle_step);
  dfrc::FilterOptions fo;
  fo.cell_mass = one.cell_mass;
  fo.spacing = one.spacing;
  const double sigma_sq = dfrc::dbm_to_watts(one.sigma_sq_dbm);
  const std::uint64_t seed = dfrc::run_seed(one.root_seed, run);
  dfrc::FilterTrace trace;
  const auto ps = dfrc::run_particle_filter(sol, grid, angles, one.particles,
                                            one.observations, sigma_sq, seed,
                                            fo, &trace);
  const auto outcome = dfrc::classify(ps, grid, s.target_angle(),
                                      one.conf_threshold, one.angle_threshold);

  const auto obs = dfrc::observe_precoder(sol, sigma_sq, seed, 1);
  const auto truth =
      dfrc::beampattern_curve(sol.covariance, angles.samples(), one.spacing);
  const auto recon = dfrc::beampattern_curve(
      dfrc::HermitianMatrix(
          dfrc::ComplexMatrix(obs.W_tilde * obs.W_tilde.adjoint())),
      angles.samples(), one.spacing);
  const auto bp = out_path(one, "_attack_beampattern.csv");
  const auto pp = out_path(one, "_attack_particles.csv");
  const auto js = out_path(one, "_attack.json");
  dfrc::write_beampattern_csv(angles.samples(), truth, recon, bp);
  dfrc::write_particles_csv(trace, pp);
  Json doc{{"config", dfrc::to_json(one)},
           {"run", run},
           {"target_angle", s.target_angle()},
           {"converged", sol.converged},
           {"outcome", dfrc::to_json(outcome)}};
  write_json(js, doc);
  std::cout << Json{{"status", "ok"},
                    {"files", {bp.string(), pp.string(), js.string()}},
                    {"outcome", doc["outcome"]}}
                   .dump()
            << std::endl;
  return 0;
}

int cmd_sweep(const ExperimentConfig& c, int workers) {
  dfrc::ExperimentTraces traces;
  const auto stats = dfrc::run_experiment(c, workers, &traces);
  const auto files = dfrc::emit_results(stats, &traces);
  Json list = Json::array();
  for (const auto& f : files) list.push_back(f.string());
  Json points = Json::array();
  for (const auto& p : stats.points) points.push_back(dfrc::to_json(p, c));
  std::cout << Json{{"status", "ok"}, {"files", list}, {"points", points}}.dump()
            << std::endl;
  return 0;
}

int cmd_oracle(const ExperimentConfig& c, int cells, int seeds,
               const std::vector<double>& likelihoods) {
  if (cells < 1) throw dfrc::ConfigError("oracle cells must be >= 1");
  const auto grid = dfrc::build_grid(c.area(), c.area_width / cells,
                                     c.bs_position);
  dfrc::CellLikelihoodTable table;
  if (!likelihoods.empty()) {
    if (static_cast<int>(likelihoods.size()) != grid.size()) {
      throw dfrc::ConfigError("expected " + std::to_string(grid.size()) +
                              " likelihood values");
    }
    table.likelihood = Eigen::Map<const dfrc::RealVector>(likelihoods.data(),
                                                          grid.size());
    if ((table.likelihood.array() < 0.0).any() ||
        (table.likelihood.array() >= 1.0).any()) {
      throw dfrc::ConfigError("likelihood values must lie in [0, 1)");
    }
    table.beampattern = -(1.0 - table.likelihood.array()).log();
  } else {
    // Noise-free reconstruction of the run-0 design at the coarse cells.
    ExperimentConfig one = c;
    one.sweep.clear();
    const dfrc::Scenario s = dfrc::make_scenario(one, 0);
    const auto sol = dfrc::design_for_run(one, s, 0);
    const auto obs = dfrc::observe_precoder(sol, 0.0, 0, 0);
    table = dfrc::reconstruct_beampattern(
        obs, grid, dfrc::AngleGrid::quadrant(one.angle_step), one.spacing);
  }
  const auto r = dfrc::oracle_compare(grid, table, c.particles, c.observations,
                                      seeds, c.root_seed, c.cell_mass);
  const auto path = out_path(c, "_oracle.csv");
  {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw dfrc::IOError("cannot write " + path.string());
    out << "cell,likelihood,exact,particle_filter\n";
    for (int n = 0; n < grid.size(); ++n) {
      out << n << ',' << dfrc::fmt(table.likelihood(n)) << ','
          << dfrc::fmt(r.exact(n)) << ',' << dfrc::fmt(r.pf_occupancy(n))
          << '\n';
    }
  }
  std::cout << Json{{"status", "ok"},
                    {"files", {path.string()}},
                    {"total_variation", r.total_variation},
                    {"seeds", seeds}}
                   .dump()
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beampattern privacy attack on a DFRC base station"};
  app.require_subcommand(1);

  std::string config_path;
  std::string dump_config_path;
  int workers = 1;
  int run = 0;
  int oracle_cells = 4;
  int oracle_seeds = 500;
  std::vector<double> oracle_likelihoods;

  app.add_option("--config", config_path, "JSON config; flags override it")
      ->check(CLI::ExistingFile);
  app.add_option("--dump-config", dump_config_path,
                 "write the resolved config to this JSON file");
  app.add_option("--workers", workers, "worker threads")
      ->check(CLI::PositiveNumber);

  ConfigFlags f(app);
  f.add("--area-width", &ExperimentConfig::area_width, "search area width (m)");
  f.add("--area-height", &ExperimentConfig::area_height, "search area height (m)");
  f.add("--cell-size", &ExperimentConfig::cell_size, "grid cell side (m)");
  f.add_point("--bs", &ExperimentConfig::bs_position, "base station position");
  {
    auto mode = std::make_shared<std::string>();
    f.add_custom(app.add_option("--placement", *mode, "fixed or random")
                     ->check(CLI::IsMember({"fixed", "random"})),
                 [mode](ExperimentConfig& c) {
                   c.placement = dfrc::placement_from_string(*mode);
                 });
  }
  {
    auto users = std::make_shared<std::vector<std::string>>();
    f.add_custom(app.add_option("--user", *users,
                                "user position X,Y (repeat per user)")
                     ->type_name("X,Y"),
                 [users](ExperimentConfig& c) {
                   c.user_positions.clear();
                   for (const auto& u : *users) {
                     c.user_positions.push_back(parse_point(u));
                   }
                 });
  }
  f.add("--adversary-index", &ExperimentConfig::adversary_index,
        "1-based index of the adversarial user");
  f.add_point("--target", &ExperimentConfig::target_position, "target position");
  f.add("--num-users", &ExperimentConfig::num_users,
        "user count under random placement");
  f.add("--num-tx,--M-T", &ExperimentConfig::num_tx, "BS transmit antennas");
  f.add("--num-rx,--N-R", &ExperimentConfig::num_rx, "receive antennas per user");
  f.add("--spacing", &ExperimentConfig::spacing, "antenna spacing (wavelengths)");
  f.add("--tx-power", &ExperimentConfig::tx_power, "total transmit power P_t");
  f.add("--path-loss-exponent", &ExperimentConfig::path_loss_exponent,
        "path-loss exponent");
  f.add("--sigma-k-sq-dbm", &ExperimentConfig::sigma_k_sq_dbm,
        "user receiver noise (dBm)");
  f.add("--gamma-db", &ExperimentConfig::gamma_db, "SINR threshold (dB)");
  f.add("--beam-width", &ExperimentConfig::beam_width, "desired beam width (deg)");
  f.add("--angle-step", &ExperimentConfig::angle_step, "angle grid step (deg)");
  f.add("--epsilon", &ExperimentConfig::epsilon, "relative convergence threshold");
  f.add("--max-iters", &ExperimentConfig::max_iters,
        "alternating optimization iteration cap");
  f.add("--sigma-sq-dbm", &ExperimentConfig::sigma_sq_dbm,
        "precoder observation noise (dBm)");
  f.add("--particles,-M", &ExperimentConfig::particles, "particle count");
  f.add("--observations,-T", &ExperimentConfig::observations,
        "number of observations");
  {
    auto mode = std::make_shared<std::string>();
    f.add_custom(app.add_option("--cell-mass", *mode,
                                "resampling cell mass: sum or average")
                     ->check(CLI::IsMember({"sum", "average"})),
                 [mode](ExperimentConfig& c) {
                   c.cell_mass = dfrc::cell_mass_from_string(*mode);
                 });
  }
  f.add("--conf-threshold", &ExperimentConfig::conf_threshold,
        "detection confidence threshold");
  f.add("--angle-threshold", &ExperimentConfig::angle_threshold,
        "detection angle threshold (deg)");
  f.add("--num-runs", &ExperimentConfig::num_runs, "Monte Carlo runs");
  f.add("--seed", &ExperimentConfig::root_seed, "root seed");
  {
    auto axes = std::make_shared<std::vector<std::string>>();
    f.add_custom(app.add_option("--sweep", *axes,
                                "sweep axis NAME=v1,v2,... (repeatable)")
                     ->type_name("AXIS"),
                 [axes](ExperimentConfig& c) {
                   c.sweep.clear();
                   for (const auto& a : *axes) c.sweep.push_back(parse_axis(a));
                 });
  }
  f.add("--output-dir,-o", &ExperimentConfig::output_dir,
        std::string("output directory (default from ") + kOutputEnv + ")");
  f.add("--run-name", &ExperimentConfig::run_name, "output file prefix");
  f.add("--write-beampattern", &ExperimentConfig::write_beampattern,
        "write the beampattern trace");
  f.add("--write-particles", &ExperimentConfig::write_particles,
        "write the particle trace");

  auto* design = app.add_subcommand("design", "solve one precoder and dump its beampattern");
  auto* attack = app.add_subcommand("attack", "one particle-filter run with traces");
  auto* sweep = app.add_subcommand("sweep", "full Monte Carlo experiment");
  auto* oracle = app.add_subcommand("oracle", "exact-Bayes vs particle filter on a small grid");
  for (auto* sub : {design, attack, sweep, oracle}) sub->fallthrough();
  for (auto* sub : {design, attack}) {
    sub->add_option("--run", run, "run index")->check(CLI::NonNegativeNumber);
  }
  oracle->add_option("--cells", oracle_cells, "cells per side");
  oracle->add_option("--seeds", oracle_seeds, "filter repetitions");
  oracle->add_option("--likelihoods", oracle_likelihoods,
                     "static likelihood per cell (row-major)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  }

  try {
    ExperimentConfig c;
    if (const char* env = std::getenv(kOutputEnv); env && *env) c.output_dir = env;
    if (!config_path.empty()) c = dfrc::load_config(config_path);
    f.apply(c);
    c.validate();
    if (!dump_config_path.empty()) write_json(dump_config_path, dfrc::to_json(c));

    if (*design) return cmd_design(c, run);
    if (*attack) return cmd_attack(c, run);
    if (*sweep) return cmd_sweep(c, workers);
    return cmd_oracle(c, oracle_cells, oracle_seeds, oracle_likelihoods);
  } catch (const dfrc::Error& e) {
    print_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 3;
  }
}
