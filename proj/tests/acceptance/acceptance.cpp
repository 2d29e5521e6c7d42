// Acceptance checks. One PASS/FAIL line per criterion; nonzero exit if any
// criterion fails. argv[1] is the scratch output directory.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dfrc/dfrc.hpp"

using namespace dfrc;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
fs::path g_out = "acceptance_out";

int workers() {
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double detection(const AggregateStats& s, std::size_t point) {
  return s.points.at(point).percentage(Label::kDetection);
}

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

ExperimentConfig desk_random(double gamma_db, int runs, std::uint64_t seed) {
  ExperimentConfig c;
  c.placement = Placement::kRandom;
  c.num_users = 2;
  c.num_tx = 8;
  c.num_rx = 2;
  c.gamma_db = gamma_db;
  c.num_runs = runs;
  c.root_seed = seed;
  return c;
}

struct Design {
  Scenario scenario;
  ChannelSet channels;
  std::optional<PrecoderSolution> solution;
  std::string error;
};

Design design_run(const ExperimentConfig& c, int run) {
  Design d;
  d.scenario = make_scenario(c, run);
  d.channels = generate_channels(
      d.scenario, derive_seed(run_seed(c.root_seed, run), Stream::kChannels));
  try {
    d.solution = design_for_run(c, d.scenario, run);
  } catch (const Error& e) {
    d.error = e.code();
  }
  return d;
}

// 1 and 2 share the designs; 4 reuses a few of them.
std::vector<Design> precoder_criteria(ExperimentConfig& c) {
  Timer timer;
  c = desk_random(12.0, 50, 101);
  std::vector<Design> designs;
  for (int r = 0; r < c.num_runs; ++r) designs.push_back(design_run(c, r));
  const double elapsed = timer.seconds();

  int converged = 0, failed = 0, violations = 0, monotone_breaks = 0;
  std::string first_violation;
  const double noise = dbm_to_watts(c.sigma_k_sq_dbm);
  for (const auto& d : designs) {
    if (!d.solution) {
      ++failed;
      continue;
    }
    const auto& s = *d.solution;
    for (std::size_t i = 1; i < s.objective_trace.size(); ++i) {
      if (s.objective_trace[i] > s.objective_trace[i - 1] + 1e-6) {
        ++monotone_breaks;
        break;
      }
    }
    if (!s.converged) continue;
    ++converged;
    std::vector<std::string> bad;
    const auto diag = s.covariance.matrix().diagonal().real().array();
    if ((diag - c.tx_power / c.num_tx).abs().maxCoeff() > 1e-6) bad.push_back("diag");
    if (min_eigenvalue(s.covariance) < -1e-7) bad.push_back("eig(R)");
    for (const auto& rk : s.user_covariances) {
      if (min_eigenvalue(rk) < -1e-7) bad.push_back("eig(R_k)");
    }
    for (int k = 0; k < s.num_users(); ++k) {
      if (linear_to_db(sinr(k, s, d.channels, noise)) < c.gamma_db - 0.01) {
        bad.push_back("sinr");
      }
    }
    const ComplexMatrix w = s.full_precoder();
    if ((w * w.adjoint() - s.covariance.matrix()).norm() > 1e-6) {
      bad.push_back("W W^H != R");
    }
    if (!bad.empty()) {
      ++violations;
      if (first_violation.empty()) first_violation = bad.front();
    }
  }
  report(1, converged > 0 && violations == 0 && elapsed <= 300.0,
         std::to_string(converged) + "/" + std::to_string(c.num_runs) +
             " converged, " + std::to_string(failed) + " failed, " +
             std::to_string(violations) + " violating" +
             (first_violation.empty() ? "" : " (" + first_violation + ")") +
             ", " + fmt1(elapsed) + " s");

  const int solved = c.num_runs - failed;
  const bool conv_ok = converged >= 0.9 * c.num_runs;
  report(2, monotone_breaks == 0 && conv_ok,
         std::to_string(monotone_breaks) + " non-monotone traces of " +
             std::to_string(solved) + ", converged within " +
             std::to_string(c.max_iters) + " iterations on " +
             fmt1(100.0 * converged / c.num_runs) + "%");
  return designs;
}

void zero_noise(const ExperimentConfig& c, const std::vector<Design>& designs) {
  double worst = 0.0;
  int checked = 0;
  for (const auto& d : designs) {
    if (!d.solution) continue;
    const GridWorld grid = build_grid(c.area(), c.cell_size, c.bs_position);
    const AngleGrid angles = AngleGrid::quadrant(c.angle_step);
    const auto t = reconstruct_beampattern(
        observe_precoder(*d.solution, 0.0, 1, 1), grid, angles, c.spacing);
    const ComplexMatrix w = d.solution->full_precoder();
    const auto idx = cell_angle_indices(grid, angles);
    for (int n = 0; n < grid.size(); ++n) {
      const ComplexVector a =
          steering_vector(angles[idx[static_cast<std::size_t>(n)]], c.num_tx,
                          c.spacing);
      const double truth = (w.adjoint() * a).squaredNorm();
      worst = std::max(worst, std::abs(t.beampattern(n) - truth) / truth);
    }
    if (++checked == 10) break;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max relative error %.3g over %d designs",
                worst, checked);
  report(4, checked > 0 && worst <= 1e-9, buf);
}

void beampattern_shape() {
  Timer timer;
  ExperimentConfig c = desk_random(0.1, 50, 303);
  c.beam_width = 10.0;
  int ok = 0, total = 0;
  const AngleGrid angles = AngleGrid::quadrant(0.1);
  for (int r = 0; r < c.num_runs; ++r) {
    const Design d = design_run(c, r);
    if (!d.solution) continue;
    ++total;
    const RealVector b =
        beampattern_curve(d.solution->covariance, angles.samples(), c.spacing);
    Index peak = 0;
    b.maxCoeff(&peak);
    if (std::abs(angles[peak] - d.scenario.target_angle()) <= 5.0) ++ok;
  }
  report(3, total > 0 && ok >= 0.95 * total,
         "peak within 5 deg on " + std::to_string(ok) + "/" +
             std::to_string(total) + " scenarios, " + fmt1(timer.seconds()) +
             " s");
}

void oracle_criterion() {
  const GridWorld grid = build_grid({1000, 1000}, 250, {0, 0});
  ExperimentConfig c;
  const Scenario s = make_scenario(c, 0);
  const auto sol = design_for_run(c, s, 0);
  const auto design_table = reconstruct_beampattern(
      observe_precoder(sol, 0.0, 1, 1), grid, AngleGrid::quadrant(), c.spacing);

  CellLikelihoodTable synthetic;
  synthetic.likelihood = RealVector(16);
  for (int n = 0; n < 16; ++n) synthetic.likelihood(n) = 0.05 + 0.06 * n;
  synthetic.beampattern = -(1.0 - synthetic.likelihood.array()).log();

  const auto a = oracle_compare(grid, design_table, 200, 10, 500, 5);
  const auto b = oracle_compare(grid, synthetic, 200, 10, 500, 6);
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "TV %.4f (design likelihoods), %.4f (graded likelihoods)",
                a.total_variation, b.total_variation);
  report(5, a.total_variation <= 0.05 && b.total_variation <= 0.05, buf);
}

ExperimentConfig fig4_config() {
  ExperimentConfig c;
  c.placement = Placement::kFixed;
  c.sigma_sq_dbm = -10.0;
  c.num_tx = 8;
  c.particles = 200;
  c.num_runs = 100;
  c.root_seed = 4;
  c.sweep = {{"T", {30, 300}}};
  c.output_dir = (g_out / "fig4").string();
  c.run_name = "fig4";
  return c;
}

std::vector<std::string> run_and_read(const ExperimentConfig& c,
                                      AggregateStats* stats) {
  ExperimentTraces traces;
  *stats = run_experiment(c, workers(), &traces);
  std::vector<std::string> bytes;
  for (const auto& p : emit_results(*stats, &traces)) bytes.push_back(slurp(p));
  return bytes;
}

void trend_criteria() {
  Timer t6;
  const ExperimentConfig c6 = fig4_config();
  AggregateStats s6;
  const auto files = run_and_read(c6, &s6);
  const double d30 = detection(s6, 0);
  const double d300 = detection(s6, 1);
  const double found = d300 + s6.points[1].percentage(Label::kMissDetection);
  const double e6 = t6.seconds();
  report(6, d300 - d30 >= 10.0 && found > 50.0 && e6 <= 600.0,
         "Detection " + fmt1(d30) + "% at T=30, " + fmt1(d300) +
             "% at T=300, Detection+MissDetection " + fmt1(found) +
             "% at T=300, " + fmt1(e6) + " s");

  ExperimentConfig c7 = fig4_config();
  c7.observations = 300;
  c7.sweep = {{"sigma_sq_dBm", {-30, -10, 10}}};
  c7.output_dir = (g_out / "fig5").string();
  c7.run_name = "fig5";
  AggregateStats s7;
  run_and_read(c7, &s7);
  const double a = detection(s7, 0), b = detection(s7, 1), c = detection(s7, 2);
  const bool mono = b <= a + 3.0 && c <= b + 3.0;
  report(7, mono && a - c >= 15.0,
         "Detection " + fmt1(a) + "% / " + fmt1(b) + "% / " + fmt1(c) +
             "% at -30 / -10 / +10 dBm");

  ExperimentConfig c8 = fig4_config();
  c8.observations = 300;
  c8.sweep = {{"M_T", {8, 16}}, {"Gamma_dB", {0, 6, 12}}};
  c8.output_dir = (g_out / "fig6").string();
  c8.run_name = "fig6";
  AggregateStats s8;
  run_and_read(c8, &s8);
  bool ok = true;
  std::string detail;
  for (int m = 0; m < 2; ++m) {
    double lo = 100.0, hi = 0.0;
    detail += m == 0 ? "M_T=8:" : "; M_T=16:";
    for (int g = 0; g < 3; ++g) {
      const double d = detection(s8, static_cast<std::size_t>(3 * m + g));
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      detail += " " + fmt1(d) + "%";
    }
    ok = ok && hi - lo <= 10.0;
  }
  for (int g = 0; g < 3; ++g) {
    ok = ok && detection(s8, static_cast<std::size_t>(3 + g)) >=
                   detection(s8, static_cast<std::size_t>(g));
  }
  report(8, ok, detail + " (Gamma 0 / 6 / 12 dB)");

  AggregateStats again;
  const auto repeat = run_and_read(c6, &again);
  report(9, files == repeat && !files.empty(),
         std::to_string(files.size()) + " output files " +
             (files == repeat ? "byte-identical" : "differ") + " on repeat");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_out = argv[1];
  try {
    ExperimentConfig desk;
    const auto designs = precoder_criteria(desk);
    beampattern_shape();
    zero_noise(desk, designs);
    oracle_criterion();
    trend_criteria();
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
