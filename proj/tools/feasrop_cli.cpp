// Command-line driver for the feasibility experiments.
//
// Exit codes: 0 success, 1 domain/usage error, 2 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "feasrop/diagnostics.hpp"
#include "feasrop/errors.hpp"
#include "feasrop/harness.hpp"

namespace fs = std::filesystem;
using namespace feasrop;

namespace {

struct CommonOptions {
  std::uint64_t seed = 1;
  int trials = 10;
  std::string solver = "lbfgs";
  long rank = 0;
  double tol = 1e-5;
  int max_iters = 10000;
  double stepsize = 0.1;
  std::string out;
  int jobs = 1;
};

void add_common(CLI::App* app, CommonOptions& o, bool with_trials = true) {
  app->add_option("--seed", o.seed, "Master RNG seed");
  if (with_trials) app->add_option("--trials", o.trials, "Trials per grid cell")->check(CLI::PositiveNumber);
  app->add_option("--solver", o.solver, "Feasibility solver")
      ->check(CLI::IsMember({"lbfgs", "nesterov", "dr", "fgd"}));
  app->add_option("--rank", o.rank, "Planted rank (and FGD factor rank)");
  app->add_option("--tol", o.tol, "Feasibility tolerance on the l2 residual")->check(CLI::PositiveNumber);
  app->add_option("--max-iters", o.max_iters, "Iteration limit")->check(CLI::NonNegativeNumber);
  app->add_option("--stepsize", o.stepsize, "Stepsize for Nesterov and FGD")->check(CLI::PositiveNumber);
  app->add_option("--out", o.out, "Output path");
  app->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

ExperimentGrid grid_from(const CommonOptions& o) {
  ExperimentGrid g;
  g.trials = o.trials;
  g.master_seed = o.seed;
  g.solver = parse_solver(o.solver);
  g.solver_config.feas_tol = o.tol;
  g.solver_config.max_iters = o.max_iters;
  g.solver_config.stepsize = o.stepsize;
  g.jobs = o.jobs;
  return g;
}

std::optional<fs::path> out_path(const CommonOptions& o) {
  if (o.out.empty()) return std::nullopt;
  return fs::path(o.out);
}

void print_cells(const DataTable& t) { write_dat(t, std::cout); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feasibility-based recovery of PSD matrices from rank-one projections"};
  app.require_subcommand(1);

  // phase-transition
  CommonOptions pt;
  pt.rank = 1;
  std::vector<long> pt_n{10, 20, 30, 40};
  std::vector<long> pt_m;
  std::vector<double> pt_mult{1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5, 5.5, 6, 6.5, 7, 7.5, 8};
  double pt_eps = 1e-3;
  auto* pt_cmd = app.add_subcommand("phase-transition", "Failure rate over an (n, m) grid for a planted rank-r matrix");
  add_common(pt_cmd, pt);
  pt_cmd->add_option("--n", pt_n, "Matrix dimensions");
  pt_cmd->add_option("--m", pt_m, "Absolute measurement counts (overrides --m-mult)");
  pt_cmd->add_option("--m-mult", pt_mult, "Measurement counts as multiples of n");
  pt_cmd->add_option("--success-eps", pt_eps, "Frobenius error counted as success")->check(CLI::PositiveNumber);

  // noisy-sweep
  CommonOptions ns;
  ns.rank = 3;
  long ns_n = 50;
  std::vector<long> ns_m{150, 200, 250, 300, 350, 400, 450, 500};
  std::vector<double> ns_noise{0.0, 1e-3, 1e-2};
  auto* ns_cmd = app.add_subcommand("noisy-sweep", "Mean error over (m, noise) for a planted rank-r matrix");
  add_common(ns_cmd, ns);
  ns_cmd->add_option("--n", ns_n, "Matrix dimension")->check(CLI::PositiveNumber);
  ns_cmd->add_option("--m", ns_m, "Measurement counts");
  ns_cmd->add_option("--noise", ns_noise, "Uniform noise half-widths");

  // fullrank
  CommonOptions fr;
  std::vector<long> fr_n{20, 30, 40, 50};
  std::vector<double> fr_mult{2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto* fr_cmd = app.add_subcommand("fullrank", "Mean error over (n, m) for the decaying-spectrum matrix");
  add_common(fr_cmd, fr);
  fr_cmd->add_option("--n", fr_n, "Matrix dimensions");
  fr_cmd->add_option("--m-mult", fr_mult, "Measurement counts as multiples of n");

  // bench
  CommonOptions bc;
  bc.rank = 1;
  BenchConfig bench_cfg;
  auto* bc_cmd = app.add_subcommand("bench", "Iteration and timing comparison of the four solvers");
  add_common(bc_cmd, bc, false);
  bc_cmd->add_option("--n", bench_cfg.n, "Matrix dimension");
  bc_cmd->add_option("--m", bench_cfg.m, "Measurement count");
  bc_cmd->add_option("--nesterov-step", bench_cfg.nesterov_step, "Nesterov stepsize");
  bc_cmd->add_option("--fgd-step", bench_cfg.fgd_low_rank_step, "FGD stepsize at the planted rank");
  bc_cmd->add_option("--fgd-full-step", bench_cfg.fgd_full_rank_step, "FGD stepsize at rank n");

  // retrieve-demo
  CommonOptions rd;
  std::string rd_image;
  long rd_m = 2560;
  auto* rd_cmd = app.add_subcommand("retrieve-demo", "Lifted phase retrieval with and without the PSD constraint");
  add_common(rd_cmd, rd, false);
  rd_cmd->add_option("--image", rd_image, "Signal as a .pgm image or a whitespace-separated vector file");
  rd_cmd->add_option("--m", rd_m, "Measurement count")->check(CLI::PositiveNumber);

  // solve
  CommonOptions sv;
  std::string sv_ensemble, sv_meas;
  auto* sv_cmd = app.add_subcommand("solve", "Solve one instance read from files and print the report");
  add_common(sv_cmd, sv, false);
  sv_cmd->add_option("--ensemble", sv_ensemble, "Ensemble file")->required()->check(CLI::ExistingFile);
  sv_cmd->add_option("--measurements", sv_meas, "Measurement file")->required()->check(CLI::ExistingFile);

  // simulate
  CommonOptions sm;
  sm.rank = 1;
  long sm_n = 15, sm_m = 100;
  double sm_noise = 0.0;
  std::string sm_dist = "unit-sphere";
  std::string sm_ens_out = "ensemble.txt", sm_meas_out = "measurements.txt";
  auto* sm_cmd = app.add_subcommand("simulate", "Write an ensemble and measurements of a planted rank-r matrix");
  sm_cmd->add_option("--seed", sm.seed, "RNG seed");
  sm_cmd->add_option("--rank", sm.rank, "Planted rank");
  sm_cmd->add_option("--n", sm_n, "Matrix dimension")->check(CLI::PositiveNumber);
  sm_cmd->add_option("--m", sm_m, "Measurement count")->check(CLI::PositiveNumber);
  sm_cmd->add_option("--noise", sm_noise, "Uniform noise half-width")->check(CLI::NonNegativeNumber);
  sm_cmd->add_option("--distribution", sm_dist, "Sensing distribution")
      ->check(CLI::IsMember({"unit-sphere", "gaussian"}));
  sm_cmd->add_option("--ensemble-out", sm_ens_out, "Ensemble output path");
  sm_cmd->add_option("--measurements-out", sm_meas_out, "Measurement output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pt_cmd) {
      ExperimentGrid g = grid_from(pt);
      g.n_values.assign(pt_n.begin(), pt_n.end());
      g.m_values.assign(pt_m.begin(), pt_m.end());
      g.m_multipliers = pt_mult;
      g.success_eps = pt_eps;
      print_cells(phase_transition_table(run_phase_transition(g, pt.rank, out_path(pt))));
    } else if (*ns_cmd) {
      ExperimentGrid g = grid_from(ns);
      g.m_values.assign(ns_m.begin(), ns_m.end());
      g.noise_eps_values = ns_noise;
      print_cells(noisy_table(run_noisy_sweep(g, ns_n, ns.rank, out_path(ns))));
    } else if (*fr_cmd) {
      ExperimentGrid g = grid_from(fr);
      g.n_values.assign(fr_n.begin(), fr_n.end());
      g.m_multipliers = fr_mult;
      const auto cells = run_fullrank_sweep(g, out_path(fr));
      print_cells(fullrank_table(cells));
      for (double level : {0.1, 0.3, 0.4}) {
        const LevelSetFit fit = fit_level_set(cells, level);
        std::cerr << "level " << level << ": n = " << fit.slope << " m + " << fit.intercept << " (R^2 " << fit.r2
                  << ", " << fit.m.size() << " points)\n";
      }
    } else if (*bc_cmd) {
      bench_cfg.rank = bc.rank;
      bench_cfg.tol = bc.tol;
      bench_cfg.max_iters = bc.max_iters;
      bench_cfg.seed = bc.seed;
      const BenchResult r = run_solver_bench(bench_cfg, out_path(bc));
      std::cout << "solver iterations time_ms eig_decompositions residual termination\n";
      for (const auto& e : r.entries)
        std::cout << e.name << ' ' << e.report.iterations << ' ' << 1e3 * e.report.wall_time << ' '
                  << e.report.eig_decompositions << ' '
                  << (e.report.residual_history.empty() ? 0.0 : e.report.residual_history.back()) << ' '
                  << to_string(e.report.termination) << '\n';
      std::cout << "lbfgs_fewest_iterations " << (r.lbfgs_fewest_iterations ? "yes" : "no") << '\n'
                << "fgd_fewest_eig_decompositions " << (r.fgd_low_rank_fewest_eigs ? "yes" : "no") << '\n';
    } else if (*rd_cmd) {
      Eigen::VectorXd x0 = default_demo_image();
      if (!rd_image.empty()) {
        const fs::path p(rd_image);
        x0 = p.extension() == ".pgm" ? read_pgm(p) : read_vector(p);
      }
      SolverConfig cfg;
      cfg.feas_tol = rd.tol;
      cfg.max_iters = rd.max_iters;
      const DemoResult r = demo_phase_retrieval(x0, rd_m, rd.seed, cfg,
                                                rd.out.empty() ? std::nullopt : std::optional<fs::path>(rd.out));
      std::cout << "relative_error_without_psd " << format_value(r.rel_err_nopsd) << '\n'
                << "relative_error_with_psd " << format_value(r.rel_err_psd) << '\n'
                << "psd_iterations " << r.psd_report.iterations << '\n'
                << "psd_termination " << to_string(r.psd_report.termination) << '\n';
    } else if (*sv_cmd) {
      std::ifstream ens_in(sv_ensemble), meas_in(sv_meas);
      const SensingEnsemble z = SensingEnsemble::read(ens_in);
      const MeasurementSet meas = MeasurementSet::read(meas_in);
      SolverConfig cfg;
      cfg.feas_tol = sv.tol;
      cfg.max_iters = sv.max_iters;
      cfg.stepsize = sv.stepsize;
      if (sv.rank > 0) cfg.rank = sv.rank;
      if (meas.noise_l1 > 0) cfg.l1_budget = meas.noise_l1;
      const SolverKind kind = parse_solver(sv.solver);
      if (kind == SolverKind::Fgd && !cfg.rank) cfg.rank = z.n();
      const SolveResult r = solve(kind, SymMatrix(z.n()), z, meas.b, cfg);
      std::cout << "solver " << to_string(kind) << '\n'
                << "termination " << to_string(r.report.termination) << '\n'
                << "iterations " << r.report.iterations << '\n'
                << "residual_l2 " << format_value(r.report.residual_history.back()) << '\n'
                << "residual_l1 " << format_value(r.report.final_l1_residual) << '\n'
                << "eig_decompositions " << r.report.eig_decompositions << '\n'
                << "wall_time_s " << format_value(r.report.wall_time) << '\n'
                << "trace " << format_value(r.x.trace()) << '\n';
      if (!r.report.message.empty()) std::cout << "message " << r.report.message << '\n';
      if (!sv.out.empty()) {
        DataTable t;
        for (Index j = 0; j < z.n(); ++j) t.columns.push_back("c" + std::to_string(j));
        for (Index i = 0; i < z.n(); ++i) {
          std::vector<double> row(static_cast<std::size_t>(z.n()));
          for (Index j = 0; j < z.n(); ++j) row[static_cast<std::size_t>(j)] = r.x(i, j);
          t.rows.push_back(std::move(row));
        }
        write_dat(t, fs::path(sv.out));
      }
      if (r.report.termination == Termination::NumericalFailure) return 2;
    } else if (*sm_cmd) {
      const SensingEnsemble z = sample_ensemble(sm_n, sm_m, derive_seed(sm.seed, {0}), parse_distribution(sm_dist));
      const SymMatrix x0 = planted_low_rank(sm_n, sm.rank);
      const NoiseModel model = sm_noise > 0 ? NoiseModel{noise::Uniform{sm_noise}} : NoiseModel{noise::None{}};
      const MeasurementSet meas = measure(z, x0, model, derive_seed(sm.seed, {1}));
      std::ofstream ens_out(sm_ens_out, std::ios::binary), meas_out(sm_meas_out, std::ios::binary);
      if (!ens_out || !meas_out) throw std::runtime_error("simulate: cannot open output files");
      z.write(ens_out);
      meas.write(meas_out);
    }
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
