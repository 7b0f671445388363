#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "feasrop/dat.hpp"
#include "feasrop/random.hpp"
#include "feasrop/sensing.hpp"
#include "feasrop/solvers.hpp"
#include "feasrop/spectral.hpp"

namespace feasrop {

struct ExperimentGrid {
  std::vector<Index> n_values;
  /// Absolute measurement counts. When empty, m_multipliers are used instead.
  std::vector<Index> m_values;
  /// m = round(k·n) for each multiplier k.
  std::vector<double> m_multipliers;
  int trials = 10;
  double success_eps = 1e-3;
  std::uint64_t master_seed = 1;
  SolverKind solver = SolverKind::Lbfgs;
  SolverConfig solver_config;
  std::vector<double> noise_eps_values;
  /// Worker threads; results do not depend on this.
  int jobs = 1;

  void validate() const;
  std::vector<Index> m_for(Index n) const;
};

struct CellResult {
  Index n = 0;
  Index m = 0;
  double noise = 0.0;
  /// Failure rate (phase transition) or mean Frobenius error (other sweeps).
  double err = 0.0;
  int trials_run = 0;
  int numerical_failures = 0;
};

/// Upper triangle i.i.d. standard normal, mirrored.
SymMatrix random_symmetric_anchor(Index n, Rng& rng);

/// diag(1, …, 1, 0, …, 0) with r ones.
SymMatrix planted_low_rank(Index n, Index r);

/// Failure rate 1{‖X − X₀‖_F > success_eps} per (n, m) cell for a planted rank-r X₀.
std::vector<CellResult> run_phase_transition(const ExperimentGrid& grid, Index rank,
                                             const std::optional<std::filesystem::path>& out = std::nullopt);

/// Mean error per (m, ε) cell for planted rank-r X₀ ∈ S^n under uniform noise.
std::vector<CellResult> run_noisy_sweep(const ExperimentGrid& grid, Index n = 50, Index rank = 3,
                                        const std::optional<std::filesystem::path>& out = std::nullopt);

/// Mean error per (n, m) cell for the decaying-spectrum X₀.
std::vector<CellResult> run_fullrank_sweep(const ExperimentGrid& grid,
                                           const std::optional<std::filesystem::path>& out = std::nullopt);

DataTable phase_transition_table(const std::vector<CellResult>& cells);  // m n err
DataTable noisy_table(const std::vector<CellResult>& cells);             // m noise err
DataTable fullrank_table(const std::vector<CellResult>& cells);          // m n err

/// Smallest m at dimension n whose success rate is at least `rate`.
std::optional<Index> smallest_success_m(const std::vector<CellResult>& cells, Index n, double rate = 0.9);

/// Line n ≈ slope·m + intercept through the points where each n's error curve
/// crosses `level` (linear interpolation in m).
struct LevelSetFit {
  double level = 0.0;
  std::vector<double> m;
  std::vector<double> n;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LevelSetFit fit_level_set(const std::vector<CellResult>& cells, double level);

struct BenchConfig {
  Index n = 15;
  Index m = 100;
  Index rank = 1;
  double tol = 1e-5;
  int max_iters = 10000;
  std::uint64_t seed = 1;
  double nesterov_step = 0.1;
  double fgd_low_rank_step = 0.5;
  double fgd_full_rank_step = 0.5;
};

struct BenchEntry {
  std::string name;
  SolverKind kind;
  Index rank = 0;  // FGD factor rank, 0 otherwise
  SolverReport report;
  double error = 0.0;
};

struct BenchResult {
  std::vector<BenchEntry> entries;
  bool lbfgs_fewest_iterations = false;
  bool fgd_low_rank_fewest_eigs = false;
  DataTable table;

  const BenchEntry& entry(const std::string& name) const;
};

/// Runs every solver on one shared planted instance. When `out` is given the
/// summary table goes there and each residual history to `<stem>_<solver>.dat`.
BenchResult run_solver_bench(const BenchConfig& cfg, const std::optional<std::filesystem::path>& out = std::nullopt);

struct DemoResult {
  Eigen::VectorXd x0;
  Eigen::VectorXd x_nopsd;
  Eigen::VectorXd x_psd;
  double rel_err_nopsd = 0.0;
  double rel_err_psd = 0.0;
  SolverReport psd_report;
};

/// 16×16 test pattern with values in [0, 1], row-major.
Eigen::VectorXd default_demo_image();

/// min over s = ±1 of ‖s·x̂ − x₀‖ / ‖x₀‖
double sign_invariant_error(const Eigen::VectorXd& estimate, const Eigen::VectorXd& x0);

/// Lifted recovery of x0 from m squared projections, with and without the PSD
/// constraint. Estimates are √λ₁·u₁ of each recovered matrix. With `out_prefix`,
/// writes `<prefix>_{x0,nopsd,psd}.txt` and, for square lengths, `.pgm` images.
DemoResult demo_phase_retrieval(const Eigen::VectorXd& x0, Index m, std::uint64_t seed, const SolverConfig& cfg = {},
                                const std::optional<std::filesystem::path>& out_prefix = std::nullopt);

// Plain-text vectors and portable graymaps.
void write_vector(const Eigen::VectorXd& v, const std::filesystem::path& path);
Eigen::VectorXd read_vector(const std::filesystem::path& path);
/// Values are mapped linearly from [min, max] onto 0..255, image is width × (size/width).
void write_pgm(const Eigen::VectorXd& v, Index width, const std::filesystem::path& path);
/// Reads ASCII (P2) or binary (P5) graymaps, scaled to [0, 1], row-major.
Eigen::VectorXd read_pgm(const std::filesystem::path& path);

}  // namespace feasrop
