#include "feasrop/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "feasrop/diagnostics.hpp"
#include "feasrop/errors.hpp"

namespace feasrop {

namespace {

/// Runs fn(0..count-1) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct TrialSpec {
  Index n;
  Index m;
  const SymMatrix* x0;
  double noise_eps;
  std::uint64_t seed;
};

struct TrialOutcome {
  double err = 0.0;
  bool numerical_failure = false;
};

std::mutex log_mutex;

TrialOutcome run_trial(const TrialSpec& trial, const ExperimentGrid& grid, Index rank) {
  const SensingEnsemble z = sample_ensemble(trial.n, trial.m, derive_seed(trial.seed, {0}));
  Rng anchor_rng(derive_seed(trial.seed, {1}));
  const SymMatrix anchor = random_symmetric_anchor(trial.n, anchor_rng);
  const NoiseModel model = trial.noise_eps > 0 ? NoiseModel{noise::Uniform{trial.noise_eps}} : NoiseModel{noise::None{}};
  const MeasurementSet meas = measure(z, *trial.x0, model, derive_seed(trial.seed, {2}));

  SolverConfig cfg = grid.solver_config;
  if (meas.noise_l1 > 0) cfg.l1_budget = meas.noise_l1;
  if (!cfg.rank) cfg.rank = rank > 0 ? rank : trial.n;

  TrialOutcome out;
  try {
    SolveResult res = solve(grid.solver, anchor, z, meas.b, cfg);
    out.err = recovery_error(res.x, *trial.x0);
    if (res.report.termination == Termination::NumericalFailure) {
      out.numerical_failure = true;
      std::lock_guard lock(log_mutex);
      std::clog << "feasrop: numerical failure (n=" << trial.n << ", m=" << trial.m << ", eps=" << trial.noise_eps
                << "): " << res.report.message << '\n';
    }
  } catch (const NumericalError& e) {
    out.numerical_failure = true;
    out.err = std::numeric_limits<double>::infinity();
    std::lock_guard lock(log_mutex);
    std::clog << "feasrop: numerical failure (n=" << trial.n << ", m=" << trial.m << ", eps=" << trial.noise_eps
              << "): " << e.what() << '\n';
  }
  return out;
}

struct CellPlan {
  Index n;
  Index m;
  double eps;
  std::uint64_t key;
  const SymMatrix* x0;
};

/// Runs every (cell, trial) pair and reduces per cell.
std::vector<CellResult> run_cells(const std::vector<CellPlan>& plan, const ExperimentGrid& grid, Index rank,
                                  bool failure_rate_mode) {
  const std::size_t trials = static_cast<std::size_t>(grid.trials);
  std::vector<TrialOutcome> outcomes(plan.size() * trials);
  parallel_for(outcomes.size(), grid.jobs, [&](std::size_t idx) {
    const CellPlan& cell = plan[idx / trials];
    const std::uint64_t seed = derive_seed(grid.master_seed, {cell.key, static_cast<std::uint64_t>(idx % trials)});
    outcomes[idx] = run_trial(TrialSpec{cell.n, cell.m, cell.x0, cell.eps, seed}, grid, rank);
  });

  std::vector<CellResult> cells;
  cells.reserve(plan.size());
  for (std::size_t c = 0; c < plan.size(); ++c) {
    CellResult r{plan[c].n, plan[c].m, plan[c].eps, 0.0, grid.trials, 0};
    double acc = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const TrialOutcome& o = outcomes[c * trials + t];
      r.numerical_failures += o.numerical_failure ? 1 : 0;
      if (failure_rate_mode)
        acc += (o.numerical_failure || !(o.err <= grid.success_eps)) ? 1.0 : 0.0;
      else
        acc += o.err;
    }
    r.err = acc / static_cast<double>(trials);
    cells.push_back(r);
  }
  return cells;
}

std::uint64_t cell_key(Index n, Index m, std::size_t noise_index = 0) {
  return derive_seed(static_cast<std::uint64_t>(n), {static_cast<std::uint64_t>(m), noise_index});
}

}  // namespace

void ExperimentGrid::validate() const {
  if (trials < 1) throw DomainError("ExperimentGrid: trials must be at least 1");
  if (!(success_eps > 0)) throw DomainError("ExperimentGrid: success_eps must be positive");
  if (jobs < 1) throw DomainError("ExperimentGrid: jobs must be at least 1");
  if (m_values.empty() && m_multipliers.empty()) throw DomainError("ExperimentGrid: no measurement counts given");
  for (Index n : n_values)
    if (n < 1) throw DomainError("ExperimentGrid: dimensions must be positive");
  for (Index m : m_values)
    if (m < 1) throw DomainError("ExperimentGrid: measurement counts must be positive");
  for (double k : m_multipliers)
    if (!(k > 0)) throw DomainError("ExperimentGrid: multipliers must be positive");
  for (double e : noise_eps_values)
    if (!(e >= 0)) throw DomainError("ExperimentGrid: noise levels must be nonnegative");
  solver_config.validate();
}

std::vector<Index> ExperimentGrid::m_for(Index n) const {
  if (!m_values.empty()) return m_values;
  std::vector<Index> out;
  for (double k : m_multipliers) out.push_back(std::max<Index>(1, std::llround(k * static_cast<double>(n))));
  return out;
}

SymMatrix random_symmetric_anchor(Index n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) a(i, j) = a(j, i) = rng.normal();
  return SymMatrix::from_dense(a);
}

SymMatrix planted_low_rank(Index n, Index r) {
  if (r < 1 || r > n) throw DomainError("planted_low_rank: r must lie in [1, n]");
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  d.head(r).setOnes();
  return SymMatrix::diagonal(d);
}

std::vector<CellResult> run_phase_transition(const ExperimentGrid& grid, Index rank,
                                             const std::optional<std::filesystem::path>& out) {
  grid.validate();
  if (grid.n_values.empty()) throw DomainError("run_phase_transition: no dimensions given");
  std::vector<SymMatrix> truths;
  truths.reserve(grid.n_values.size());
  for (Index n : grid.n_values) truths.push_back(planted_low_rank(n, rank));
  std::vector<CellPlan> plan;
  for (std::size_t i = 0; i < grid.n_values.size(); ++i) {
    const Index n = grid.n_values[i];
    for (Index m : grid.m_for(n)) plan.push_back({n, m, 0.0, cell_key(n, m), &truths[i]});
  }
  auto cells = run_cells(plan, grid, rank, true);
  if (out) write_dat(phase_transition_table(cells), *out);
  return cells;
}

std::vector<CellResult> run_noisy_sweep(const ExperimentGrid& grid, Index n, Index rank,
                                        const std::optional<std::filesystem::path>& out) {
  grid.validate();
  if (grid.noise_eps_values.empty()) throw DomainError("run_noisy_sweep: no noise levels given");
  const SymMatrix x0 = planted_low_rank(n, rank);
  std::vector<CellPlan> plan;
  for (Index m : grid.m_for(n))
    for (std::size_t e = 0; e < grid.noise_eps_values.size(); ++e)
      plan.push_back({n, m, grid.noise_eps_values[e], cell_key(n, m, e + 1), &x0});
  auto cells = run_cells(plan, grid, rank, false);
  if (out) write_dat(noisy_table(cells), *out);
  return cells;
}

std::vector<CellResult> run_fullrank_sweep(const ExperimentGrid& grid, const std::optional<std::filesystem::path>& out) {
  grid.validate();
  if (grid.n_values.empty()) throw DomainError("run_fullrank_sweep: no dimensions given");
  std::vector<SymMatrix> truths;
  truths.reserve(grid.n_values.size());
  for (Index n : grid.n_values) truths.push_back(decaying_spectrum_matrix(n));
  std::vector<CellPlan> plan;
  for (std::size_t i = 0; i < grid.n_values.size(); ++i) {
    const Index n = grid.n_values[i];
    for (Index m : grid.m_for(n)) plan.push_back({n, m, 0.0, cell_key(n, m), &truths[i]});
  }
  // Rank 0 means full rank for FGD.
  auto cells = run_cells(plan, grid, 0, false);
  if (out) write_dat(fullrank_table(cells), *out);
  return cells;
}

DataTable phase_transition_table(const std::vector<CellResult>& cells) {
  DataTable t{{"m", "n", "err"}, {}};
  for (const auto& c : cells) t.rows.push_back({double(c.m), double(c.n), c.err});
  return t;
}

DataTable noisy_table(const std::vector<CellResult>& cells) {
  DataTable t{{"m", "noise", "err"}, {}};
  for (const auto& c : cells) t.rows.push_back({double(c.m), c.noise, c.err});
  return t;
}

DataTable fullrank_table(const std::vector<CellResult>& cells) { return phase_transition_table(cells); }

std::optional<Index> smallest_success_m(const std::vector<CellResult>& cells, Index n, double rate) {
  std::optional<Index> best;
  for (const auto& c : cells)
    if (c.n == n && 1.0 - c.err >= rate - 1e-12 && (!best || c.m < *best)) best = c.m;
  return best;
}

LevelSetFit fit_level_set(const std::vector<CellResult>& cells, double level) {
  LevelSetFit fit;
  fit.level = level;
  std::map<Index, std::vector<std::pair<double, double>>> by_n;  // n -> (m, err)
  for (const auto& c : cells) by_n[c.n].emplace_back(double(c.m), c.err);
  for (auto& [n, curve] : by_n) {
    std::sort(curve.begin(), curve.end());
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
      const auto [m0, e0] = curve[i];
      const auto [m1, e1] = curve[i + 1];
      if (e0 >= level && e1 < level) {
        fit.m.push_back(m0 + (e0 - level) / (e0 - e1) * (m1 - m0));
        fit.n.push_back(double(n));
        break;
      }
    }
  }
  const std::size_t k = fit.m.size();
  if (k < 2) {
    fit.slope = fit.intercept = fit.r2 = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  const double mx = std::accumulate(fit.m.begin(), fit.m.end(), 0.0) / double(k);
  const double my = std::accumulate(fit.n.begin(), fit.n.end(), 0.0) / double(k);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (fit.m[i] - mx) * (fit.m[i] - mx);
    sxy += (fit.m[i] - mx) * (fit.n[i] - my);
    syy += (fit.n[i] - my) * (fit.n[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------

const BenchEntry& BenchResult::entry(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw DomainError("BenchResult: no entry named '" + name + "'");
}

BenchResult run_solver_bench(const BenchConfig& cfg, const std::optional<std::filesystem::path>& out) {
  const SensingEnsemble z = sample_ensemble(cfg.n, cfg.m, derive_seed(cfg.seed, {0}));
  const SymMatrix x0 = planted_low_rank(cfg.n, cfg.rank);
  const Eigen::VectorXd b = measure(z, x0).b;

  SolverConfig base;
  base.feas_tol = cfg.tol;
  base.max_iters = cfg.max_iters;

  BenchResult result;
  auto run = [&](std::string name, SolverKind kind, Index rank, double step) {
    SolverConfig c = base;
    c.stepsize = step;
    if (rank > 0) c.rank = rank;
    BenchEntry e{std::move(name), kind, rank, {}, 0.0};
    try {
      SolveResult r = solve(kind, SymMatrix(cfg.n), z, b, c);
      e.error = recovery_error(r.x, x0);
      e.report = std::move(r.report);
    } catch (const NumericalError& err) {
      e.report.termination = Termination::NumericalFailure;
      e.report.message = err.what();
      e.error = std::numeric_limits<double>::infinity();
    }
    result.entries.push_back(std::move(e));
  };
  run("lbfgs", SolverKind::Lbfgs, 0, base.stepsize);
  run("nesterov", SolverKind::Nesterov, 0, cfg.nesterov_step);
  run("dr", SolverKind::DouglasRachford, 0, base.stepsize);
  run("fgd_lowrank", SolverKind::Fgd, cfg.rank, cfg.fgd_low_rank_step);
  run("fgd_fullrank", SolverKind::Fgd, cfg.n, cfg.fgd_full_rank_step);

  const auto& lb = result.entry("lbfgs").report;
  const auto& fl = result.entry("fgd_lowrank").report;
  result.lbfgs_fewest_iterations = true;
  result.fgd_low_rank_fewest_eigs = true;
  for (const auto& e : result.entries) {
    if (e.name != "lbfgs" && e.report.iterations <= lb.iterations) result.lbfgs_fewest_iterations = false;
    // The full-rank FGD run also factorizes once; ties within FGD are expected.
    if (e.kind != SolverKind::Fgd && e.report.eig_decompositions <= fl.eig_decompositions)
      result.fgd_low_rank_fewest_eigs = false;
  }

  result.table.columns = {"solver", "rank", "iterations", "time_ms", "eig_decompositions", "residual", "error",
                          "converged"};
  for (const auto& e : result.entries) {
    result.table.rows.push_back({double(static_cast<int>(e.kind)), double(e.rank), double(e.report.iterations),
                                 1e3 * e.report.wall_time, double(e.report.eig_decompositions),
                                 e.report.residual_history.empty() ? 0.0 : e.report.residual_history.back(), e.error,
                                 e.report.termination == Termination::Converged ? 1.0 : 0.0});
  }
  if (out) {
    write_dat(result.table, *out);
    for (const auto& e : result.entries) {
      DataTable h{{"iter", "loss"}, {}};
      for (std::size_t k = 0; k < e.report.residual_history.size(); ++k)
        h.rows.push_back({double(k), e.report.residual_history[k]});
      std::filesystem::path p = *out;
      p.replace_filename(out->stem().string() + "_" + e.name + ".dat");
      write_dat(h, p);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd default_demo_image() {
  // A ring with a bar through it over a soft diagonal gradient.
  constexpr int w = 16;
  Eigen::VectorXd img(w * w);
  for (int r = 0; r < w; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dy = r - 7.5, dx = c - 7.5;
      const double rad = std::sqrt(dx * dx + dy * dy);
      double v = 0.15 + 0.1 * (r + c) / (2.0 * (w - 1));
      if (rad > 4.5 && rad < 6.5) v = 1.0;
      if (r >= 7 && r <= 8 && c >= 4 && c <= 11) v = 0.8;
      img(r * w + c) = v;
    }
  }
  return img;
}

double sign_invariant_error(const Eigen::VectorXd& estimate, const Eigen::VectorXd& x0) {
  if (estimate.size() != x0.size()) throw DomainError("sign_invariant_error: length mismatch");
  const double denom = x0.norm();
  if (!(denom > 0)) throw DomainError("sign_invariant_error: reference vector is zero");
  return std::min((estimate - x0).norm(), (estimate + x0).norm()) / denom;
}

namespace {

Eigen::VectorXd leading_factor(const SymMatrix& x, const Eigen::VectorXd& x0) {
  auto [lambda, v] = top_eigenvector(x);
  Eigen::VectorXd est = std::sqrt(std::max(lambda, 0.0)) * v;
  if ((est - x0).norm() > (est + x0).norm()) est = -est;
  return est;
}

Index square_width(Index len) {
  const auto w = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(len))));
  return w * w == len ? w : 0;
}

}  // namespace

DemoResult demo_phase_retrieval(const Eigen::VectorXd& x0, Index m, std::uint64_t seed, const SolverConfig& cfg,
                                const std::optional<std::filesystem::path>& out_prefix) {
  if (x0.size() < 1) throw DomainError("demo_phase_retrieval: empty signal");
  const SensingEnsemble z = sample_ensemble(x0.size(), m, derive_seed(seed, {0}));
  const MeasurementSet meas = phase_retrieval_measure(x0, z);
  const Index n = x0.size();

  DemoResult res;
  res.x0 = x0;
  // Without the cone: minimum-norm point of the affine set.
  const SymMatrix x_affine = affine_project(SymMatrix(n), z, meas.b);
  res.x_nopsd = leading_factor(x_affine, x0);
  // With the cone: project 0 onto the PSD feasible set.
  SolveResult psd = lbfgs_dual_project(SymMatrix(n), z, meas.b, cfg);
  res.x_psd = leading_factor(psd.x, x0);
  res.psd_report = std::move(psd.report);
  res.rel_err_nopsd = sign_invariant_error(res.x_nopsd, x0);
  res.rel_err_psd = sign_invariant_error(res.x_psd, x0);

  if (out_prefix) {
    const std::string stem = out_prefix->string();
    write_vector(res.x0, stem + "_x0.txt");
    write_vector(res.x_nopsd, stem + "_nopsd.txt");
    write_vector(res.x_psd, stem + "_psd.txt");
    if (const Index w = square_width(n)) {
      write_pgm(res.x0, w, stem + "_x0.pgm");
      write_pgm(res.x_nopsd, w, stem + "_nopsd.pgm");
      write_pgm(res.x_psd, w, stem + "_psd.pgm");
    }
  }
  return res;
}

void write_vector(const Eigen::VectorXd& v, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_vector: cannot open '" + path.string() + "'");
  for (Index i = 0; i < v.size(); ++i) os << format_value(v(i)) << '\n';
  if (!os) throw std::runtime_error("write_vector: write to '" + path.string() + "' failed");
}

Eigen::VectorXd read_vector(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_vector: cannot open '" + path.string() + "'");
  std::vector<double> vals;
  for (double v; is >> v;) vals.push_back(v);
  if (!is.eof()) throw DomainError("read_vector: non-numeric content in '" + path.string() + "'");
  if (vals.empty()) throw DomainError("read_vector: '" + path.string() + "' is empty");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Index>(vals.size()));
}

void write_pgm(const Eigen::VectorXd& v, Index width, const std::filesystem::path& path) {
  if (width < 1 || v.size() % width != 0) throw DomainError("write_pgm: length is not a multiple of width");
  const Index height = v.size() / width;
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pgm: cannot open '" + path.string() + "'");
  os << "P2\n" << width << ' ' << height << "\n255\n";
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) {
      const long px = std::lround((v(r * width + c) - lo) * scale);
      os << (c ? " " : "") << std::clamp(px, 0L, 255L);
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write_pgm: write to '" + path.string() + "' failed");
}

Eigen::VectorXd read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_pgm: cannot open '" + path.string() + "'");
  auto next_token = [&]() {
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw DomainError("read_pgm: truncated header in '" + path.string() + "'");
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5") throw DomainError("read_pgm: unsupported format '" + magic + "'");
  const long w = std::stol(next_token()), h = std::stol(next_token()), maxval = std::stol(next_token());
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw DomainError("read_pgm: unsupported dimensions or depth");
  Eigen::VectorXd img(w * h);
  if (magic == "P2") {
    for (Index i = 0; i < img.size(); ++i) img(i) = std::stod(next_token()) / double(maxval);
  } else {
    is.get();  // single whitespace after maxval
    for (Index i = 0; i < img.size(); ++i) {
      const int c = is.get();
      if (c == EOF) throw DomainError("read_pgm: truncated pixel data");
      img(i) = double(c) / double(maxval);
    }
  }
  return img;
}

}  // namespace feasrop
