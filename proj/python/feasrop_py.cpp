#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>

#include "feasrop/diagnostics.hpp"
#include "feasrop/errors.hpp"
#include "feasrop/harness.hpp"
#include "feasrop/random.hpp"
#include "feasrop/sensing.hpp"
#include "feasrop/solvers.hpp"
#include "feasrop/spectral.hpp"

namespace py = pybind11;
using namespace py::literals;

// Symmetric matrices cross the boundary as square float64 arrays. Input is
// symmetrized on the way in, same as SymMatrix::from_dense.
namespace pybind11::detail {
template <>
struct type_caster<feasrop::SymMatrix> {
  PYBIND11_TYPE_CASTER(feasrop::SymMatrix, const_name("numpy.ndarray[numpy.float64[n, n]]"));

  bool load(handle src, bool convert) {
    type_caster<Eigen::MatrixXd> inner;
    if (!inner.load(src, convert)) return false;
    const Eigen::MatrixXd& a = inner;
    if (a.rows() != a.cols() || a.rows() == 0) throw py::value_error("expected a non-empty square matrix");
    value = feasrop::SymMatrix::from_dense(a);
    return true;
  }

  static handle cast(const feasrop::SymMatrix& s, return_value_policy, handle) {
    return type_caster<Eigen::MatrixXd>::cast(s.dense(), return_value_policy::copy, handle());
  }
};
}  // namespace pybind11::detail

namespace {

using namespace feasrop;

SolverConfig config_or_default(const std::optional<SolverConfig>& cfg) { return cfg.value_or(SolverConfig{}); }

void bind_errors(py::module_& m) {
  // DomainError derives from std::invalid_argument and already maps to ValueError.
  auto& base = py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<NotPsdError>(m, "NotPsdError", base.ptr());
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError", base.ptr());
  py::register_exception<IllPosedProjectionError>(m, "IllPosedProjectionError", base.ptr());
  py::register_exception<LineSearchError>(m, "LineSearchError", base.ptr());
}

void bind_spectral(py::module_& m) {
  m.def(
      "eigh",
      [](const SymMatrix& a) {
        auto e = eigh(a);
        return py::make_tuple(e.values, e.vectors);
      },
      "a"_a, "Eigenvalues (descending) and eigenvectors as columns.");
  m.def("psd_project", py::overload_cast<const SymMatrix&>(&psd_project), "a"_a);
  m.def("tail_nuclear_norm", &tail_nuclear_norm, "a"_a, "p"_a);
  m.def("nuclear_norm", &nuclear_norm, "a"_a);
  m.def("best_rank_r_psd", &best_rank_r_psd, "a"_a, "r"_a);
  m.def("sym_sqrt", &sym_sqrt, "a"_a);
  m.def("top_eigenvector", &top_eigenvector, "a"_a);
  m.def("min_eigenvalue", &min_eigenvalue, "a"_a);
  m.def("spectral_norm", &spectral_norm, "a"_a);
}

void bind_sensing(py::module_& m) {
  py::enum_<Distribution>(m, "Distribution")
      .value("UNIT_SPHERE", Distribution::UnitSphere)
      .value("GAUSSIAN", Distribution::Gaussian);

  py::class_<SensingEnsemble>(m, "SensingEnsemble")
      .def(py::init<Eigen::MatrixXd, std::uint64_t, Distribution>(), "vectors"_a, "seed"_a = 0,
           "distribution"_a = Distribution::UnitSphere)
      .def_property_readonly("n", &SensingEnsemble::n)
      .def_property_readonly("m", &SensingEnsemble::m)
      .def_property_readonly("seed", &SensingEnsemble::seed)
      .def_property_readonly("distribution", &SensingEnsemble::distribution)
      .def_property_readonly("vectors", &SensingEnsemble::vectors)
      .def("__repr__", [](const SensingEnsemble& z) {
        return "SensingEnsemble(n=" + std::to_string(z.n()) + ", m=" + std::to_string(z.m()) + ")";
      });

  py::class_<MeasurementSet>(m, "MeasurementSet")
      .def_readonly("b", &MeasurementSet::b)
      .def_readonly("noise_l1", &MeasurementSet::noise_l1)
      .def_readonly("eta", &MeasurementSet::eta);

  m.def("sample_ensemble", &sample_ensemble, "n"_a, "m"_a, "seed"_a, "distribution"_a = Distribution::UnitSphere);
  m.def("apply", &apply, "z"_a, "x"_a);
  m.def("adjoint", &adjoint, "z"_a, "y"_a);
  m.def(
      "measure",
      [](const SensingEnsemble& z, const SymMatrix& x0, std::optional<double> noise_eps,
         std::optional<Eigen::VectorXd> eta, std::uint64_t seed) {
        if (noise_eps && eta) throw py::value_error("give noise_eps or eta, not both");
        NoiseModel model = noise::None{};
        if (noise_eps) model = noise::Uniform{*noise_eps};
        if (eta) model = noise::Explicit{*eta};
        return measure(z, x0, model, seed);
      },
      "z"_a, "x0"_a, py::kw_only(), "noise_eps"_a = py::none(), "eta"_a = py::none(), "seed"_a = 0);
  m.def("covariance_sigma", &covariance_sigma, "z"_a);

  py::class_<TransformContext>(m, "TransformContext")
      .def_readonly("sigma", &TransformContext::sigma)
      .def_readonly("v", &TransformContext::v)
      .def_readonly("v_inv", &TransformContext::v_inv)
      .def_readonly("sigma_min", &TransformContext::sigma_min)
      .def_readonly("sigma_max", &TransformContext::sigma_max);
  m.def("build_transform", &build_transform, "z"_a);
  m.def("g_forward", &g_forward, "ctx"_a, "x"_a);
  m.def("g_inverse", &g_inverse, "ctx"_a, "y"_a);
  m.def("transformed_apply", &transformed_apply, "ctx"_a, "z"_a, "y"_a);
  m.def("induced_asymmetric_apply", &induced_asymmetric_apply, "z"_a, "x"_a);
  m.def("phase_retrieval_measure", &phase_retrieval_measure, "x0"_a, "z"_a);
}

void bind_solvers(py::module_& m) {
  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &SolverConfig::max_iters)
      .def_readwrite("feas_tol", &SolverConfig::feas_tol)
      .def_readwrite("stepsize", &SolverConfig::stepsize)
      .def_readwrite("lbfgs_memory", &SolverConfig::lbfgs_memory)
      .def_readwrite("wolfe_c1", &SolverConfig::wolfe_c1)
      .def_readwrite("wolfe_c2", &SolverConfig::wolfe_c2)
      .def_readwrite("rank", &SolverConfig::rank)
      .def_readwrite("l1_budget", &SolverConfig::l1_budget)
      .def("validate", &SolverConfig::validate);

  py::enum_<Termination>(m, "Termination")
      .value("CONVERGED", Termination::Converged)
      .value("ITER_LIMIT", Termination::IterLimit)
      .value("NUMERICAL_FAILURE", Termination::NumericalFailure);

  py::class_<SolverReport>(m, "SolverReport")
      .def_readonly("iterations", &SolverReport::iterations)
      .def_readonly("residual_history", &SolverReport::residual_history)
      .def_readonly("final_l1_residual", &SolverReport::final_l1_residual)
      .def_readonly("wall_time", &SolverReport::wall_time)
      .def_readonly("termination", &SolverReport::termination)
      .def_readonly("eig_decompositions", &SolverReport::eig_decompositions)
      .def_readonly("message", &SolverReport::message);

  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("x", &SolveResult::x)
      .def_readonly("report", &SolveResult::report);

  py::class_<DualState>(m, "DualState")
      .def_readonly("y", &DualState::y)
      .def_readonly("x_of_y", &DualState::x_of_y)
      .def_readonly("theta", &DualState::theta)
      .def_readonly("grad", &DualState::grad);

  m.def("dual_theta", &dual_theta, "anchor"_a, "z"_a, "b"_a, "y"_a, "ridge"_a = 0.0);

  py::class_<LineSearchResult>(m, "LineSearchResult")
      .def_readonly("step", &LineSearchResult::step)
      .def_property_readonly("value", [](const LineSearchResult& r) { return r.point.value; })
      .def_property_readonly("slope", [](const LineSearchResult& r) { return r.point.slope; })
      .def_readonly("evaluations", &LineSearchResult::evaluations)
      .def_readonly("strong_wolfe", &LineSearchResult::strong_wolfe);
  m.def(
      "wolfe_line_search",
      [](const std::function<std::pair<double, double>(double)>& phi, double value0, double slope0, double step0,
         double c1, double c2) {
        auto line = [&](double t) {
          const auto [v, s] = phi(t);
          return LinePoint{v, s};
        };
        return wolfe_line_search(line, {value0, slope0}, step0, c1, c2);
      },
      "phi"_a, "value0"_a, "slope0"_a, "step0"_a = 1.0, "c1"_a = 1e-4, "c2"_a = 0.9,
      "phi(t) returns (value, slope) along an ascent direction.");

  const auto release = py::call_guard<py::gil_scoped_release>();
  m.def(
      "lbfgs_dual_project",
      [](const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
         const std::optional<SolverConfig>& cfg) { return lbfgs_dual_project(anchor, z, b, config_or_default(cfg)); },
      "anchor"_a, "z"_a, "b"_a, "config"_a = py::none(), release);
  m.def(
      "nesterov_feasibility",
      [](const SensingEnsemble& z, const Eigen::VectorXd& b, const std::optional<SolverConfig>& cfg) {
        return nesterov_feasibility(z, b, config_or_default(cfg));
      },
      "z"_a, "b"_a, "config"_a = py::none(), release);
  m.def(
      "douglas_rachford",
      [](const SensingEnsemble& z, const Eigen::VectorXd& b, const std::optional<SolverConfig>& cfg) {
        return douglas_rachford(z, b, config_or_default(cfg));
      },
      "z"_a, "b"_a, "config"_a = py::none(), release);
  m.def("fgd", &fgd, "z"_a, "b"_a, "config"_a, release);
  m.def("affine_project", &affine_project, "x"_a, "z"_a, "b"_a);
  m.def(
      "solve",
      [](const std::string& solver, const SymMatrix& anchor, const SensingEnsemble& z, const Eigen::VectorXd& b,
         const std::optional<SolverConfig>& cfg) {
        return solve(parse_solver(solver), anchor, z, b, config_or_default(cfg));
      },
      "solver"_a, "anchor"_a, "z"_a, "b"_a, "config"_a = py::none(), release,
      "solver is one of 'lbfgs', 'nesterov', 'dr', 'fgd'.");
}

void bind_diagnostics(py::module_& m) {
  m.def("srub_ratio", &srub_ratio, "z"_a, "x"_a);
  py::class_<SrubEstimate>(m, "SrubEstimate")
      .def_readonly("rank", &SrubEstimate::rank)
      .def_readonly("trials", &SrubEstimate::trials)
      .def_readonly("ratios", &SrubEstimate::ratios)
      .def_readonly("c1_hat", &SrubEstimate::c1_hat)
      .def_readonly("c2_hat", &SrubEstimate::c2_hat);
  m.def("srub_estimate", &srub_estimate, "z"_a, "r"_a, "trials"_a, "seed"_a);
  m.def(
      "random_rank_r_symmetric",
      [](Index n, Index r, std::uint64_t seed) {
        Rng rng(seed);
        return random_rank_r_symmetric(n, r, rng);
      },
      "n"_a, "r"_a, "seed"_a);

  py::class_<SigmaConditionReport>(m, "SigmaConditionReport")
      .def_readonly("ratio", &SigmaConditionReport::ratio)
      .def_readonly("min", &SigmaConditionReport::min)
      .def_readonly("scale", &SigmaConditionReport::scale)
      .def_readonly("pass_ratio", &SigmaConditionReport::pass_ratio)
      .def_readonly("pass_min", &SigmaConditionReport::pass_min);
  m.def("sigma_condition_check", &sigma_condition_check, "ctx"_a);

  py::class_<TraceFlatnessReport>(m, "TraceFlatnessReport")
      .def_readonly("trace", &TraceFlatnessReport::trace)
      .def_readonly("lo", &TraceFlatnessReport::lo)
      .def_readonly("hi", &TraceFlatnessReport::hi)
      .def_readonly("passed", &TraceFlatnessReport::pass);
  m.def("trace_flatness_check", &trace_flatness_check, "y"_a, "b"_a, "noise_l1"_a, "m"_a);

  m.def(
      "error_bound_rhs",
      [](double r, double tail_norm, double noise_l1, double m_count, double c1, double c2) {
        return error_bound_rhs({c1, c2, r, tail_norm, noise_l1, m_count});
      },
      "r"_a, "tail_norm"_a, "noise_l1"_a, "m"_a, "c1"_a = 1.0, "c2"_a = 1.0);
  m.def("decaying_spectrum_values", &decaying_spectrum_values, "n"_a);
  m.def("decaying_spectrum_matrix", &decaying_spectrum_matrix, "n"_a);
  m.def("decaying_spectrum_tail", &decaying_spectrum_tail, "n"_a, "r"_a);
  m.def("effective_rank", &effective_rank, "m"_a, "n"_a, "c"_a = 1.0);
  m.def("recovery_error", &recovery_error, "x"_a, "x0"_a);
}

void bind_harness(py::module_& m) {
  py::class_<ExperimentGrid>(m, "ExperimentGrid")
      .def(py::init<>())
      .def_readwrite("n_values", &ExperimentGrid::n_values)
      .def_readwrite("m_values", &ExperimentGrid::m_values)
      .def_readwrite("m_multipliers", &ExperimentGrid::m_multipliers)
      .def_readwrite("trials", &ExperimentGrid::trials)
      .def_readwrite("success_eps", &ExperimentGrid::success_eps)
      .def_readwrite("master_seed", &ExperimentGrid::master_seed)
      .def_property(
          "solver", [](const ExperimentGrid& g) { return std::string(to_string(g.solver)); },
          [](ExperimentGrid& g, const std::string& s) { g.solver = parse_solver(s); })
      .def_readwrite("solver_config", &ExperimentGrid::solver_config)
      .def_readwrite("noise_eps_values", &ExperimentGrid::noise_eps_values)
      .def_readwrite("jobs", &ExperimentGrid::jobs)
      .def("validate", &ExperimentGrid::validate)
      .def("m_for", &ExperimentGrid::m_for, "n"_a);

  py::class_<CellResult>(m, "CellResult")
      .def_readonly("n", &CellResult::n)
      .def_readonly("m", &CellResult::m)
      .def_readonly("noise", &CellResult::noise)
      .def_readonly("err", &CellResult::err)
      .def_readonly("trials_run", &CellResult::trials_run)
      .def_readonly("numerical_failures", &CellResult::numerical_failures);

  const auto release = py::call_guard<py::gil_scoped_release>();
  m.def("planted_low_rank", &planted_low_rank, "n"_a, "r"_a);
  m.def("run_phase_transition", &run_phase_transition, "grid"_a, "rank"_a, "out"_a = py::none(), release);
  m.def("run_noisy_sweep", &run_noisy_sweep, "grid"_a, "n"_a = 50, "rank"_a = 3, "out"_a = py::none(), release);
  m.def("run_fullrank_sweep", &run_fullrank_sweep, "grid"_a, "out"_a = py::none(), release);
  m.def("smallest_success_m", &smallest_success_m, "cells"_a, "n"_a, "rate"_a = 0.9);

  py::class_<LevelSetFit>(m, "LevelSetFit")
      .def_readonly("level", &LevelSetFit::level)
      .def_readonly("m", &LevelSetFit::m)
      .def_readonly("n", &LevelSetFit::n)
      .def_readonly("slope", &LevelSetFit::slope)
      .def_readonly("intercept", &LevelSetFit::intercept)
      .def_readonly("r2", &LevelSetFit::r2);
  m.def("fit_level_set", &fit_level_set, "cells"_a, "level"_a);

  py::class_<BenchConfig>(m, "BenchConfig")
      .def(py::init<>())
      .def_readwrite("n", &BenchConfig::n)
      .def_readwrite("m", &BenchConfig::m)
      .def_readwrite("rank", &BenchConfig::rank)
      .def_readwrite("tol", &BenchConfig::tol)
      .def_readwrite("max_iters", &BenchConfig::max_iters)
      .def_readwrite("seed", &BenchConfig::seed)
      .def_readwrite("nesterov_step", &BenchConfig::nesterov_step)
      .def_readwrite("fgd_low_rank_step", &BenchConfig::fgd_low_rank_step)
      .def_readwrite("fgd_full_rank_step", &BenchConfig::fgd_full_rank_step);

  py::class_<BenchEntry>(m, "BenchEntry")
      .def_readonly("name", &BenchEntry::name)
      .def_property_readonly("solver", [](const BenchEntry& e) { return std::string(to_string(e.kind)); })
      .def_readonly("rank", &BenchEntry::rank)
      .def_readonly("report", &BenchEntry::report)
      .def_readonly("error", &BenchEntry::error);

  py::class_<BenchResult>(m, "BenchResult")
      .def_readonly("entries", &BenchResult::entries)
      .def_readonly("lbfgs_fewest_iterations", &BenchResult::lbfgs_fewest_iterations)
      .def_readonly("fgd_low_rank_fewest_eigs", &BenchResult::fgd_low_rank_fewest_eigs)
      .def("entry", &BenchResult::entry, "name"_a, py::return_value_policy::reference_internal);
  m.def("run_solver_bench", &run_solver_bench, "config"_a = BenchConfig{}, "out"_a = py::none(), release);

  py::class_<DemoResult>(m, "DemoResult")
      .def_readonly("x0", &DemoResult::x0)
      .def_readonly("x_nopsd", &DemoResult::x_nopsd)
      .def_readonly("x_psd", &DemoResult::x_psd)
      .def_readonly("rel_err_nopsd", &DemoResult::rel_err_nopsd)
      .def_readonly("rel_err_psd", &DemoResult::rel_err_psd)
      .def_readonly("psd_report", &DemoResult::psd_report);
  m.def("default_demo_image", &default_demo_image);
  m.def("sign_invariant_error", &sign_invariant_error, "estimate"_a, "x0"_a);
  m.def(
      "demo_phase_retrieval",
      [](const Eigen::VectorXd& x0, Index m_count, std::uint64_t seed, const std::optional<SolverConfig>& cfg,
         const std::optional<std::filesystem::path>& out_prefix) {
        return demo_phase_retrieval(x0, m_count, seed, config_or_default(cfg), out_prefix);
      },
      "x0"_a, "m"_a, "seed"_a, "config"_a = py::none(), "out_prefix"_a = py::none(), release);
}

}  // namespace

PYBIND11_MODULE(_feasrop, m) {
  m.doc() = "PSD matrix recovery from rank-one projections by feasibility projection.";
  bind_errors(m);
  bind_spectral(m);
  bind_sensing(m);
  bind_solvers(m);
  bind_diagnostics(m);
  bind_harness(m);
}
