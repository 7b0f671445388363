#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <unistd.h>

#include "feasrop/dat.hpp"
#include "feasrop/errors.hpp"
#include "feasrop/harness.hpp"

using namespace feasrop;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("feasrop_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

ExperimentGrid grid_for(std::vector<Index> n, std::vector<Index> m, int trials) {
  ExperimentGrid g;
  g.n_values = std::move(n);
  g.m_values = std::move(m);
  g.trials = trials;
  return g;
}

}  // namespace

TEST_CASE("write_dat") {
  std::ostringstream os;
  write_dat(DataTable{{"m", "n", "err"}, {{100, 16, 0}}}, os);
  CHECK(os.str() == "m n err\n100 16 0\n");

  const DataTable t{{"a", "b"}, {{0.1, -1e-300}, {1.0 / 3.0, 12345678901234567.0}}};
  std::stringstream ss;
  write_dat(t, ss);
  const DataTable back = read_dat(ss);
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b")[1] == 12345678901234567.0);
  CHECK_THROWS_AS(back.column_index("c"), DomainError);

  std::ostringstream ragged;
  CHECK_THROWS_AS(write_dat(DataTable{{"a", "b"}, {{1}}}, ragged), DomainError);
  CHECK_THROWS_AS(write_dat(t, fs::path("/nonexistent-dir/x.dat")), std::runtime_error);
}

TEST_CASE("grid validation") {
  ExperimentGrid g = grid_for({10}, {20}, 1);
  CHECK_NOTHROW(g.validate());
  g.trials = 0;
  CHECK_THROWS_AS(g.validate(), DomainError);
  g = grid_for({10}, {}, 1);
  CHECK_THROWS_AS(g.validate(), DomainError);
  g.m_multipliers = {1.5, 2};
  CHECK(g.m_for(10) == std::vector<Index>{15, 20});
  g.success_eps = 0;
  CHECK_THROWS_AS(g.validate(), DomainError);
}

TEST_CASE("planted matrices and anchors") {
  const SymMatrix x0 = planted_low_rank(5, 2);
  CHECK(x0.trace() == 2.0);
  CHECK(spectral_norm(x0) == 1.0);
  Rng a(1), b(2);
  const SymMatrix c1 = random_symmetric_anchor(6, a), c2 = random_symmetric_anchor(6, a);
  CHECK_FALSE(c1 == c2);
  CHECK_FALSE(c1 == random_symmetric_anchor(6, b));
  CHECK_THROWS_AS(planted_low_rank(3, 4), DomainError);
}

TEST_CASE("phase transition extremes") {
  SUBCASE("fully determined sampling always succeeds") {
    const auto cells = run_phase_transition(grid_for({16}, {136}, 3), 1);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].err == 0.0);
  }
  SUBCASE("deep undersampling fails, linear oversampling succeeds") {
    const auto cells = run_phase_transition(grid_for({20}, {40, 160}, 10), 1);
    CHECK(cells[0].err >= 0.5);
    CHECK(cells[1].err <= 0.1);
    CHECK(cells[0].trials_run == 10);
  }
}

TEST_CASE("failure rate is nonincreasing in m up to Monte-Carlo slack") {
  ExperimentGrid g = grid_for({12}, {}, 10);
  g.m_multipliers = {1, 1.5, 2, 2.5, 3, 4, 5};
  const auto cells = run_phase_transition(g, 1);
  for (std::size_t i = 1; i < cells.size(); ++i) {
    CHECK(cells[i].err >= 0.0);
    CHECK(cells[i].err <= 1.0);
    CHECK(cells[i].err <= cells[i - 1].err + 0.15);
  }
  const auto m90 = smallest_success_m(cells, 12);
  REQUIRE(m90.has_value());
  CHECK(*m90 <= 60);
  CHECK_FALSE(smallest_success_m(cells, 13).has_value());
}

TEST_CASE("experiment output is deterministic and independent of worker count") {
  TempDir dir;
  ExperimentGrid g = grid_for({8, 10}, {}, 4);
  g.m_multipliers = {2, 3};
  run_phase_transition(g, 1, dir.path / "a.dat");
  g.jobs = 3;
  run_phase_transition(g, 1, dir.path / "b.dat");
  CHECK(slurp(dir.path / "a.dat") == slurp(dir.path / "b.dat"));
  CHECK(slurp(dir.path / "a.dat").rfind("m n err\n", 0) == 0);

  g.master_seed = 2;
  const auto other = run_phase_transition(g, 1);
  const auto first = read_dat(dir.path / "a.dat");
  bool differs = false;
  for (std::size_t i = 0; i < other.size(); ++i) differs |= other[i].err != first.rows[i][2];
  CHECK(differs);
}

TEST_CASE("noisy sweep") {
  ExperimentGrid g;
  g.m_values = {300};
  g.noise_eps_values = {0.0, 1e-2};
  g.trials = 2;
  TempDir dir;
  const auto cells = run_noisy_sweep(g, 50, 3, dir.path / "noisy.dat");
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].noise == 0.0);
  CHECK(cells[0].err < 1e-3);
  CHECK(cells[1].err > 10 * cells[0].err);
  const DataTable t = read_dat(dir.path / "noisy.dat");
  CHECK(t.columns == std::vector<std::string>{"m", "noise", "err"});

  ExperimentGrid ten;
  ten.m_values = {500};
  ten.noise_eps_values = {1e-3, 1e-2};
  ten.trials = 3;
  const auto scale = run_noisy_sweep(ten, 50, 3);
  const double ratio = scale[1].err / scale[0].err;
  CHECK(ratio >= 3);
  CHECK(ratio <= 30);

  ExperimentGrid empty = g;
  empty.noise_eps_values.clear();
  CHECK_THROWS_AS(run_noisy_sweep(empty), DomainError);
}

TEST_CASE("full-rank sweep at the fully determined count") {
  const auto cells = run_fullrank_sweep(grid_for({10}, {55}, 2));
  CHECK(cells[0].err < 1e-3);
}

TEST_CASE("level-set fit recovers an exact line") {
  // err(n, m) = 1 − m/(4n) crosses level ℓ at m = 4(1 − ℓ)n.
  std::vector<CellResult> cells;
  for (Index n : {10, 20, 30})
    for (Index m = n; m <= 4 * n; m += n / 2) cells.push_back({n, m, 0, 1.0 - double(m) / (4.0 * double(n)), 1, 0});
  const auto fit = fit_level_set(cells, 0.5);
  CHECK(fit.m.size() == 3);
  CHECK(fit.slope == doctest::Approx(0.5));
  CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fit.r2 == doctest::Approx(1.0));
  CHECK(std::isnan(fit_level_set(cells, 5.0).slope));
}

TEST_CASE("solver bench writes its summary and residual histories") {
  TempDir dir;
  BenchConfig cfg;
  cfg.n = 8;
  cfg.m = 40;
  cfg.max_iters = 300;
  const auto r = run_solver_bench(cfg, dir.path / "bench.dat");
  CHECK(r.entries.size() == 5);
  CHECK(r.entry("fgd_lowrank").report.eig_decompositions == 1);
  CHECK(r.entry("fgd_fullrank").rank == 8);
  CHECK_THROWS_AS(r.entry("admm"), DomainError);
  const DataTable t = read_dat(dir.path / "bench.dat");
  CHECK(t.rows.size() == 5);
  CHECK(t.column_index("eig_decompositions") < t.columns.size());
  for (const auto& e : r.entries) {
    const DataTable h = read_dat(dir.path / ("bench_" + e.name + ".dat"));
    CHECK(h.rows.size() == e.report.residual_history.size());
  }
}

TEST_CASE("phase retrieval demo") {
  SUBCASE("planted basis vector") {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(8);
    x0[0] = 1;
    const auto r = demo_phase_retrieval(x0, 80, 3);
    CHECK(r.rel_err_psd < 1e-3);
    CHECK(sign_invariant_error(r.x_psd, x0) == r.rel_err_psd);
  }
  SUBCASE("files") {
    TempDir dir;
    Eigen::VectorXd x0(9);
    x0 << 1, 0.5, 0, 0.2, 0.9, 0.1, 0.4, 0.3, 0.7;
    const auto r = demo_phase_retrieval(x0, 60, 4, {}, dir.path / "demo");
    for (const char* s : {"x0", "nopsd", "psd"}) {
      CHECK(fs::exists(dir.path / ("demo_" + std::string(s) + ".txt")));
      CHECK(fs::exists(dir.path / ("demo_" + std::string(s) + ".pgm")));
    }
    CHECK(read_vector(dir.path / "demo_psd.txt") == r.x_psd);
  }
  CHECK(sign_invariant_error(-Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)) == 0.0);
}

TEST_CASE("image and vector files round-trip") {
  TempDir dir;
  const Eigen::VectorXd img = default_demo_image();
  CHECK(img.size() == 256);
  CHECK(img.minCoeff() >= 0.0);
  CHECK(img.maxCoeff() <= 1.0);
  write_pgm(img, 16, dir.path / "a.pgm");
  const Eigen::VectorXd back = read_pgm(dir.path / "a.pgm");
  CHECK((back - (img.array() - img.minCoeff()).matrix() / (img.maxCoeff() - img.minCoeff())).lpNorm<Eigen::Infinity>() <=
        0.5 / 255 + 1e-12);

  {
    std::ofstream os(dir.path / "b.pgm", std::ios::binary);
    os << "P5\n# comment\n2 1\n255\n" << char(0) << char(255);
  }
  CHECK(read_pgm(dir.path / "b.pgm") == Eigen::Vector2d(0, 1));

  write_vector(img, dir.path / "v.txt");
  CHECK(read_vector(dir.path / "v.txt") == img);
  CHECK_THROWS_AS(write_pgm(img, 15, dir.path / "c.pgm"), DomainError);
}
