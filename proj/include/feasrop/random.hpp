#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace feasrop {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a sub-stream identified by a path of indices below `master`.
/// The result depends only on the arguments, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t k : path) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
  return s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  /// Column-major fill, column by column.
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = normal();
    return a;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace feasrop
