#pragma once

#include "srlf/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace srlf {

using Rng = std::mt19937_64;

/// Independent, reproducible streams derived from one run seed.
enum class Stream : std::uint64_t {
  init = 1,
  shuffle = 2,
  policy = 3,
  synth = 4,
  split = 5,
  embeddings = 6,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

/// Uniform on +-sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  return uniform_matrix(fan_in, fan_out, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace srlf
