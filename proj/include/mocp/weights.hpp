#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace mocp {

/// Nonnegative objective weights on a regular simplex grid with step
/// 1/divisions, each rescaled to unit Euclidean norm. m <= 3 enumerates the
/// grid exactly; larger m draws (divisions + 1) * m uniform simplex samples
/// from a generator seeded with `seed`.
inline std::vector<Eigen::VectorXd> simplex_grid(int m, int divisions, std::uint64_t seed = 42) {
  if (m < 1) throw std::invalid_argument("objective count must be positive");
  if (divisions < 1) throw std::invalid_argument("simplex grid needs at least one division");
  std::vector<Eigen::VectorXd> out;
  auto push = [&](Eigen::VectorXd w) {
    w /= w.norm();
    out.push_back(std::move(w));
  };
  if (m == 1) {
    push(Eigen::VectorXd::Ones(1));
  } else if (m == 2) {
    for (int k = 0; k <= divisions; ++k) {
      Eigen::VectorXd w(2);
      w << static_cast<double>(divisions - k), static_cast<double>(k);
      push(w);
    }
  } else if (m == 3) {
    for (int a = divisions; a >= 0; --a)
      for (int b = divisions - a; b >= 0; --b) {
        Eigen::VectorXd w(3);
        w << a, b, divisions - a - b;
        push(w);
      }
  } else {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    for (int s = 0; s < (divisions + 1) * m; ++s) {
      Eigen::VectorXd w(m);
      for (int j = 0; j < m; ++j) w[j] = expo(rng);
      push(w);
    }
  }
  return out;
}

/// Equal weights with unit Euclidean norm.
inline Eigen::VectorXd uniform_weights(int m) {
  return Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
}

}  // namespace mocp
