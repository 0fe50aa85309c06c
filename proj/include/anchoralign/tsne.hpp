#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "anchoralign/matrix.hpp"

namespace anchoralign {

struct TsneOptions {
  double perplexity = 32.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  double init_stddev = 1e-4;
  bool adaptive_gains = false;  // delta-bar-delta per-coordinate step gains
  double entropy_tolerance = 1e-10;  // bits
  std::size_t max_search_steps = 200;

  nlohmann::json to_json() const;
};

struct Affinities {
  Matrix conditional;                     // row i = p_{j|i}
  std::vector<double> betas;              // 1 / (2 sigma_i^2)
  std::vector<double> realized_perplexity;
};

// Per-row Gaussian bandwidth by bisection on beta so that the conditional
// entropy equals log2(perplexity).
Affinities calibrate_affinities(const Matrix& points, const TsneOptions& opts);

// p_ij = (p_{j|i} + p_{i|j}) / (2n)
Matrix symmetrize(const Matrix& conditional);

// KL(P || Q) for a layout y with Student-t(1) similarities.
double tsne_kl(const Matrix& p, const Matrix& y);

struct TsneResult {
  Matrix embedding;  // n x 2
  double initial_kl = 0.0;
  double final_kl = 0.0;
  std::vector<double> realized_perplexity;
};

// Exact O(n^2) t-SNE. Requires 3 * perplexity < n <= 5000.
TsneResult tsne(const Matrix& points, const TsneOptions& opts);

}  // namespace anchoralign
