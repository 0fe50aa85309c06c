#pragma once

#include <cstdint>
#include <vector>

#include "anchoralign/dataset.hpp"
#include "anchoralign/matrix.hpp"
#include "anchoralign/rng.hpp"

namespace anchoralign {

struct SyntheticTruth {
  Matrix map;                 // d_e x d_m
  std::vector<double> bias;   // d_e
  double noise_sigma = 0.0;
};

struct SynthOptions {
  std::uint64_t seed = 1;
  std::size_t n = 1000;        // training pairs
  std::size_t n_eval = 1000;   // held-out test corpus size (0 = none)
  std::size_t n_val = 500;     // held-out validation corpus size (0 = none)
  std::size_t d_m = 64;
  std::size_t d_e = 64;
  std::size_t map_rank = 64;
  double noise_sigma = 0.01;
  double bias_scale = 0.1;     // bias ~ bias_scale * N(0, I) / sqrt(d_e)
  bool identity_map = false;   // map = I (needs d_m == d_e)
};

struct SyntheticBenchmark {
  PairedDataset pairs;
  SyntheticTruth truth;
  RetrievalCorpus corpus;       // queries "en" = zm rows, gallery = mapped rows, 1:1
  RetrievalCorpus validation;   // same construction, disjoint draws
};

// zm rows are unit-normalized Gaussians; ze = map * zm + bias + sigma * noise,
// with map = Q_e diag(spectrum) Q_m^T having exactly map_rank nonzeros. The
// truth, training rows, validation rows and test rows use separate Rng
// streams, so changing n leaves the truth and both corpora unchanged.
SyntheticBenchmark synth_generate(const SynthOptions& opts);

// Orthogonal n x n matrix from Gram-Schmidt on a Gaussian draw.
Matrix random_orthogonal(std::size_t n, Rng& rng);

}  // namespace anchoralign
