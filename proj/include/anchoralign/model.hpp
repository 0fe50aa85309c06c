#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "anchoralign/matrix.hpp"

namespace anchoralign {

struct ProjectionConfig {
  std::size_t d_in = 768;   // multilingual width d_m
  std::size_t d_out = 768;  // multimodal width d_e
  int n_layers = 2;         // 1, 2 or 4
  bool skip = false;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ProjectionConfig&, const ProjectionConfig&) = default;
};

struct AffineLayer {
  Matrix weight;              // out x in
  std::vector<double> bias;   // out
  bool residual = false;      // adds the layer input; only on square layers

  std::size_t in() const noexcept { return weight.cols(); }
  std::size_t out() const noexcept { return weight.rows(); }
};

// Stack of affine layers with no nonlinearity. Layer 0 maps d_in -> d_out,
// the rest d_out -> d_out.
struct ProjectionModel {
  ProjectionConfig config;
  std::vector<AffineLayer> layers;

  std::size_t parameter_count() const;
  // Flat views over every parameter tensor, in layer order (weight, bias).
  std::vector<std::span<double>> parameters();
  std::vector<std::string> parameter_names() const;
};

// W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from Rng(config.seed); b = 0.
ProjectionModel init_model(const ProjectionConfig& config);

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
};

struct ForwardResult {
  Matrix y;
  ForwardCache cache;
};

struct LayerGrad {
  Matrix weight;
  std::vector<double> bias;
};

struct ModelGrads {
  std::vector<LayerGrad> layers;
  Matrix dx;

  std::vector<std::span<double>> tensors();
};

ForwardResult forward(const ProjectionModel& model, const Matrix& x);
// Output only, no cache.
Matrix project(const ProjectionModel& model, const Matrix& x);
ModelGrads backward(const ProjectionModel& model, const ForwardCache& cache, const Matrix& dy);

}  // namespace anchoralign
