#include "anchoralign/model.hpp"

#include <cmath>

#include "anchoralign/error.hpp"
#include "anchoralign/rng.hpp"

namespace anchoralign {

void ProjectionConfig::validate() const {
  if (n_layers != 1 && n_layers != 2 && n_layers != 4) {
    throw Error(ErrorCode::kInvalidArgument,
                "n_layers must be 1, 2 or 4, got " + std::to_string(n_layers));
  }
  if (d_in == 0 || d_out == 0) throw Error(ErrorCode::kInvalidArgument, "model widths must be > 0");
}

std::size_t ProjectionModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.weight.size() + l.bias.size();
  return total;
}

std::vector<std::span<double>> ProjectionModel::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.data());
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::string> ProjectionModel::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.push_back("layer" + std::to_string(i) + ".weight");
    out.push_back("layer" + std::to_string(i) + ".bias");
  }
  return out;
}

std::vector<std::span<double>> ModelGrads::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.data());
    out.emplace_back(l.bias);
  }
  return out;
}

ProjectionModel init_model(const ProjectionConfig& config) {
  config.validate();
  ProjectionModel m;
  m.config = config;
  Rng rng(config.seed);
  for (int l = 0; l < config.n_layers; ++l) {
    const std::size_t in = l == 0 ? config.d_in : config.d_out;
    AffineLayer layer{Matrix(config.d_out, in), std::vector<double>(config.d_out, 0.0),
                      config.skip && in == config.d_out};
    const double bound = 1.0 / std::sqrt(double(in));
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

namespace {

Matrix apply_layer(const AffineLayer& layer, const Matrix& input) {
  Matrix h = matmul_bt(input, layer.weight);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    auto r = h.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias[j];
    if (layer.residual) {
      auto in = input.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += in[j];
    }
  }
  return h;
}

void check_input(const ProjectionModel& model, const Matrix& x) {
  if (model.layers.empty()) throw Error(ErrorCode::kInvalidArgument, "model has no layers");
  if (x.cols() != model.layers.front().in()) {
    throw Error(ErrorCode::kShapeMismatch, "input " + x.shape() + " but model expects " +
                                               std::to_string(model.layers.front().in()) + " columns");
  }
}

}  // namespace

ForwardResult forward(const ProjectionModel& model, const Matrix& x) {
  check_input(model, x);
  ForwardResult r;
  r.cache.inputs.reserve(model.layers.size());
  Matrix h = x;
  for (const auto& layer : model.layers) {
    Matrix next = apply_layer(layer, h);
    r.cache.inputs.push_back(std::move(h));
    h = std::move(next);
  }
  r.y = std::move(h);
  return r;
}

Matrix project(const ProjectionModel& model, const Matrix& x) {
  check_input(model, x);
  Matrix h = x;
  for (const auto& layer : model.layers) h = apply_layer(layer, h);
  return h;
}

ModelGrads backward(const ProjectionModel& model, const ForwardCache& cache, const Matrix& dy) {
  if (cache.inputs.size() != model.layers.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cache holds " + std::to_string(cache.inputs.size()) +
                                               " layer inputs for a " +
                                               std::to_string(model.layers.size()) + "-layer model");
  }
  const std::size_t batch = cache.inputs.front().rows();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (cache.inputs[l].rows() != batch || cache.inputs[l].cols() != model.layers[l].in()) {
      throw Error(ErrorCode::kShapeMismatch, "stale cache at layer " + std::to_string(l));
    }
  }
  if (dy.rows() != batch || dy.cols() != model.layers.back().out()) {
    throw Error(ErrorCode::kShapeMismatch,
                "dy " + dy.shape() + " does not match forward output " + std::to_string(batch) + "x" +
                    std::to_string(model.layers.back().out()));
  }

  ModelGrads g;
  g.layers.resize(model.layers.size());
  Matrix dh = dy;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const AffineLayer& layer = model.layers[l];
    const Matrix& input = cache.inputs[l];
    g.layers[l].weight = matmul_at(dh, input);
    g.layers[l].bias.assign(layer.out(), 0.0);
    for (std::size_t i = 0; i < dh.rows(); ++i) {
      auto r = dh.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) g.layers[l].bias[j] += r[j];
    }
    Matrix dinput = matmul(dh, layer.weight);
    if (layer.residual) dinput = add(dinput, dh);
    dh = std::move(dinput);
  }
  g.dx = std::move(dh);
  return g;
}

}  // namespace anchoralign
