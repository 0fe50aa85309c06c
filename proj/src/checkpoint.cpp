#include "anchoralign/checkpoint.hpp"

#include <fstream>

#include "anchoralign/embedding.hpp"
#include "anchoralign/error.hpp"
#include "anchoralign/version.hpp"

namespace anchoralign {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const ProjectionConfig& cfg) {
  return {{"d_in", cfg.d_in}, {"d_out", cfg.d_out}, {"n_layers", cfg.n_layers}, {"skip", cfg.skip}, {"seed", cfg.seed}};
}

json to_json(const LossConfig& cfg) {
  return {{"kind", to_string(cfg.kind)}, {"lambda", cfg.lambda}, {"beta", cfg.beta}, {"normalize", cfg.normalize}};
}

ProjectionConfig projection_config_from_json(const json& j) {
  ProjectionConfig c;
  c.d_in = j.at("d_in").get<std::size_t>();
  c.d_out = j.at("d_out").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<int>();
  c.skip = j.at("skip").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

LossConfig loss_config_from_json(const json& j) {
  LossConfig c;
  c.kind = parse_loss_kind(j.at("kind").get<std::string>());
  c.lambda = j.at("lambda").get<double>();
  c.beta = j.at("beta").get<double>();
  c.normalize = j.at("normalize").get<bool>();
  return c;
}

namespace {

std::vector<std::string> row_ids(std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

EmbeddingSet read_tensor(const fs::path& path, std::size_t rows, std::size_t cols) {
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingTensor, path.string());
  EmbeddingSet t = read_emb1(path);
  if (t.n != rows || t.d != cols) {
    throw Error(ErrorCode::kShapeMismatch, path.string() + " holds " + std::to_string(t.n) + "x" +
                                               std::to_string(t.d) + ", config expects " +
                                               std::to_string(rows) + "x" + std::to_string(cols));
  }
  return t;
}

}  // namespace

void save_checkpoint(const ProjectionModel& model, const fs::path& dir, const std::optional<LossConfig>& loss) {
  fs::create_directories(dir);
  json cfg = {{"toolkit_version", kToolkitVersion}, {"model", to_json(model.config)}};
  cfg["loss"] = loss ? to_json(*loss) : json(nullptr);
  json tensors = json::array();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    const std::string stem = "layer" + std::to_string(i);
    write_emb1(EmbeddingSet::from_matrix(layer.weight, row_ids(layer.out()), "param"), dir / (stem + ".weight.emb1"));
    write_emb1(EmbeddingSet::from_matrix(Matrix(1, layer.out(), layer.bias), {"bias"}, "param"),
               dir / (stem + ".bias.emb1"));
    tensors.push_back(stem + ".weight");
    tensors.push_back(stem + ".bias");
  }
  cfg["tensors"] = tensors;
  std::ofstream f(dir / "config.json", std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + (dir / "config.json").string());
  f << cfg.dump(2) << '\n';
}

ProjectionModel load_checkpoint(const fs::path& dir) {
  const fs::path cfg_path = dir / "config.json";
  std::ifstream f(cfg_path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + cfg_path.string());
  ProjectionConfig cfg;
  try {
    cfg = projection_config_from_json(json::parse(f).at("model"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, cfg_path.string() + ": " + e.what());
  }
  cfg.validate();

  ProjectionModel m;
  m.config = cfg;
  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::size_t in = i == 0 ? cfg.d_in : cfg.d_out;
    const std::string stem = "layer" + std::to_string(i);
    const EmbeddingSet w = read_tensor(dir / (stem + ".weight.emb1"), cfg.d_out, in);
    const EmbeddingSet b = read_tensor(dir / (stem + ".bias.emb1"), 1, cfg.d_out);
    m.layers.push_back({w.matrix(), std::vector<double>(b.values.begin(), b.values.end()),
                        cfg.skip && in == cfg.d_out});
  }
  return m;
}

ProjectionModel round_to_storage(const ProjectionModel& model) {
  ProjectionModel out = model;
  for (auto& layer : out.layers) {
    for (double& v : layer.weight.data()) v = static_cast<float>(v);
    for (double& v : layer.bias) v = static_cast<float>(v);
  }
  return out;
}

}  // namespace anchoralign
