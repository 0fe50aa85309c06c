#include "anchoralign/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "anchoralign/checkpoint.hpp"
#include "anchoralign/error.hpp"
#include "anchoralign/retrieval.hpp"
#include "anchoralign/rng.hpp"
#include "anchoralign/version.hpp"

namespace anchoralign {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(TrainMode mode) { return mode == TrainMode::kGeneration ? "generation" : "retrieval"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "retrieval") return TrainMode::kRetrieval;
  if (s == "generation") return TrainMode::kGeneration;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + s + "' (expected retrieval or generation)");
}

TrainConfig TrainConfig::resolved() const {
  TrainConfig c = *this;
  if (c.mode == TrainMode::kGeneration) {
    c.loss.normalize = false;
    c.loss.beta = 0.0;
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  loss.validate();
}

json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"mode", to_string(cfg.mode)},
          {"loss", to_json(cfg.loss)},
          {"schedule",
           {{"base_lr", cfg.schedule.base_lr},
            {"warmup_steps", cfg.schedule.warmup_steps},
            {"total_steps", cfg.schedule.total_steps},
            {"shape", "linear warmup from base_lr/warmup, linear decay to 0"}}},
          {"adamw",
           {{"beta1", cfg.adamw.beta1},
            {"beta2", cfg.adamw.beta2},
            {"eps", cfg.adamw.eps},
            {"weight_decay", cfg.adamw.weight_decay}}},
          {"mse_reduction", "mean"}};
}

std::vector<std::string> RunLog::jsonl() const {
  std::vector<std::string> lines;
  lines.reserve(steps.size() + epochs.size() + 2);
  lines.push_back(json({{"event", "config"}, {"config", config}}).dump());
  std::size_t s = 0;
  for (const auto& e : epochs) {
    for (; s < steps.size() && steps[s].epoch == e.epoch; ++s) {
      const auto& r = steps[s];
      lines.push_back(json({{"event", "step"},
                            {"epoch", r.epoch},
                            {"step", r.step},
                            {"lr", r.lr},
                            {"loss", r.loss},
                            {"align", r.align},
                            {"str", r.structure}})
                          .dump());
    }
    lines.push_back(
        json({{"event", "epoch"}, {"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"val_score", e.val_score}}).dump());
  }
  lines.push_back(json({{"event", "best"}, {"epoch", best_epoch}, {"val_score", best_score}}).dump());
  return lines;
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) { return (n + batch_size - 1) / batch_size; }

double validate(const ProjectionModel& model, const RetrievalCorpus& val, unsigned threads) {
  EvalOptions opts;
  opts.directions = {Direction::kQueryToGallery, Direction::kGalleryToQuery};
  opts.ks = {1, 5, 10};
  opts.threads = threads;
  const RecallReport r = evaluate_corpus(&model, val, opts);
  double sum = 0.0;
  for (const auto& e : r.results) sum += e.recall;
  return sum / double(r.results.size());
}

namespace {

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

}  // namespace

TrainResult train(const PairedDataset& pairs, const RetrievalCorpus& val, const ProjectionConfig& model_cfg,
                  const TrainConfig& raw_cfg, const std::optional<fs::path>& out_dir,
                  const EpochCallback& on_epoch) {
  TrainConfig cfg = raw_cfg.resolved();
  cfg.validate();
  model_cfg.validate();
  const std::size_t n = pairs.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "no training pairs");
  if (pairs.zm.d != model_cfg.d_in || pairs.ze.d != model_cfg.d_out) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pairs are " + std::to_string(pairs.zm.d) + "->" + std::to_string(pairs.ze.d) + " but model is " +
                    std::to_string(model_cfg.d_in) + "->" + std::to_string(model_cfg.d_out));
  }
  const std::size_t per_epoch = steps_per_epoch(n, cfg.batch_size);
  cfg.schedule.total_steps = cfg.epochs * per_epoch;
  cfg.schedule.validate();

  TrainResult result;
  RunLog& log = result.log;
  log.total_steps = cfg.schedule.total_steps;
  log.config = {{"toolkit_version", kToolkitVersion},
                {"model", to_json(model_cfg)},
                {"train", to_json(cfg)},
                {"pairs", n}};

  std::optional<std::ofstream> log_file;
  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream(*out_dir / "config.json", std::ios::trunc) << log.config.dump(2) << '\n';
    log_file.emplace(*out_dir / "log.jsonl", std::ios::trunc);
    if (!*log_file) throw Error(ErrorCode::kIo, "cannot write " + (*out_dir / "log.jsonl").string());
  }
  auto emit = [&](const json& j) {
    if (log_file) *log_file << j.dump() << '\n';
  };
  emit({{"event", "config"}, {"config", log.config}});

  ProjectionModel model = init_model(model_cfg);
  const Matrix x_all = pairs.zm.matrix();
  const Matrix t_all = pairs.ze.matrix();
  const auto names = model.parameter_names();
  AdamWState opt;
  std::size_t global_step = 0;
  bool have_best = false;

  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed, epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + lo, hi - lo);
      const Matrix x = gather(x_all, rows);
      const Matrix t = gather(t_all, rows);

      const ForwardResult fwd = forward(model, x);
      const CombinedLoss loss = training_loss(fwd.y, t, cfg.loss);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorCode::kNonFinite, "loss at step " + std::to_string(global_step));
      }
      ModelGrads grads = backward(model, fwd.cache, loss.grad);
      const double lr = lr_at(global_step, cfg.schedule);
      const auto params = model.parameters();
      const auto g = grads.tensors();
      adamw_step(params, g, opt, lr, cfg.adamw, names);

      StepRecord rec{epoch, global_step, lr, loss.loss, loss.align, loss.structure};
      log.steps.push_back(rec);
      emit({{"event", "step"},
            {"epoch", epoch},
            {"step", global_step},
            {"lr", lr},
            {"loss", rec.loss},
            {"align", rec.align},
            {"str", rec.structure}});
      loss_sum += loss.loss;
      ++global_step;
    }

    const ProjectionModel stored = round_to_storage(model);
    const double score = validate(stored, val, cfg.threads);
    log.epochs.push_back({epoch, loss_sum / double(per_epoch), score});
    emit({{"event", "epoch"}, {"epoch", epoch}, {"mean_loss", loss_sum / double(per_epoch)}, {"val_score", score}});
    if (!have_best || score > log.best_score) {
      have_best = true;
      log.best_score = score;
      log.best_epoch = epoch;
      result.best = stored;
      if (out_dir) save_checkpoint(stored, *out_dir / "best", cfg.loss);
    }
    if (on_epoch) on_epoch(log.epochs.back());
  }
  result.last = round_to_storage(model);
  if (out_dir) save_checkpoint(result.last, *out_dir / "last", cfg.loss);
  emit({{"event", "best"}, {"epoch", log.best_epoch}, {"val_score", log.best_score}});
  return result;
}

}  // namespace anchoralign
