#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchoralign/dataset.hpp"
#include "anchoralign/model.hpp"
#include "anchoralign/objectives.hpp"
#include "anchoralign/optim.hpp"

namespace anchoralign {

enum class TrainMode { kRetrieval, kGeneration };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  LossConfig loss;
  ScheduleConfig schedule;  // total_steps is filled in by train()
  AdamWHyper adamw;
  TrainMode mode = TrainMode::kRetrieval;
  unsigned threads = 1;

  // Generation mode forces loss.normalize = false and loss.beta = 0.
  TrainConfig resolved() const;
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct StepRecord {
  std::size_t epoch;
  std::size_t step;
  double lr;
  double loss;
  double align;
  double structure;
};

struct EpochRecord {
  std::size_t epoch;
  double mean_loss;
  double val_score;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_score = 0.0;
  std::size_t total_steps = 0;
  nlohmann::json config;

  // One JSON object per line: a "config" header, then "step", "epoch" and a
  // closing "best" event. No wall-clock fields.
  std::vector<std::string> jsonl() const;
};

struct TrainResult {
  ProjectionModel best;  // as stored on disk (float32-rounded)
  ProjectionModel last;
  RunLog log;
};

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size);

// Mean of query->gallery and gallery->query Recall@{1,5,10} over every
// language of `val` (percent).
double validate(const ProjectionModel& model, const RetrievalCorpus& val, unsigned threads = 1);

// Each epoch shuffles the pairs with Rng(seed, epoch), runs forward -> loss ->
// backward -> AdamW with the warmup/decay schedule, then validates. The best
// epoch (earliest on ties) is kept. When out_dir is given it receives
// config.json, log.jsonl, best/ and last/.
using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const PairedDataset& pairs, const RetrievalCorpus& val, const ProjectionConfig& model_cfg,
                  const TrainConfig& cfg, const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const EpochCallback& on_epoch = {});

}  // namespace anchoralign
