#include <doctest.h>

#include <fstream>
#include <sstream>

#include "anchoralign/checkpoint.hpp"
#include "anchoralign/error.hpp"
#include "anchoralign/retrieval.hpp"
#include "anchoralign/synth.hpp"
#include "anchoralign/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace anchoralign;

namespace {

SyntheticBenchmark small_bench(std::size_t n = 300, std::size_t d = 8, std::uint64_t seed = 4) {
  SynthOptions o;
  o.seed = seed;
  o.n = n;
  o.d_m = o.d_e = o.map_rank = d;
  o.n_val = 60;
  o.n_eval = 60;
  return synth_generate(o);
}

ProjectionConfig model_cfg(std::size_t d, int layers = 2, bool skip = false) {
  ProjectionConfig pc;
  pc.d_in = pc.d_out = d;
  pc.n_layers = layers;
  pc.skip = skip;
  pc.seed = 5;
  return pc;
}

TrainConfig quick(std::size_t epochs = 3, std::size_t batch = 32) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.seed = 9;
  tc.schedule.warmup_steps = 5;
  tc.schedule.base_lr = 1e-2;
  return tc;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("identity task trains to zero loss") {
  SynthOptions o;
  o.seed = 2;
  o.n = 256;
  o.d_m = o.d_e = o.map_rank = 16;
  o.noise_sigma = 0.0;
  o.bias_scale = 0.0;
  o.identity_map = true;
  o.n_val = 50;
  o.n_eval = 0;
  const auto b = synth_generate(o);
  REQUIRE(b.pairs.zm.values == b.pairs.ze.values);
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;
  tc.seed = 1;
  tc.schedule.base_lr = 3e-2;
  tc.schedule.warmup_steps = 10;
  const auto r = train(b.pairs, b.validation, model_cfg(16, 1), tc);
  CHECK(r.log.epochs.back().mean_loss < 1e-6);
  CHECK(r.log.best_score == 100.0);
}

TEST_CASE("steps, schedule and best epoch bookkeeping") {
  const auto b = small_bench(300);
  const auto tc = quick(4, 64);
  const auto r = train(b.pairs, b.validation, model_cfg(8), tc);
  CHECK(steps_per_epoch(300, 64) == 5);
  CHECK(r.log.total_steps == 20);
  CHECK(r.log.steps.size() == 20);
  CHECK(r.log.epochs.size() == 4);
  CHECK(r.log.steps.back().lr == doctest::Approx(lr_at(19, ScheduleConfig{1e-2, 5, 20})));
  double best = -1;
  std::size_t best_epoch = 0;
  for (const auto& e : r.log.epochs) {
    if (e.val_score > best) {
      best = e.val_score;
      best_epoch = e.epoch;
    }
  }
  CHECK(r.log.best_score == best);
  CHECK(r.log.best_epoch == best_epoch);
  CHECK(validate(r.best, b.validation) == r.log.best_score);
}

TEST_CASE("same seed gives the same run, on disk too") {
  const auto b = small_bench(200);
  TempDir dir("train_det");
  const auto a = train(b.pairs, b.validation, model_cfg(8), quick(), dir / "a");
  const auto c = train(b.pairs, b.validation, model_cfg(8), quick(), dir / "b");
  CHECK(a.log.jsonl() == c.log.jsonl());
  CHECK(slurp(dir / "a" / "log.jsonl") == slurp(dir / "b" / "log.jsonl"));
  for (std::size_t l = 0; l < a.best.layers.size(); ++l) CHECK(a.best.layers[l].weight == c.best.layers[l].weight);

  // The in-memory best model is exactly the persisted one.
  const auto loaded = load_checkpoint(dir / "a" / "best");
  for (std::size_t l = 0; l < loaded.layers.size(); ++l) {
    CHECK(loaded.layers[l].weight == a.best.layers[l].weight);
    CHECK(loaded.layers[l].bias == a.best.layers[l].bias);
  }
  CHECK(std::filesystem::exists(dir / "a" / "last" / "config.json"));
  CHECK(std::filesystem::exists(dir / "a" / "config.json"));

  // The log holds exactly what jsonl() reports.
  std::string joined;
  for (const auto& line : a.log.jsonl()) joined += line + "\n";
  CHECK(slurp(dir / "a" / "log.jsonl") == joined);

  auto other = quick();
  other.seed = 10;
  CHECK(train(b.pairs, b.validation, model_cfg(8), other).log.jsonl() != a.log.jsonl());
}

TEST_CASE("pair row order does not matter") {
  const auto b = small_bench(150);
  std::vector<std::size_t> rev(b.pairs.size());
  std::iota(rev.rbegin(), rev.rend(), 0);
  const auto joined = build_pairs(b.pairs.zm, b.pairs.ze);
  const auto reordered = build_pairs(b.pairs.zm.select(rev), b.pairs.ze);
  const auto a = train(joined, b.validation, model_cfg(8), quick(2));
  const auto c = train(reordered, b.validation, model_cfg(8), quick(2));
  CHECK(a.log.jsonl() == c.log.jsonl());
}

TEST_CASE("generation mode drops normalization and structure") {
  const auto b = small_bench(130);
  auto tc = quick(2, 16);
  tc.mode = TrainMode::kGeneration;
  const auto resolved = tc.resolved();
  CHECK_FALSE(resolved.loss.normalize);
  CHECK(resolved.loss.beta == 0.0);
  const auto r = train(b.pairs, b.validation, model_cfg(8), tc);
  for (const auto& s : r.log.steps) {
    CHECK(s.structure == 0.0);
    CHECK(s.loss == doctest::Approx(48.0 * s.align).epsilon(1e-14));
  }
}

TEST_CASE("tail batches of one row still train") {
  const auto b = small_bench(65);
  auto tc = quick(1, 64);
  tc.schedule.warmup_steps = 1;
  const auto r = train(b.pairs, b.validation, model_cfg(8), tc);
  REQUIRE(r.log.steps.size() == 2);
  CHECK(r.log.steps[1].structure == 0.0);
}

TEST_CASE("training errors") {
  const auto b = small_bench(50);
  CHECK_THROWS_AS(train(b.pairs, b.validation, model_cfg(9), quick()), Error);

  auto tc = quick(2, 8);
  tc.mode = TrainMode::kGeneration;
  tc.schedule.base_lr = 1e200;
  tc.adamw.weight_decay = 0.0;
  try {
    (void)train(b.pairs, b.validation, model_cfg(8), tc);
    FAIL("divergent run did not abort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }

  auto bad = quick();
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(parse_train_mode("generation") == TrainMode::kGeneration);
  CHECK_THROWS_AS(parse_train_mode("other"), Error);
}

TEST_CASE("validate score") {
  // Gallery equal to the projected queries scores 100.
  Rng rng(12);
  const auto m = init_model(model_cfg(6, 2, true));
  RetrievalCorpus c;
  const Matrix q = oracle::random_matrix(16, 6, rng);
  std::vector<std::string> qids, gids;
  for (int i = 0; i < 16; ++i) {
    qids.push_back("q" + std::to_string(i));
    gids.push_back("g" + std::to_string(i));
    c.relevance[qids.back()] = {gids.back()};
  }
  c.query_sets["en"] = EmbeddingSet::from_matrix(q, qids, "en");
  c.gallery = EmbeddingSet::from_matrix(project(m, c.query_sets["en"].matrix()), gids, "img");
  CHECK(validate(m, c) == 100.0);

  // Random gallery: compose the score from the brute-force recall oracle.
  c.gallery = EmbeddingSet::from_matrix(oracle::random_matrix(16, 6, rng), gids, "img");
  c.query_sets["de"] = EmbeddingSet::from_matrix(oracle::random_matrix(16, 6, rng), qids, "de");
  std::vector<std::vector<std::size_t>> rel(16);
  for (std::size_t i = 0; i < 16; ++i) rel[i] = {i};
  double sum = 0.0;
  for (const auto& lang : {"en", "de"}) {
    const Matrix pq = project(m, c.query_sets[lang].matrix());
    const Matrix g = c.gallery.matrix();
    for (double v : oracle::full_sort_recall(pq, g, rel, {1, 5, 10})) sum += v;
    for (double v : oracle::full_sort_recall(g, pq, rel, {1, 5, 10})) sum += v;
  }
  CHECK(validate(m, c) == doctest::Approx(sum / 12.0).epsilon(1e-12));
}

TEST_CASE("untrained model scores near chance") {
  SynthOptions o;
  o.seed = 21;
  o.n = 4;
  o.n_val = 2000;
  o.n_eval = 0;
  o.d_m = o.d_e = o.map_rank = 64;
  const auto b = synth_generate(o);
  const auto m = init_model(model_cfg(64));
  // Chance level of Recall@K with one relevant item among n is 100 K / n.
  const double chance = 100.0 * (1.0 + 5.0 + 10.0) / 3.0 / 2000.0;
  const double score = validate(m, b.validation);
  CHECK(score < 4.0 * chance);
}
