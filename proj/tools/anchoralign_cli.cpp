// anchoralign command-line tool: train, eval, analyze, vizprep, tsne, synth.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anchoralign/analysis.hpp"
#include "anchoralign/checkpoint.hpp"
#include "anchoralign/dataset.hpp"
#include "anchoralign/embedding.hpp"
#include "anchoralign/error.hpp"
#include "anchoralign/retrieval.hpp"
#include "anchoralign/synth.hpp"
#include "anchoralign/trainer.hpp"
#include "anchoralign/tsne.hpp"
#include "anchoralign/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace anchoralign;

namespace {

// Thrown for bad flag combinations that CLI11 itself cannot see.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::trunc | std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  f << text;
}

void write_json(const std::string& path, json j) {
  j["toolkit_version"] = kToolkitVersion;
  write_text(path, j.dump(2) + "\n");
}

// "name=path" -> (name, path)
std::pair<std::string, std::string> split_named(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw UsageError("expected NAME=PATH, got '" + spec + "'");
  }
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

EmbeddingSet project_set(const ProjectionModel& model, const EmbeddingSet& set) {
  EmbeddingSet out = EmbeddingSet::from_matrix(project(model, set.matrix()), set.ids, set.lang);
  out.texts = set.texts;
  return out;
}

// Loads NAME=PATH families, pushing the `projected` ones through the model.
std::map<std::string, EmbeddingSet> load_families(const std::vector<std::string>& plain,
                                                  const std::vector<std::string>& projected,
                                                  const std::optional<ProjectionModel>& model) {
  if (!projected.empty() && !model) throw UsageError("--project needs --model");
  std::map<std::string, EmbeddingSet> out;
  auto add = [&](const std::string& spec, bool map) {
    auto [name, path] = split_named(spec);
    if (out.contains(name)) throw UsageError("family '" + name + "' given twice");
    EmbeddingSet set = read_emb1(path);
    out.emplace(name, map ? project_set(*model, set) : std::move(set));
  };
  for (const auto& s : plain) add(s, false);
  for (const auto& s : projected) add(s, true);
  return out;
}

struct TrainArgs {
  std::vector<std::string> pairs;
  std::string val, out;
  std::size_t train_size = 0;
  int layers = 2;
  bool skip = false;
  std::string loss = "combined";
  double lambda = 48.0, beta = 1.0;
  std::size_t epochs = 50, batch = 64, warmup = 50;
  double lr = 3e-4, weight_decay = 1e-2;
  std::uint64_t seed = 0;
  std::string mode = "retrieval";
};

int cmd_train(const TrainArgs& a, unsigned threads, const std::string& resolved) {
  std::vector<fs::path> manifests(a.pairs.begin(), a.pairs.end());
  PairedDataset pairs = load_pairs(manifests);
  if (a.train_size > 0) pairs = sample_split(pairs, a.train_size, a.seed);
  const RetrievalCorpus val = read_corpus(a.val);

  ProjectionConfig pc;
  pc.d_in = pairs.zm.d;
  pc.d_out = pairs.ze.d;
  pc.n_layers = a.layers;
  pc.skip = a.skip;
  pc.seed = a.seed;

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.seed = a.seed;
  tc.loss.kind = parse_loss_kind(a.loss);
  tc.loss.lambda = a.lambda;
  tc.loss.beta = a.beta;
  tc.schedule.base_lr = a.lr;
  tc.schedule.warmup_steps = a.warmup;
  tc.adamw.weight_decay = a.weight_decay;
  tc.mode = parse_train_mode(a.mode);
  tc.threads = threads;

  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "resolved.ini").string(), resolved);
  std::printf("training on %zu pairs (d_m=%zu, d_e=%zu), %zu steps per epoch\n", pairs.size(), pc.d_in, pc.d_out,
              steps_per_epoch(pairs.size(), tc.batch_size));
  const auto result = train(pairs, val, pc, tc, fs::path(a.out), [](const EpochRecord& e) {
    std::printf("epoch %zu  loss %.6f  val %.3f\n", e.epoch, e.mean_loss, e.val_score);
    std::fflush(stdout);
  });
  std::printf("best epoch %zu  val %.3f  -> %s\n", result.log.best_epoch, result.log.best_score,
              (fs::path(a.out) / "best").string().c_str());
  return 0;
}

struct EvalArgs {
  std::string corpus, model, out;
  std::vector<std::size_t> ks{1, 5, 10};
  std::vector<std::string> directions{"query_to_gallery", "gallery_to_query"};
  std::vector<std::string> langs;
};

int cmd_eval(const EvalArgs& a, unsigned threads) {
  const RetrievalCorpus corpus = read_corpus(a.corpus);
  std::optional<ProjectionModel> model;
  if (!a.model.empty()) model = load_checkpoint(a.model);
  EvalOptions opts;
  opts.ks = a.ks;
  opts.directions.clear();
  for (const auto& d : a.directions) opts.directions.push_back(parse_direction(d));
  if (!a.langs.empty()) opts.lang_subset = a.langs;
  opts.threads = threads;
  RecallReport report = evaluate_corpus(model ? &*model : nullptr, corpus, opts);
  if (model) report.model = a.model;
  write_json(a.out, report.to_json());
  if (!a.out.empty() && a.out != "-") {
    for (const auto& avg : report.averages) {
      std::printf("%-6s %-16s R@%-3zu %.2f\n", avg.scope.c_str(), to_string(avg.direction).c_str(), avg.k, avg.recall);
    }
  }
  return 0;
}

struct AnalyzeArgs {
  std::string model, out;
  double tau = 0.01;
  std::vector<std::string> clusters, projected;
  char sep = '/';
};

int cmd_analyze(const AnalyzeArgs& a) {
  if (a.model.empty() && a.clusters.empty() && a.projected.empty()) {
    throw UsageError("analyze needs --model and/or --clusters");
  }
  json report;
  std::optional<ProjectionModel> model;
  if (!a.model.empty()) {
    model = load_checkpoint(a.model);
    const EffectiveMap eff = effective_map(*model);
    report["model"] = a.model;
    report["weights"] = spectrum_report(eff.weight, eff.bias, a.tau).to_json();
  }
  if (!a.clusters.empty() || !a.projected.empty()) {
    const auto families = load_families(a.clusters, a.projected, model);
    std::map<std::string, std::vector<EmbeddingSet>> grouped;
    for (const auto& [name, set] : families) grouped[name] = split_clusters_by_id(set, a.sep);
    report["clusters"] = cosine_cluster_stats(grouped).to_json();
  }
  write_json(a.out, report);
  return 0;
}

// Joint t-SNE over every vizprep point; rows are looked up by (family, id).
void attach_tsne(VizPrepOutput& out, const std::map<std::string, EmbeddingSet>& families, const TsneOptions& opts,
                 json& meta) {
  if (out.points.empty()) throw UsageError("no points to embed");
  std::map<std::string, std::unordered_map<std::string, std::size_t>> row_of;
  for (const auto& [name, set] : families)
    for (std::size_t i = 0; i < set.n; ++i) row_of[name].emplace(set.ids[i], i);
  const std::size_t d = families.at(out.points.front().family).d;
  Matrix x(out.points.size(), d);
  for (std::size_t p = 0; p < out.points.size(); ++p) {
    const EmbeddingSet& set = families.at(out.points[p].family);
    if (set.d != d) {
      throw Error(ErrorCode::kDimensionMismatch, "joint t-SNE needs equal widths, family '" + out.points[p].family +
                                                     "' has " + std::to_string(set.d) + " vs " + std::to_string(d));
    }
    const auto row = set.row(row_of[out.points[p].family].at(out.points[p].id));
    for (std::size_t t = 0; t < d; ++t) x(p, t) = row[t];
  }
  const TsneResult r = tsne(x, opts);
  for (std::size_t p = 0; p < out.points.size(); ++p) {
    out.points[p].x = r.embedding(p, 0);
    out.points[p].y = r.embedding(p, 1);
  }
  meta["tsne"] = {{"options", opts.to_json()}, {"initial_kl", r.initial_kl}, {"final_kl", r.final_kl}};
}

struct VizArgs {
  std::string gallery, model, out, meta, relevance;
  std::vector<std::string> families, projected;
  bool include_gallery = false;
  VizPrepOptions opts;
  bool run_tsne = false;
  TsneOptions tsne;
};

int cmd_vizprep(const VizArgs& a) {
  const EmbeddingSet gallery = read_emb1(a.gallery);
  std::optional<ProjectionModel> model;
  if (!a.model.empty()) model = load_checkpoint(a.model);
  auto families = load_families(a.families, a.projected, model);
  if (a.include_gallery) families.emplace("gallery", gallery);
  VizPrepOptions opts = a.opts;
  std::optional<Relevance> rel;
  if (!a.relevance.empty()) rel = read_relevance_jsonl(a.relevance);
  VizPrepOutput out = vizprep(gallery, families, opts, rel ? &*rel : nullptr);
  json meta = {{"options",
                {{"k", opts.k},
                 {"top_n", opts.top_n},
                 {"select", opts.select},
                 {"per_cluster", opts.per_cluster},
                 {"min_cluster_size", opts.min_cluster_size},
                 {"seed", opts.seed}}},
               {"selected_clusters", out.selected_clusters},
               {"sampled_ids", out.sampled_ids},
               {"sampled_clusters", out.sampled_clusters}};
  if (a.run_tsne) attach_tsne(out, families, a.tsne, meta);
  write_text(a.out, out.to_csv());
  if (!a.meta.empty()) write_json(a.meta, meta);
  return 0;
}

struct TsneArgs {
  std::string input, out, meta;
  TsneOptions opts;
};

int cmd_tsne(const TsneArgs& a) {
  const EmbeddingSet set = read_emb1(a.input);
  const TsneResult r = tsne(set.matrix(), a.opts);
  std::ostringstream os;
  os.precision(17);
  os << "id,x,y\n";
  for (std::size_t i = 0; i < set.n; ++i) os << set.ids[i] << ',' << r.embedding(i, 0) << ',' << r.embedding(i, 1) << '\n';
  write_text(a.out, os.str());
  if (!a.meta.empty()) {
    write_json(a.meta, {{"input", a.input},
                        {"options", a.opts.to_json()},
                        {"initial_kl", r.initial_kl},
                        {"final_kl", r.final_kl},
                        {"realized_perplexity", r.realized_perplexity}});
  }
  return 0;
}

struct SynthArgs {
  std::string out;
  SynthOptions opts;
};

int cmd_synth(const SynthArgs& a) {
  const SyntheticBenchmark b = synth_generate(a.opts);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_emb1(b.pairs.zm, dir / "train.zm.emb1");
  write_emb1(b.pairs.ze, dir / "train.ze.emb1");
  write_pair_manifest({"train.zm.emb1", "train.ze.emb1", b.pairs.zm.d, b.pairs.ze.d}, dir / "pairs.json");
  json files = {{"pairs", (dir / "pairs.json").string()}};
  if (b.corpus.gallery.n > 0) files["test"] = write_corpus(b.corpus, dir, "test").string();
  if (b.validation.gallery.n > 0) files["val"] = write_corpus(b.validation, dir, "val").string();

  ProjectionConfig pc;
  pc.d_in = a.opts.d_m;
  pc.d_out = a.opts.d_e;
  pc.n_layers = 1;
  ProjectionModel truth = init_model(pc);
  truth.layers[0].weight = b.truth.map;
  truth.layers[0].bias = b.truth.bias;
  save_checkpoint(truth, dir / "truth");
  files["truth_checkpoint"] = (dir / "truth").string();

  const auto& o = a.opts;
  write_json((dir / "truth.json").string(), {{"options",
                                              {{"seed", o.seed},
                                               {"n", o.n},
                                               {"n_eval", o.n_eval},
                                               {"n_val", o.n_val},
                                               {"d_m", o.d_m},
                                               {"d_e", o.d_e},
                                               {"rank", o.map_rank},
                                               {"noise", o.noise_sigma},
                                               {"bias_scale", o.bias_scale},
                                               {"identity", o.identity_map}}},
                                             {"noise_sigma", b.truth.noise_sigma},
                                             {"files", files}});
  std::printf("wrote %zu training pairs, %zu test and %zu validation items to %s\n", b.pairs.size(),
              b.corpus.gallery.n, b.validation.gallery.n, dir.string().c_str());
  return 0;
}

// The resolved configuration of one subcommand plus the global options, in the
// same format --config reads.
std::string resolved_config(const CLI::App& app, const std::string& sub) {
  std::istringstream in(app.config_to_str(true, false));
  std::string out, line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    const bool global = dot == std::string::npos || dot > eq;
    if (global || line.rfind(sub + ".", 0) == 0) out += line + "\n";
  }
  return out;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInsufficientClusters:
    case ErrorCode::kUnknownLanguage:
    case ErrorCode::kInfeasible:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear alignment of multilingual text embeddings to a multimodal embedding space"};
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.set_config("--config", "", "INI/TOML config file ([train], [eval], ... sections); flags override it");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads for evaluation")
      ->envname("M2M_THREADS")
      ->check(CLI::Range(1u, 1024u));

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Learn a projection from a pair manifest");
  train_cmd->add_option("--pairs", ta.pairs, "Pair manifest(s) (JSON)")->required();
  train_cmd->add_option("--val", ta.val, "Validation corpus manifest")->required();
  train_cmd->add_option("--out", ta.out, "Run directory")->required();
  train_cmd->add_option("--train-size", ta.train_size, "Random subset of this many pairs (0 = all)");
  train_cmd->add_option("--layers", ta.layers, "Number of affine layers")->check(CLI::IsMember({1, 2, 4}));
  train_cmd->add_flag("--skip", ta.skip, "Residual connections on square layers (default: off)");
  train_cmd->add_option("--loss", ta.loss, "Training loss")
      ->check(CLI::IsMember({"mse", "l1", "similarity", "combined"}));
  train_cmd->add_option("--lambda", ta.lambda, "Weight of the alignment term")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--beta", ta.beta, "Weight of the structure term")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--epochs", ta.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", ta.batch, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", ta.lr, "Peak learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--warmup", ta.warmup, "Linear warmup steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--weight-decay", ta.weight_decay, "AdamW decoupled weight decay")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", ta.seed, "Seed for initialization, shuffling and subsetting");
  train_cmd->add_option("--mode", ta.mode, "retrieval, or generation (raw embeddings, no structure term)")
      ->check(CLI::IsMember({"retrieval", "generation"}));

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Recall@K of a corpus, optionally through a checkpoint");
  eval_cmd->add_option("--corpus", ea.corpus, "Corpus manifest")->required();
  eval_cmd->add_option("--model", ea.model, "Checkpoint directory (default: none, ranks raw embeddings)");
  eval_cmd->add_option("--ks", ea.ks, "Comma-separated K values")->delimiter(',');
  eval_cmd->add_option("--directions", ea.directions, "query_to_gallery, gallery_to_query, text_to_text")
      ->delimiter(',');
  eval_cmd->add_option("--langs", ea.langs, "Language subset for the extra average")->delimiter(',');
  eval_cmd->add_option("--out", ea.out, "Report path (default: stdout)");

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze", "Spectrum of the composed map and cluster distance statistics");
  analyze_cmd->add_option("--model", aa.model, "Checkpoint directory (default: none)");
  analyze_cmd->add_option("--tau", aa.tau, "Relative threshold for the effective rank")
      ->check(CLI::Range(0.0, 1.0));
  analyze_cmd->add_option("--clusters", aa.clusters, "NAME=PATH embedding family; ids look like cluster/index");
  analyze_cmd->add_option("--project", aa.projected, "NAME=PATH family pushed through --model first");
  analyze_cmd->add_option("--sep", aa.sep, "Separator between cluster name and index in ids");
  analyze_cmd->add_option("--out", aa.out, "Report path (default: stdout)");

  VizArgs va;
  auto* viz_cmd = app.add_subcommand("vizprep", "Cluster the gallery, pick far-apart clusters and sample points");
  viz_cmd->add_option("--gallery", va.gallery, "Gallery embeddings (EMB1)")->required();
  viz_cmd->add_option("--family", va.families, "NAME=PATH text family joined on gallery ids");
  viz_cmd->add_option("--project", va.projected, "NAME=PATH text family pushed through --model first");
  viz_cmd->add_option("--relevance", va.relevance, "Relevance JSONL linking text ids to gallery ids (default: none)");
  viz_cmd->add_option("--model", va.model, "Checkpoint directory for --project (default: none)");
  viz_cmd->add_flag("--include-gallery", va.include_gallery, "Emit the sampled gallery rows as family 'gallery' (default: off)");
  viz_cmd->add_option("--k", va.opts.k, "KMeans clusters")->check(CLI::PositiveNumber);
  viz_cmd->add_option("--top-n", va.opts.top_n, "Largest clusters considered");
  viz_cmd->add_option("--select", va.opts.select, "Clusters picked by farthest-cluster sampling");
  viz_cmd->add_option("--per-cluster", va.opts.per_cluster, "Points sampled per cluster")->check(CLI::PositiveNumber);
  viz_cmd->add_option("--min-cluster-size", va.opts.min_cluster_size, "Smallest eligible cluster");
  viz_cmd->add_option("--seed", va.opts.seed, "Seed for KMeans and sampling");
  viz_cmd->add_flag("--tsne", va.run_tsne, "Add joint t-SNE coordinates (default: off)");
  viz_cmd->add_option("--perplexity", va.tsne.perplexity, "t-SNE perplexity")->check(CLI::PositiveNumber);
  viz_cmd->add_option("--tsne-iters", va.tsne.iterations, "t-SNE iterations");
  viz_cmd->add_option("--tsne-seed", va.tsne.seed, "t-SNE initialization seed");
  viz_cmd->add_option("--out", va.out, "CSV path (id,family,cluster,x,y)")->required();
  viz_cmd->add_option("--meta", va.meta, "JSON with options and the selection (default: none)");

  TsneArgs sa;
  auto* tsne_cmd = app.add_subcommand("tsne", "Exact t-SNE of an EMB1 file");
  tsne_cmd->add_option("--input", sa.input, "Embeddings (EMB1)")->required();
  tsne_cmd->add_option("--perplexity", sa.opts.perplexity, "Perplexity")->check(CLI::PositiveNumber);
  tsne_cmd->add_option("--iterations", sa.opts.iterations, "Gradient steps");
  tsne_cmd->add_option("--seed", sa.opts.seed, "Initialization seed");
  tsne_cmd->add_option("--learning-rate", sa.opts.learning_rate, "Step size")->check(CLI::PositiveNumber);
  tsne_cmd->add_flag("--gains", sa.opts.adaptive_gains, "Per-coordinate adaptive step gains (default: off)");
  tsne_cmd->add_option("--out", sa.out, "CSV path (id,x,y) (default: stdout)");
  tsne_cmd->add_option("--meta", sa.meta, "JSON with options and KL values (default: none)");

  SynthArgs ya;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic benchmark with a known linear map");
  synth_cmd->add_option("--out", ya.out, "Output directory")->required();
  synth_cmd->add_option("--n", ya.opts.n, "Training pairs")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--n-eval", ya.opts.n_eval, "Test corpus size");
  synth_cmd->add_option("--n-val", ya.opts.n_val, "Validation corpus size");
  synth_cmd->add_option("--dm", ya.opts.d_m, "Source width")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--de", ya.opts.d_e, "Target width")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--rank", ya.opts.map_rank, "Rank of the map")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", ya.opts.noise_sigma, "Target noise sigma")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--bias-scale", ya.opts.bias_scale, "Bias magnitude")->check(CLI::NonNegativeNumber);
  synth_cmd->add_flag("--identity", ya.opts.identity_map, "Use the identity map (default: off)");
  synth_cmd->add_option("--seed", ya.opts.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (app.get_option("--threads")->count() == 0) {
    if (const char* env = std::getenv("M2M_THREADS"); env != nullptr && *env != '\0') {
      std::fprintf(stderr, "anchoralign: M2M_THREADS: expected an integer in [1, 1024], got '%s'\n", env);
      return 2;
    }
  }

  try {
    if (*train_cmd) return cmd_train(ta, threads, resolved_config(app, "train"));
    if (*eval_cmd) return cmd_eval(ea, threads);
    if (*analyze_cmd) return cmd_analyze(aa);
    if (*viz_cmd) return cmd_vizprep(va);
    if (*tsne_cmd) return cmd_tsne(sa);
    if (*synth_cmd) return cmd_synth(ya);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "anchoralign: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "anchoralign: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "anchoralign: %s\n", e.what());
    return 1;
  }
  return 2;
}
