#include "anchoralign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "anchoralign/error.hpp"
#include "anchoralign/rng.hpp"

namespace anchoralign {

Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix q(n, n);
  for (double& v : q.data()) v = rng.normal();
  // Modified Gram-Schmidt over rows, two passes for orthogonality to working precision.
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = q.row(i);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const double p = dot(ri, q.row(j));
        auto rj = q.row(j);
        for (std::size_t k = 0; k < n; ++k) ri[k] -= p * rj[k];
      }
    }
    const double nrm = norm2(ri);
    for (double& v : ri) v /= nrm;
  }
  return q;
}

namespace {

struct Draw {
  Matrix zm;
  Matrix ze;
};

Draw draw_rows(const SyntheticTruth& truth, std::size_t n, std::size_t d_m, Rng& rng) {
  Draw out{Matrix(n, d_m), Matrix(n, truth.map.rows())};
  for (std::size_t i = 0; i < n; ++i) {
    auto zm = out.zm.row(i);
    do {
      for (double& v : zm) v = rng.normal();
    } while (!(norm2(zm) > kNormEpsilon));
    const double nrm = norm2(zm);
    for (double& v : zm) v /= nrm;
    auto ze = out.ze.row(i);
    for (std::size_t r = 0; r < ze.size(); ++r) {
      ze[r] = dot(truth.map.row(r), zm) + truth.bias[r];
      if (truth.noise_sigma > 0.0) ze[r] += truth.noise_sigma * rng.normal();
    }
  }
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

RetrievalCorpus make_corpus(const std::string& name, const std::string& prefix, const Draw& draw) {
  const std::size_t n = draw.zm.rows();
  RetrievalCorpus c;
  c.name = name;
  auto qids = numbered(prefix + "q", n);
  auto gids = numbered(prefix + "g", n);
  for (std::size_t i = 0; i < n; ++i) c.relevance[qids[i]] = {gids[i]};
  c.query_sets.emplace("en", EmbeddingSet::from_matrix(draw.zm, qids, "en", numbered("query ", n)));
  c.gallery = EmbeddingSet::from_matrix(draw.ze, std::move(gids), "gallery");
  return c;
}

}  // namespace

SyntheticBenchmark synth_generate(const SynthOptions& o) {
  if (o.d_m == 0 || o.d_e == 0) throw Error(ErrorCode::kInvalidArgument, "synthetic widths must be > 0");
  if (o.map_rank > std::min(o.d_m, o.d_e)) {
    throw Error(ErrorCode::kInvalidArgument, "map rank " + std::to_string(o.map_rank) +
                                                 " exceeds min(d_m, d_e) = " +
                                                 std::to_string(std::min(o.d_m, o.d_e)));
  }
  if (o.n < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic n must be >= 2");
  if (!(o.noise_sigma >= 0.0) || !std::isfinite(o.noise_sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigma must be finite and >= 0");
  }
  if (o.identity_map && o.d_m != o.d_e) {
    throw Error(ErrorCode::kInvalidArgument, "identity map needs d_m == d_e");
  }

  SyntheticBenchmark out;
  SyntheticTruth& truth = out.truth;
  truth.noise_sigma = o.noise_sigma;
  Rng truth_rng(o.seed, 0);
  if (o.identity_map) {
    truth.map = Matrix::identity(o.d_m);
  } else {
    const Matrix qe = random_orthogonal(o.d_e, truth_rng);
    const Matrix qm = random_orthogonal(o.d_m, truth_rng);
    std::vector<double> spectrum(o.map_rank);
    for (double& s : spectrum) s = truth_rng.uniform(0.5, 1.5);
    std::sort(spectrum.begin(), spectrum.end(), std::greater<>());
    truth.map = Matrix(o.d_e, o.d_m);
    for (std::size_t r = 0; r < o.d_e; ++r)
      for (std::size_t c = 0; c < o.d_m; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < o.map_rank; ++k) acc += qe(r, k) * spectrum[k] * qm(c, k);
        truth.map(r, c) = acc;
      }
  }
  truth.bias.assign(o.d_e, 0.0);
  if (o.bias_scale != 0.0) {
    const double scale = o.bias_scale / std::sqrt(double(o.d_e));
    for (double& b : truth.bias) b = scale * truth_rng.normal();
  }

  Rng train_rng(o.seed, 1);
  const Draw train = draw_rows(truth, o.n, o.d_m, train_rng);
  auto ids = numbered("s", o.n);
  auto texts = numbered("synthetic sentence ", o.n);
  out.pairs.zm = EmbeddingSet::from_matrix(train.zm, ids, "en", texts);
  out.pairs.ze = EmbeddingSet::from_matrix(train.ze, ids, "en", texts);

  if (o.n_val > 0) {
    Rng val_rng(o.seed, 2);
    out.validation = make_corpus("synthetic-val", "v", draw_rows(truth, o.n_val, o.d_m, val_rng));
  }
  if (o.n_eval > 0) {
    Rng eval_rng(o.seed, 3);
    out.corpus = make_corpus("synthetic-test", "t", draw_rows(truth, o.n_eval, o.d_m, eval_rng));
  }
  return out;
}

}  // namespace anchoralign
