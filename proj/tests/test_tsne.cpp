#include <doctest.h>

#include "anchoralign/error.hpp"
#include "anchoralign/tsne.hpp"
#include "oracles.hpp"

using namespace anchoralign;

namespace {

Matrix clustered_points(std::size_t n, Rng& rng) {
  Matrix m(n, 10);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < 10; ++t) m(i, t) = (t == i % 4 ? 5.0 : 0.0) + rng.normal();
  return m;
}

// Perplexity recomputed from a conditional row: 2^H with H in bits.
double row_perplexity(const Matrix& p, std::size_t i) {
  double h = 0.0;
  for (std::size_t j = 0; j < p.cols(); ++j)
    if (p(i, j) > 0.0) h -= p(i, j) * std::log2(p(i, j));
  return std::exp2(h);
}

}  // namespace

TEST_CASE("affinity calibration hits the target perplexity") {
  Rng rng(1);
  const Matrix pts = clustered_points(200, rng);
  TsneOptions o;
  const auto a = calibrate_affinities(pts, o);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(a.conditional(i, i) == 0.0);
    CHECK(std::abs(row_perplexity(a.conditional, i) - 32.0) < 1e-3);
    CHECK(a.realized_perplexity[i] == doctest::Approx(row_perplexity(a.conditional, i)).epsilon(1e-9));
  }
}

TEST_CASE("symmetrized affinities") {
  Rng rng(2);
  const Matrix pts = clustered_points(120, rng);
  TsneOptions o;
  o.perplexity = 10;
  const Matrix p = symmetrize(calibrate_affinities(pts, o).conditional);
  double total = 0;
  for (std::size_t i = 0; i < 120; ++i)
    for (std::size_t j = 0; j < 120; ++j) {
      CHECK(p(i, j) == p(j, i));
      CHECK(p(i, j) >= 0.0);
      total += p(i, j);
    }
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("t-SNE reduces KL and co-locates duplicates") {
  Rng rng(3);
  Matrix pts = clustered_points(200, rng);
  for (std::size_t t = 0; t < 10; ++t) pts(199, t) = pts(17, t);
  TsneOptions o;
  o.seed = 5;
  const auto r = tsne(pts, o);
  CHECK(r.final_kl < r.initial_kl);
  CHECK(all_finite(r.embedding));
  const double dx = r.embedding(199, 0) - r.embedding(17, 0);
  const double dy = r.embedding(199, 1) - r.embedding(17, 1);
  CHECK(std::sqrt(dx * dx + dy * dy) < 1e-3);
  for (double p : r.realized_perplexity) CHECK(std::abs(p - 32.0) < 1e-3);

  const auto again = tsne(pts, o);
  CHECK(again.embedding == r.embedding);
}

TEST_CASE("KL of a layout matches the definition") {
  Rng rng(4);
  const Matrix pts = clustered_points(40, rng);
  TsneOptions o;
  o.perplexity = 5;
  const Matrix p = symmetrize(calibrate_affinities(pts, o).conditional);
  const Matrix y = oracle::random_matrix(40, 2, rng);
  double z = 0;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j)
      if (i != j) z += 1.0 / (1.0 + std::pow(y(i, 0) - y(j, 0), 2) + std::pow(y(i, 1) - y(j, 1), 2));
  double kl = 0;
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j) {
      if (i == j || p(i, j) == 0.0) continue;
      const double q = 1.0 / (1.0 + std::pow(y(i, 0) - y(j, 0), 2) + std::pow(y(i, 1) - y(j, 1), 2)) / z;
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  CHECK(tsne_kl(p, y) == doctest::Approx(kl).epsilon(1e-10));
}

TEST_CASE("infeasible perplexity") {
  Rng rng(5);
  const Matrix pts = clustered_points(90, rng);
  TsneOptions o;
  try {
    (void)tsne(pts, o);
    FAIL("perplexity 32 accepted for 90 points");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasible);
  }
}
