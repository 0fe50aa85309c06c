#include "anchoralign/tsne.hpp"

#include <cmath>
#include <limits>

#include "anchoralign/cluster.hpp"
#include "anchoralign/error.hpp"
#include "anchoralign/rng.hpp"

namespace anchoralign {

nlohmann::json TsneOptions::to_json() const {
  return {{"method", "exact"},
          {"perplexity", perplexity},
          {"seed", seed},
          {"iterations", iterations},
          {"learning_rate", learning_rate},
          {"early_exaggeration", early_exaggeration},
          {"exaggeration_iters", exaggeration_iters},
          {"momentum", {initial_momentum, final_momentum}},
          {"momentum_switch_iter", momentum_switch_iter},
          {"init_stddev", init_stddev},
          {"gains", adaptive_gains ? "delta-bar-delta, +0.2 / x0.8, floor 0.01" : "none"}};
}

namespace {

// Entropy (nats) of the row distribution at bandwidth beta; fills `row`.
double row_entropy(const std::vector<double>& d, std::size_t self, double beta, double dmin,
                   std::span<double> row) {
  double sum = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    row[j] = j == self ? 0.0 : std::exp(-beta * (d[j] - dmin));
    sum += row[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    row[j] /= sum;
    weighted += row[j] * (d[j] - dmin);
  }
  return std::log(sum) + beta * weighted;
}

}  // namespace

Affinities calibrate_affinities(const Matrix& x, const TsneOptions& o) {
  const std::size_t n = x.rows();
  if (!(o.perplexity >= 1.0) || !(3.0 * o.perplexity < double(n))) {
    throw Error(ErrorCode::kInfeasible, "perplexity " + std::to_string(o.perplexity) + " needs 1 <= perplexity and 3 * perplexity < n = " +
                                            std::to_string(n));
  }
  const double target = std::log(o.perplexity);
  const double tol = o.entropy_tolerance * std::log(2.0);
  Affinities a{Matrix(n, n), std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = squared_distance(x.row(i), x.row(j));
      if (j != i) dmin = std::min(dmin, d[j]);
    }
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = row_entropy(d, i, beta, dmin, a.conditional.row(i));
    for (std::size_t step = 0; step < o.max_search_steps && std::abs(h - target) > tol; ++step) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = row_entropy(d, i, beta, dmin, a.conditional.row(i));
    }
    if (std::abs(h - target) > 1e-4 * std::log(2.0)) {
      throw Error(ErrorCode::kInfeasible, "row " + std::to_string(i) + " cannot reach perplexity " +
                                              std::to_string(o.perplexity) + " (entropy off by " +
                                              std::to_string(std::abs(h - target) / std::log(2.0)) + " bits)");
    }
    a.betas[i] = beta;
    a.realized_perplexity[i] = std::exp(h);
  }
  return a;
}

Matrix symmetrize(const Matrix& c) {
  const std::size_t n = c.rows();
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) p(i, j) = (c(i, j) + c(j, i)) / (2.0 * double(n));
  return p;
}

namespace {

// num(i,j) = 1 / (1 + |y_i - y_j|^2), zero diagonal; returns the sum.
double student_t(const Matrix& y, Matrix& num) {
  const std::size_t n = y.rows();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
      num(i, j) = v;
      num(j, i) = v;
      z += 2.0 * v;
    }
  }
  return z;
}

}  // namespace

double tsne_kl(const Matrix& p, const Matrix& y) {
  Matrix num(y.rows(), y.rows());
  const double z = student_t(y, num);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      kl += p(i, j) * std::log(p(i, j) / (num(i, j) / z));
    }
  return kl;
}

TsneResult tsne(const Matrix& x, const TsneOptions& o) {
  const std::size_t n = x.rows();
  if (n > 5000) throw Error(ErrorCode::kInvalidArgument, "exact t-SNE is limited to 5000 points, got " + std::to_string(n));
  if (!all_finite(x)) throw Error(ErrorCode::kNonFinite, "t-SNE input");
  const Affinities aff = calibrate_affinities(x, o);
  const Matrix p = symmetrize(aff.conditional);

  Rng rng(o.seed);
  Matrix y(n, 2);
  for (double& v : y.data()) v = o.init_stddev * rng.normal();

  TsneResult r;
  r.realized_perplexity = aff.realized_perplexity;
  r.initial_kl = tsne_kl(p, y);

  Matrix update(n, 2), gains(n, 2, 1.0), grad(n, 2), num(n, n);
  for (std::size_t it = 0; it < o.iterations; ++it) {
    const double exaggeration = it < o.exaggeration_iters ? o.early_exaggeration : 1.0;
    const double momentum = it < o.momentum_switch_iter ? o.initial_momentum : o.final_momentum;
    const double z = student_t(y, num);
    for (std::size_t i = 0; i < n; ++i) {
      double g0 = 0.0, g1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = (exaggeration * p(i, j) - num(i, j) / z) * num(i, j);
        g0 += w * (y(i, 0) - y(j, 0));
        g1 += w * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * g0;
      grad(i, 1) = 4.0 * g1;
    }
    for (std::size_t k = 0; k < grad.size(); ++k) {
      double& gain = gains.data()[k];
      const double g = grad.data()[k];
      double& u = update.data()[k];
      if (o.adaptive_gains) {
        gain = ((g > 0.0) != (u > 0.0)) ? gain + 0.2 : gain * 0.8;
        gain = std::max(gain, 0.01);
      }
      u = momentum * u - o.learning_rate * gain * g;
      y.data()[k] += u;
    }
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m0 += y(i, 0);
      m1 += y(i, 1);
    }
    m0 /= double(n);
    m1 /= double(n);
    for (std::size_t i = 0; i < n; ++i) {
      y(i, 0) -= m0;
      y(i, 1) -= m1;
    }
  }
  r.final_kl = tsne_kl(p, y);
  r.embedding = std::move(y);
  return r;
}

}  // namespace anchoralign
