#include "anchoralign/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "anchoralign/error.hpp"

namespace anchoralign {

namespace {

// Rows of `rows` are the columns being orthogonalized; fills row `target`
// with a unit vector orthogonal to every row flagged in `done`.
void complete_basis(Matrix& rows, std::size_t target, const std::vector<bool>& done) {
  const std::size_t n = rows.cols();
  std::vector<double> best;
  double best_norm = -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> cand(n, 0.0);
    cand[k] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t r = 0; r < rows.rows(); ++r) {
        if (!done[r]) continue;
        const double proj = dot(cand, rows.row(r));
        auto rr = rows.row(r);
        for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * rr[i];
      }
    }
    const double nrm = norm2(cand);
    if (nrm > best_norm) {
      best_norm = nrm;
      best = std::move(cand);
    }
    if (best_norm > 0.5) break;
  }
  auto out = rows.row(target);
  for (std::size_t i = 0; i < n; ++i) out[i] = best[i] / best_norm;
}

}  // namespace

SvdResult svd(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kNonSquare, "svd expects a square matrix, got " + m.shape());
  }
  if (m.rows() > kSvdMaxDim) {
    throw Error(ErrorCode::kInvalidArgument,
                "svd dimension " + std::to_string(m.rows()) + " exceeds " +
                    std::to_string(kSvdMaxDim));
  }
  if (!all_finite(m)) throw Error(ErrorCode::kNonFinite, "svd input has non-finite entries");

  const std::size_t n = m.rows();
  // Row i of `w` is column i of the working matrix; row i of `vt` is column i of V.
  Matrix w = m.transposed();
  Matrix vt = Matrix::identity(n);
  const double tol = std::numeric_limits<double>::epsilon() * std::max<double>(1.0, double(n));

  int sweeps = 0;
  double residual = 0.0;
  bool converged = (n <= 1);
  while (!converged && sweeps < kSvdSweepCap) {
    ++sweeps;
    residual = 0.0;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = w.row(p);
        auto wq = w.row(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          alpha += wp[i] * wp[i];
          beta += wq[i] * wq[i];
          gamma += wp[i] * wq[i];
        }
        const double scale = std::sqrt(alpha * beta);
        if (!(scale > 0.0)) continue;
        const double rel = std::abs(gamma) / scale;
        residual = std::max(residual, rel);
        if (rel <= tol) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double a = wp[i], b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double a = vp[i], b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    std::ostringstream os;
    os << "one-sided Jacobi did not converge after " << kSvdSweepCap
       << " sweeps; max off-diagonal cosine " << residual;
    throw Error(ErrorCode::kNoConvergence, os.str());
  }

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = norm2(w.row(i));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

  SvdResult out;
  out.sweeps = sweeps;
  out.s.resize(n);
  Matrix ut(n, n);  // row i = i-th left singular vector
  Matrix vt_sorted(n, n);
  const double smax = n ? norms[order[0]] : 0.0;
  const double floor = smax * std::numeric_limits<double>::epsilon();
  std::vector<bool> done(n, false);
  std::vector<std::size_t> deficient;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.s[k] = norms[src];
    std::copy(vt.row(src).begin(), vt.row(src).end(), vt_sorted.row(k).begin());
    if (norms[src] > floor && norms[src] > 0.0) {
      auto dst = ut.row(k);
      auto col = w.row(src);
      for (std::size_t i = 0; i < n; ++i) dst[i] = col[i] / norms[src];
      done[k] = true;
    } else {
      deficient.push_back(k);
    }
  }
  for (std::size_t k : deficient) {
    complete_basis(ut, k, done);
    done[k] = true;
  }
  out.u = ut.transposed();
  out.v = vt_sorted.transposed();
  return out;
}

Matrix reconstruct(const SvdResult& r) {
  Matrix us = r.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= r.s[j];
  return matmul_bt(us, r.v);
}

}  // namespace anchoralign
