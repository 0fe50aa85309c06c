#include "anchoralign/objectives.hpp"

#include <cmath>

#include "anchoralign/error.hpp"

namespace anchoralign {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kMse: return "mse";
    case LossKind::kL1: return "l1";
    case LossKind::kSimilarity: return "similarity";
    case LossKind::kCombined: return "combined";
  }
  return "combined";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "mse") return LossKind::kMse;
  if (s == "l1") return LossKind::kL1;
  if (s == "similarity") return LossKind::kSimilarity;
  if (s == "combined") return LossKind::kCombined;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown loss '" + s + "' (expected mse, l1, similarity, combined)");
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be finite and >= 0");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be finite and >= 0");
  }
}

namespace {

void same_shape(const char* op, const Matrix& u, const Matrix& e) {
  if (u.rows() != e.rows() || u.cols() != e.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(op) + ": " + u.shape() + " vs " + e.shape());
  }
  if (u.rows() == 0 || u.cols() == 0) throw Error(ErrorCode::kInvalidArgument, std::string(op) + ": empty batch");
}

void require_unit_rows(const char* what, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm2(m.row(i));
    if (std::abs(n - 1.0) > 1e-4) {
      throw Error(ErrorCode::kDegenerateRow, std::string(what) + " row " + std::to_string(i) +
                                                 " has norm " + std::to_string(n) + ", expected 1");
    }
  }
}

}  // namespace

LossValue align_mse(const Matrix& u, const Matrix& e) {
  same_shape("align_mse", u, e);
  const double count = double(u.size());
  LossValue out{0.0, Matrix(u.rows(), u.cols())};
  auto g = out.grad.data();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = u.data()[i] - e.data()[i];
    out.loss += r * r;
    g[i] = 2.0 * r / count;
  }
  out.loss /= count;
  return out;
}

LossValue l1_loss(const Matrix& u, const Matrix& e) {
  same_shape("l1_loss", u, e);
  const double count = double(u.size());
  LossValue out{0.0, Matrix(u.rows(), u.cols())};
  auto g = out.grad.data();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = u.data()[i] - e.data()[i];
    out.loss += std::abs(r);
    g[i] = r > 0.0 ? 1.0 / count : (r < 0.0 ? -1.0 / count : 0.0);
  }
  out.loss /= count;
  return out;
}

LossValue structure_loss(const Matrix& u_hat, const Matrix& e_hat) {
  same_shape("structure_loss", u_hat, e_hat);
  require_unit_rows("projection", u_hat);
  require_unit_rows("target", e_hat);
  const std::size_t b = u_hat.rows();
  LossValue out{0.0, Matrix(b, u_hat.cols())};
  if (b < 2) return out;

  const double pairs = double(b) * double(b - 1) / 2.0;
  // diff(i, j) = R_ij - Re_ij for i != j; the gradient is (2/P) * diff * U.
  Matrix diff(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      const double r = dot(u_hat.row(i), u_hat.row(j)) - dot(e_hat.row(i), e_hat.row(j));
      out.loss += r * r;
      diff(i, j) = r;
      diff(j, i) = r;
    }
  }
  out.loss /= pairs;
  out.grad = scaled(matmul(diff, u_hat), 2.0 / pairs);
  return out;
}

NormalizedRows::NormalizedRows(const Matrix& u) : u_hat_(u), norms_(u.rows()) {
  for (std::size_t i = 0; i < u.rows(); ++i) {
    const double n = norm2(u.row(i));
    if (!(n > kNormEpsilon)) {
      throw Error(ErrorCode::kDegenerateRow, "row " + std::to_string(i) + " has norm " + std::to_string(n));
    }
    norms_[i] = n;
    for (double& v : u_hat_.row(i)) v /= n;
  }
}

Matrix NormalizedRows::backward(const Matrix& du_hat) const {
  if (du_hat.rows() != u_hat_.rows() || du_hat.cols() != u_hat_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "normalize backward: " + du_hat.shape() + " vs " + u_hat_.shape());
  }
  Matrix du(du_hat.rows(), du_hat.cols());
  for (std::size_t i = 0; i < du.rows(); ++i) {
    auto uh = u_hat_.row(i);
    auto g = du_hat.row(i);
    const double radial = dot(uh, g);
    auto out = du.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (g[j] - radial * uh[j]) / norms_[i];
  }
  return du;
}

NormalizedRows normalize_with_grad(const Matrix& u) { return NormalizedRows(u); }

LossValue similarity_loss(const Matrix& u, const Matrix& e) {
  same_shape("similarity_loss", u, e);
  const NormalizedRows uh(u);
  const Matrix eh = l2_normalize_rows(e);
  const double b = double(u.rows());
  LossValue out{0.0, Matrix(u.rows(), u.cols())};
  Matrix du_hat(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.rows(); ++i) {
    out.loss += 1.0 - dot(uh.value().row(i), eh.row(i));
    auto g = du_hat.row(i);
    auto er = eh.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = -er[j] / b;
  }
  out.loss /= b;
  out.grad = uh.backward(du_hat);
  return out;
}

CombinedLoss combined_loss(const Matrix& u_raw, const Matrix& e_raw, const LossConfig& cfg) {
  cfg.validate();
  same_shape("combined_loss", u_raw, e_raw);
  CombinedLoss out;
  if (!cfg.normalize) {
    const LossValue a = align_mse(u_raw, e_raw);
    out.align = a.loss;
    out.loss = cfg.lambda * a.loss;
    out.grad = scaled(a.grad, cfg.lambda);
    return out;
  }
  const NormalizedRows uh(u_raw);
  const Matrix eh = l2_normalize_rows(e_raw);
  const LossValue a = align_mse(uh.value(), eh);
  out.align = a.loss;
  Matrix du_hat = scaled(a.grad, cfg.lambda);
  out.loss = cfg.lambda * a.loss;
  if (cfg.beta > 0.0) {
    const LossValue s = structure_loss(uh.value(), eh);
    out.structure = s.loss;
    out.loss += cfg.beta * s.loss;
    du_hat = add(du_hat, scaled(s.grad, cfg.beta));
  }
  out.grad = uh.backward(du_hat);
  return out;
}

CombinedLoss training_loss(const Matrix& u_raw, const Matrix& e_raw, const LossConfig& cfg) {
  switch (cfg.kind) {
    case LossKind::kCombined:
      return combined_loss(u_raw, e_raw, cfg);
    case LossKind::kSimilarity: {
      LossValue v = similarity_loss(u_raw, e_raw);
      return {v.loss, v.loss, 0.0, std::move(v.grad)};
    }
    case LossKind::kMse:
    case LossKind::kL1: {
      const auto base = cfg.kind == LossKind::kMse ? align_mse : l1_loss;
      if (!cfg.normalize) {
        LossValue v = base(u_raw, e_raw);
        return {v.loss, v.loss, 0.0, std::move(v.grad)};
      }
      const NormalizedRows uh(u_raw);
      LossValue v = base(uh.value(), l2_normalize_rows(e_raw));
      return {v.loss, v.loss, 0.0, uh.backward(v.grad)};
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown loss kind");
}

}  // namespace anchoralign
