#pragma once

#include <string>
#include <vector>

#include "anchoralign/matrix.hpp"

namespace anchoralign {

enum class LossKind { kMse, kL1, kSimilarity, kCombined };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

struct LossConfig {
  LossKind kind = LossKind::kCombined;
  double lambda = 48.0;
  double beta = 1.0;
  bool normalize = true;  // false = generation mode: raw embeddings, no structure term

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct LossValue {
  double loss = 0.0;
  Matrix grad;  // d loss / d u
};

// (1/(B*d)) * sum (u - e)^2. e is a constant.
LossValue align_mse(const Matrix& u, const Matrix& e);

// Mean absolute deviation; subgradient sign(u - e)/(B*d) with sign(0) = 0.
LossValue l1_loss(const Matrix& u, const Matrix& e);

// Mean of (R - R_e)^2 over the B(B-1)/2 strict-upper-triangle entries of the
// in-batch cosine Gram matrices R = U U^T and R_e = E E^T. Rows must already
// be unit norm (to 1e-4). B < 2 gives zero loss and zero gradient.
LossValue structure_loss(const Matrix& u_hat, const Matrix& e_hat);

// Row normalization that remembers what it needs for the backward pass.
class NormalizedRows {
 public:
  explicit NormalizedRows(const Matrix& u);

  const Matrix& value() const noexcept { return u_hat_; }
  const std::vector<double>& norms() const noexcept { return norms_; }
  // du = (I - u_hat u_hat^T) du_hat / |u|, row by row.
  Matrix backward(const Matrix& du_hat) const;

 private:
  Matrix u_hat_;
  std::vector<double> norms_;
};

NormalizedRows normalize_with_grad(const Matrix& u);

// Mean over rows of 1 - cos(u_i, e_i).
LossValue similarity_loss(const Matrix& u, const Matrix& e);

struct CombinedLoss {
  double loss = 0.0;
  double align = 0.0;      // unweighted base term
  double structure = 0.0;  // unweighted structure term (0 when not used)
  Matrix grad;             // d loss / d u_raw
};

// Retrieval mode (normalize): lambda * MSE(u_hat, e_hat) + beta * L_str(u_hat, e_hat),
// gradient chained through the normalization of u_raw. Generation mode:
// lambda * MSE(u_raw, e_raw) and no structure term.
CombinedLoss combined_loss(const Matrix& u_raw, const Matrix& e_raw, const LossConfig& cfg);

// Dispatches on cfg.kind. mse / l1 compare normalized rows when cfg.normalize
// is set and are not weighted by lambda; similarity is scale invariant.
CombinedLoss training_loss(const Matrix& u_raw, const Matrix& e_raw, const LossConfig& cfg);

}  // namespace anchoralign
