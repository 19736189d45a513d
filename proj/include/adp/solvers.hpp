#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adp/linalg.hpp"
#include "adp/prox.hpp"

namespace adp {

/// λ = 1/μ with μ the largest eigenvalue of BᵀB; 1 for the zero operator.
inline double default_step(const DenseMatrix& b) {
  const double mu = dominant_eigenvalue(gram(b));
  return mu > 0.0 ? 1.0 / mu : 1.0;
}

struct LandweberResult {
  Vec64 x;
  std::vector<Vec64> iterates;  // x¹ … x^iters
};

/// x^{k+1} = x^k − η Aᵀ(A x^k − y)
inline LandweberResult landweber(const DenseMatrix& a, std::span<const double> y,
                                 std::span<const double> x0, double eta, std::size_t iters) {
  if (!(eta > 0.0)) throw ValidationError("landweber: eta must be positive");
  if (y.size() != a.rows() || x0.size() != a.cols())
    throw ValidationError("landweber: dimension mismatch");
  LandweberResult r;
  r.x.assign(x0.begin(), x0.end());
  r.iterates.reserve(iters);
  for (std::size_t k = 0; k < iters; ++k) {
    Vec64 res = matvec(a, r.x);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= y[i];
    const Vec64 g = matvec_t(a, res);
    for (std::size_t i = 0; i < r.x.size(); ++i) r.x[i] -= eta * g[i];
    r.iterates.push_back(r.x);
  }
  return r;
}

/// One shared layer x ↦ prox_{λαR}(W x + bias) with W = I − λBᵀB and
/// bias = λBᵀy. Both ISTA and the unrolled network evaluate through this, so
/// the two agree bit for bit.
class ProximalLayer {
 public:
  ProximalLayer(const DenseMatrix& b, std::span<const double> y, double lambda, double alpha,
                ProxKind prox)
      : weight_(gram(b)), bias_(matvec_t(b, y)), threshold_(lambda * alpha), prox_(prox) {
    if (y.size() != b.rows()) throw ValidationError("ProximalLayer: dimension mismatch");
    if (!(lambda > 0.0)) throw ValidationError("ProximalLayer: lambda must be positive");
    if (!(alpha >= 0.0)) throw ValidationError("ProximalLayer: alpha must be nonnegative");
    for (double& w : weight_.data()) w *= -lambda;
    for (std::size_t i = 0; i < weight_.rows(); ++i) weight_(i, i) += 1.0;
    for (double& v : bias_) v *= lambda;
  }

  std::size_t size() const { return weight_.rows(); }
  const DenseMatrix& weight() const { return weight_; }
  const Vec64& bias() const { return bias_; }
  double threshold() const { return threshold_; }
  ProxKind prox() const { return prox_; }

  /// Pre-activation W x + bias.
  Vec64 affine(std::span<const double> x) const {
    Vec64 p = matvec(weight_, x);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += bias_[i];
    return p;
  }

  Vec64 operator()(std::span<const double> x) const {
    return prox_apply(prox_, threshold_, affine(x));
  }

 private:
  DenseMatrix weight_;
  Vec64 bias_;
  double threshold_;
  ProxKind prox_;
};

struct IstaConfig {
  double lambda = 1.0;
  double alpha = 1.0;
  ProxKind prox = ProxKind::HalfSquaredL2;
  std::size_t max_iters = 1000;
  double tol = 0.0;  // stop once ‖x^{k+1} − x^k‖ ≤ tol; 0 runs max_iters
};

struct IstaResult {
  Vec64 x;
  std::size_t iterations = 0;
  bool converged = false;
  bool step_exceeds_bound = false;  // λ > 1/μ(BᵀB)
};

/// Proximal gradient x^{k+1} = prox_{λαR}(x^k − λBᵀ(Bx^k − y)).
inline IstaResult ista(const DenseMatrix& b, std::span<const double> y,
                       std::span<const double> x0, const IstaConfig& cfg) {
  if (x0.size() != b.cols()) throw ValidationError("ista: dimension mismatch");
  if (!(cfg.alpha > 0.0)) throw ValidationError("ista: alpha must be positive");
  if (!(cfg.tol >= 0.0)) throw ValidationError("ista: tol must be nonnegative");
  const ProximalLayer layer(b, y, cfg.lambda, cfg.alpha, cfg.prox);
  IstaResult r;
  const double mu = dominant_eigenvalue(gram(b));
  r.step_exceeds_bound = mu > 0.0 && cfg.lambda * mu > 1.0 + 1e-12;
  r.x.assign(x0.begin(), x0.end());
  for (std::size_t k = 0; k < cfg.max_iters; ++k) {
    Vec64 next = layer(r.x);
    double diff_sq = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) diff_sq += (next[i] - r.x[i]) * (next[i] - r.x[i]);
    r.x = std::move(next);
    r.iterations = k + 1;
    if (cfg.tol > 0.0 && std::sqrt(diff_sq) <= cfg.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

/// L shared-weight layers applied to the input z.
inline Vec64 unrolled_forward(const DenseMatrix& b, std::span<const double> y,
                              std::span<const double> z, std::size_t layers, double lambda,
                              double alpha, ProxKind prox) {
  if (z.size() != b.cols()) throw ValidationError("unrolled_forward: dimension mismatch");
  const ProximalLayer layer(b, y, lambda, alpha, prox);
  Vec64 x(z.begin(), z.end());
  for (std::size_t k = 0; k < layers; ++k) x = layer(x);
  return x;
}

}  // namespace adp
