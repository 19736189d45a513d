#pragma once

// Analytic deep prior: the reconstruction is the Tikhonov minimizer
//   x(B) = argmin_x ½‖Bx − y‖² + α R(x)
// and the operator B is trained to minimize F(B) = ½‖A x(B) − y‖².

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adp/linalg.hpp"
#include "adp/operators.hpp"
#include "adp/prox.hpp"
#include "adp/random.hpp"
#include "adp/solvers.hpp"

namespace adp {

struct DeepPriorProblem {
  DenseMatrix a;
  Vec64 y;
  double alpha = 1e-3;
  ProxKind prox = ProxKind::HalfSquaredL2;
  double lambda = 1.0;  // unrolled-layer step, normally 1/μ(AᵀA)

  void validate() const {
    if (!(alpha > 0.0)) throw ValidationError("DeepPriorProblem: alpha must be positive");
    if (!(lambda > 0.0)) throw ValidationError("DeepPriorProblem: lambda must be positive");
    if (y.size() != a.rows()) throw ValidationError("DeepPriorProblem: y does not match A");
  }
};

/// Problem with λ = 1/μ(AᵀA).
inline DeepPriorProblem make_deep_prior_problem(DenseMatrix a, Vec64 y, double alpha,
                                                ProxKind prox = ProxKind::HalfSquaredL2) {
  DeepPriorProblem p{std::move(a), std::move(y), alpha, prox, 1.0};
  p.lambda = default_step(p.a);
  p.validate();
  return p;
}

namespace detail {

inline Cholesky regularized_gram(const DenseMatrix& b, double alpha) {
  DenseMatrix m = gram(b);
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += alpha;
  return Cholesky(m);
}

inline void require_l2(const DeepPriorProblem& p, const char* what) {
  if (p.prox != ProxKind::HalfSquaredL2)
    throw ValidationError(std::string(what) +
                          ": closed-form gradient requires the half squared l2 penalty");
}

inline void require_shape(const DeepPriorProblem& p, const DenseMatrix& b) {
  if (b.rows() != p.a.rows() || b.cols() != p.a.cols())
    throw ValidationError("deep prior: B must have the shape of A");
}

}  // namespace detail

/// x(B) = (BᵀB + αI)⁻¹ Bᵀ y
inline Vec64 tikhonov_solve(const DenseMatrix& b, std::span<const double> y, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("tikhonov_solve: alpha must be positive");
  return detail::regularized_gram(b, alpha).solve(matvec_t(b, y));
}

inline double objective_f(const DeepPriorProblem& p, const DenseMatrix& b) {
  detail::require_shape(p, b);
  const Vec64 r = matvec(p.a, tikhonov_solve(b, p.y, p.alpha)) - p.y;
  return 0.5 * dot(r, r);
}

/// Everything one exact-gradient step needs, from a single factorization.
struct DeepPriorEval {
  Vec64 x;
  double objective = 0.0;
  DenseMatrix gradient;
};

/// Exact F(B) and ∇F(B) for R = ½‖x‖². With M = BᵀB + αI,
/// x = M⁻¹Bᵀy, z = Aᵀ(Ax − y), w = M⁻¹z the gradient is the rank-three matrix
///   ∇F(B) = −(Bx) wᵀ − (Bw) xᵀ + y wᵀ.
inline DeepPriorEval evaluate_deep_prior(const DeepPriorProblem& p, const DenseMatrix& b) {
  detail::require_shape(p, b);
  const Cholesky m = detail::regularized_gram(b, p.alpha);
  DeepPriorEval e;
  e.x = m.solve(matvec_t(b, p.y));
  const Vec64 r = matvec(p.a, e.x) - p.y;
  e.objective = 0.5 * dot(r, r);
  const Vec64 w = m.solve(matvec_t(p.a, r));
  e.gradient = DenseMatrix(b.rows(), b.cols());
  add_outer(e.gradient, -1.0, matvec(b, e.x), w);
  add_outer(e.gradient, -1.0, matvec(b, w), e.x);
  add_outer(e.gradient, 1.0, p.y, w);
  return e;
}

inline DenseMatrix grad_f(const DeepPriorProblem& p, const DenseMatrix& b) {
  detail::require_l2(p, "grad_f");
  return evaluate_deep_prior(p, b).gradient;
}

/// ∇F at B = A in explicit form. With g = Aᵀy, p₁ = M⁻¹g, p₂ = M⁻²g:
///   ∇F(A) = α (A p₁) p₂ᵀ + α (A p₂) p₁ᵀ − α y p₂ᵀ
inline DenseMatrix grad_f_at_a(const DeepPriorProblem& p) {
  detail::require_l2(p, "grad_f_at_a");
  const Cholesky m = detail::regularized_gram(p.a, p.alpha);
  const Vec64 p1 = m.solve(matvec_t(p.a, p.y));
  const Vec64 p2 = m.solve(p1);
  DenseMatrix g(p.a.rows(), p.a.cols());
  add_outer(g, p.alpha, matvec(p.a, p1), p2);
  add_outer(g, p.alpha, matvec(p.a, p2), p1);
  add_outer(g, -p.alpha, p.y, p2);
  return g;
}

/// The three-term expression
///   α AAᵀy yᵀA M⁻³ + α A M⁻³ Aᵀy yᵀA − α y yᵀA M⁻²
/// which equals ∇F(A) only when y yᵀ commutes with AAᵀ (e.g. y along one
/// left singular vector). Kept for comparison against grad_f_at_a.
inline DenseMatrix grad_f_at_a_commuting(const DeepPriorProblem& p) {
  detail::require_l2(p, "grad_f_at_a_commuting");
  const Cholesky m = detail::regularized_gram(p.a, p.alpha);
  const Vec64 g = matvec_t(p.a, p.y);
  const Vec64 m2g = m.solve(m.solve(g));
  const Vec64 m3g = m.solve(m2g);
  DenseMatrix out(p.a.rows(), p.a.cols());
  add_outer(out, p.alpha, matvec(p.a, g), m3g);
  add_outer(out, p.alpha, matvec(p.a, m3g), g);
  add_outer(out, -p.alpha, p.y, m2g);
  return out;
}

// ---- gradient descent on B -------------------------------------------------

enum class DescentMode { ExactGradient, TruncatedUnroll };

inline std::string_view to_string(DescentMode m) {
  return m == DescentMode::ExactGradient ? "exact" : "unroll";
}

inline DescentMode parse_descent_mode(std::string_view s) {
  if (s == "exact") return DescentMode::ExactGradient;
  if (s == "unroll") return DescentMode::TruncatedUnroll;
  throw ValidationError("unknown descent mode '" + std::string(s) + "' (expected exact, unroll)");
}

struct DescentConfig {
  double eta = 0.05;
  std::size_t iters = 1000;
  std::size_t layers = 10;  // unroll depth L
  DescentMode mode = DescentMode::ExactGradient;
  std::uint64_t seed = 0;
  double z_scale = 1e-3;   // componentwise std of the network input z
  double b0_noise = 0.0;   // B₀ = A + b0_noise · N(0, 1) entrywise

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta))
      throw ValidationError("DescentConfig: eta must be finite and nonnegative");
    if (layers < 1) throw ValidationError("DescentConfig: unroll depth must be at least 1");
    if (!(z_scale >= 0.0)) throw ValidationError("DescentConfig: z_scale must be nonnegative");
    if (!(b0_noise >= 0.0)) throw ValidationError("DescentConfig: b0_noise must be nonnegative");
  }
};

/// Divergence guard: F(B) above this multiple of F(B₀) aborts the descent.
inline constexpr double divergence_factor = 1e6;

struct DescentTrace {
  std::vector<double> true_error;  // ‖x(B_k) − x†‖, empty when x† is unknown
  std::vector<double> objective;   // F(B_k)
  std::vector<double> frob_sq;     // ‖B_k − B_{k+1}‖_F²
  DenseMatrix b_opt;
  Vec64 x_opt;
  bool diverged = false;

  std::size_t size() const { return objective.size(); }
};

/// Called with (k, B_k) for k = 0 … iters, the last call being the final operator.
using DescentObserver = std::function<void(std::size_t, const DenseMatrix&)>;

namespace detail {

inline DenseMatrix initial_operator(const DeepPriorProblem& p, const DescentConfig& cfg,
                                    Rng& rng) {
  DenseMatrix b = p.a;
  if (cfg.b0_noise > 0.0)
    for (double& v : b.data()) v += cfg.b0_noise * rng.normal();
  return b;
}

inline bool diverging(double f, double f0) {
  return !std::isfinite(f) || (f0 > 0.0 && f > divergence_factor * f0);
}

inline DescentTrace descend_exact(const DeepPriorProblem& p, const DescentConfig& cfg,
                                  const Vec64* x_true, Rng& rng, const DescentObserver& observe) {
  require_l2(p, "descend_b (exact gradient)");
  DescentTrace t;
  DenseMatrix b = initial_operator(p, cfg, rng);
  DenseMatrix last_good = b;
  double f0 = 0.0;
  for (std::size_t k = 0; k < cfg.iters; ++k) {
    if (observe) observe(k, b);
    DeepPriorEval e;
    try {
      e = evaluate_deep_prior(p, b);
    } catch (const NumericalError&) {
      if (k == 0) throw;
      e.objective = std::numeric_limits<double>::infinity();
    }
    if (k == 0) f0 = e.objective;
    if (diverging(e.objective, f0) || !all_finite(e.gradient.data())) {
      t.diverged = true;
      b = std::move(last_good);
      break;
    }
    last_good = b;
    if (x_true) t.true_error.push_back(norm2(e.x - *x_true));
    t.objective.push_back(e.objective);
    t.frob_sq.push_back(cfg.eta * cfg.eta * frobenius_sq(e.gradient));
    for (std::size_t i = 0; i < b.data().size(); ++i) b.data()[i] -= cfg.eta * e.gradient.data()[i];
  }
  if (observe && !t.diverged) observe(t.size(), b);
  t.x_opt = tikhonov_solve(b, p.y, p.alpha);
  t.b_opt = std::move(b);
  return t;
}

/// Loss and ∇_B of ½‖A φ(x_in) − y‖² where φ is `layers` shared-weight
/// proximal layers built from B. Returns the network output in `out`.
inline double unrolled_loss_and_grad(const DeepPriorProblem& p, const DenseMatrix& b,
                                     std::span<const double> x_in, std::size_t layers,
                                     Vec64& out, DenseMatrix& grad) {
  const ProximalLayer layer(b, p.y, p.lambda, p.alpha, p.prox);
  std::vector<Vec64> inputs;
  std::vector<Vec64> pre;
  inputs.reserve(layers);
  pre.reserve(layers);
  Vec64 x(x_in.begin(), x_in.end());
  for (std::size_t j = 0; j < layers; ++j) {
    inputs.push_back(x);
    pre.push_back(layer.affine(x));
    x = prox_apply(p.prox, layer.threshold(), pre.back());
  }
  const Vec64 r = matvec(p.a, x) - p.y;
  const double loss = 0.5 * dot(r, r);

  grad = DenseMatrix(b.rows(), b.cols());
  Vec64 g = matvec_t(p.a, r);
  for (std::size_t j = layers; j-- > 0;) {
    Vec64 gp(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      gp[i] = prox_derivative(p.prox, layer.threshold(), pre[j][i]) * g[i];
    // pre = x − λBᵀ(Bx − y): ∂/∂B contributes −λ[(Bx − y) gpᵀ + (B gp) xᵀ].
    const Vec64 res = matvec(b, inputs[j]) - p.y;
    const Vec64 bgp = matvec(b, gp);
    add_outer(grad, -p.lambda, res, gp);
    add_outer(grad, -p.lambda, bgp, inputs[j]);
    g = matvec(layer.weight(), gp);  // W is symmetric
  }
  out = std::move(x);
  return loss;
}

inline DescentTrace descend_unroll(const DeepPriorProblem& p, const DescentConfig& cfg,
                                   const Vec64* x_true, Rng& rng, const DescentObserver& observe) {
  DescentTrace t;
  DenseMatrix b = initial_operator(p, cfg, rng);
  Vec64 state(p.a.cols());
  for (double& v : state) v = cfg.z_scale * rng.normal();
  DenseMatrix last_good = b;
  double f0 = 0.0;
  DenseMatrix grad;
  for (std::size_t k = 0; k < cfg.iters; ++k) {
    if (observe) observe(k, b);
    Vec64 out;
    const double loss = unrolled_loss_and_grad(p, b, state, cfg.layers, out, grad);
    if (k == 0) f0 = loss;
    if (diverging(loss, f0) || !all_finite(grad.data())) {
      t.diverged = true;
      b = std::move(last_good);
      break;
    }
    last_good = b;
    if (x_true) t.true_error.push_back(norm2(out - *x_true));
    t.objective.push_back(loss);
    t.frob_sq.push_back(cfg.eta * cfg.eta * frobenius_sq(grad));
    for (std::size_t i = 0; i < b.data().size(); ++i) b.data()[i] -= cfg.eta * grad.data()[i];
    // The next block of L layers starts from this block's output.
    state = std::move(out);
  }
  if (observe && !t.diverged) observe(t.size(), b);
  t.x_opt = unrolled_forward(b, p.y, state, cfg.layers, p.lambda, p.alpha, p.prox);
  t.b_opt = std::move(b);
  return t;
}

}  // namespace detail

/// Gradient descent B_{k+1} = B_k − η ∇F(B_k) starting from B₀ = A.
///
/// ExactGradient differentiates the closed-form Tikhonov solution (R = ½‖x‖²
/// only). TruncatedUnroll runs L proximal layers from the previous output,
/// starting at a seeded Gaussian z, and backpropagates through those L layers
/// only; it accepts every prox kind. Objective entries in that mode are the
/// network loss ½‖A φ(x) − y‖².
///
/// A diverging run stops early with `diverged` set and a partial trace;
/// `b_opt` is then the last iterate that evaluated finitely.
inline DescentTrace descend_b(const DeepPriorProblem& p, const DescentConfig& cfg,
                              const std::optional<Vec64>& x_true = std::nullopt,
                              const DescentObserver& observe = {}) {
  p.validate();
  cfg.validate();
  if (x_true && x_true->size() != p.a.cols())
    throw ValidationError("descend_b: x_true does not match A");
  Rng rng(cfg.seed);
  const Vec64* xt = x_true ? &*x_true : nullptr;
  return cfg.mode == DescentMode::ExactGradient ? detail::descend_exact(p, cfg, xt, rng, observe)
                                                : detail::descend_unroll(p, cfg, xt, rng, observe);
}

// ---- scalar β-iteration on a single singular triple ------------------------

/// c(β) = η σ (σ+δ)² (α + β² − σβ)(β² − α)/(β² + α)³
inline double beta_step(double beta, double sigma, double alpha, double delta, double eta) {
  const double b2 = beta * beta;
  const double den = b2 + alpha;
  return eta * sigma * (sigma + delta) * (sigma + delta) * (alpha + b2 - sigma * beta) *
         (b2 - alpha) / (den * den * den);
}

/// β_{ℓ+1} = β_ℓ − c(β_ℓ)
inline double beta_update(double beta, double sigma, double alpha, double delta, double eta) {
  return beta - beta_step(beta, sigma, alpha, delta, eta);
}

enum class Stability { Attractive, Repulsive };

inline std::string_view to_string(Stability s) {
  return s == Stability::Attractive ? "attractive" : "repulsive";
}

struct FixedPoint {
  double beta;
  Stability stability;
};

/// Central-difference step used to classify fixed points by the sign of ∂_β c.
inline constexpr double fixed_point_fd_step = 1e-7;

/// Real roots of c: ±√α and, when σ ≥ 2√α, σ/2 ± √(σ²/4 − α). A root is
/// attractive when ∂_β c > 0 there. The sign does not depend on η or δ.
inline std::vector<FixedPoint> beta_fixed_points(double sigma, double alpha) {
  if (!(alpha > 0.0) || !(sigma > 0.0))
    throw ValidationError("beta_fixed_points: sigma and alpha must be positive");
  const double ra = std::sqrt(alpha);
  std::vector<double> roots{ra, -ra};
  const double disc = sigma * sigma / 4.0 - alpha;
  if (disc >= 0.0) {
    roots.push_back(sigma / 2.0 + std::sqrt(disc));
    roots.push_back(sigma / 2.0 - std::sqrt(disc));
  }
  std::vector<FixedPoint> out;
  for (double r : roots) {
    const double h = fixed_point_fd_step;
    const double dc = (beta_step(r + h, sigma, alpha, 0.0, 1.0) -
                       beta_step(r - h, sigma, alpha, 0.0, 1.0)) / (2.0 * h);
    out.push_back({r, dc > 0.0 ? Stability::Attractive : Stability::Repulsive});
  }
  return out;
}

/// Coefficient of u in lim x(B_ℓ) for y = (σ+δ)v:
/// (σ+δ)/(2√α) when σ < 2√α, else (σ+δ)/σ.
inline double beta_limit_reconstruction(double sigma, double alpha, double delta) {
  if (!(alpha > 0.0) || !(sigma > 0.0))
    throw ValidationError("beta_limit_reconstruction: sigma and alpha must be positive");
  return sigma < 2.0 * std::sqrt(alpha) ? (sigma + delta) / (2.0 * std::sqrt(alpha))
                                        : (sigma + delta) / sigma;
}

/// Tikhonov coefficient β(σ+δ)/(β² + α) of x(B) on u.
inline double beta_reconstruction(double beta, double alpha, double delta, double sigma) {
  return beta * (sigma + delta) / (beta * beta + alpha);
}

struct BetaIterationResult {
  std::vector<double> betas;  // β₀, β₁, …
  std::vector<FixedPoint> fixed_points;
  double x_limit = 0.0;  // coefficient on u at the last β
  bool converged = false;
};

/// Iterates beta_update from β₀ until |β_{ℓ+1} − β_ℓ| ≤ tol or max_iters steps.
inline BetaIterationResult beta_iteration(double sigma, double alpha, double delta, double eta,
                                          double beta0, std::size_t max_iters,
                                          double tol = 1e-12) {
  BetaIterationResult r;
  r.fixed_points = beta_fixed_points(sigma, alpha);
  r.betas.push_back(beta0);
  double beta = beta0;
  for (std::size_t l = 0; l < max_iters; ++l) {
    const double next = beta_update(beta, sigma, alpha, delta, eta);
    r.betas.push_back(next);
    const bool done = std::abs(next - beta) <= tol;
    beta = next;
    if (!std::isfinite(beta)) break;
    if (done) {
      r.converged = true;
      break;
    }
  }
  r.x_limit = beta_reconstruction(beta, alpha, delta, sigma);
  return r;
}

// ---- constrained global minimizer ------------------------------------------

/// β_i = σ_i/2 + √(σ_i²/4 − α) when σ_i ≥ 2√α, else √α.
inline double optimal_singular_value(double sigma, double alpha) {
  const double ra = std::sqrt(alpha);
  return sigma >= 2.0 * ra ? sigma / 2.0 + std::sqrt(std::max(0.0, sigma * sigma / 4.0 - alpha))
                           : ra;
}

/// B_α = Σ β_i v_i u_iᵀ over the singular system of A. Independent of y.
inline DenseMatrix optimal_b(const Svd& svd_of_a, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("optimal_b: alpha must be positive");
  DenseMatrix b(svd_of_a.v.rows(), svd_of_a.u.rows());
  for (std::size_t k = 0; k < svd_of_a.sigma.size(); ++k)
    add_outer(b, optimal_singular_value(svd_of_a.sigma[k], alpha), svd_of_a.v.col(k),
              svd_of_a.u.col(k));
  return b;
}

}  // namespace adp
