// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "adp/deep_prior.hpp"
#include "adp/filters.hpp"
#include "adp/harness.hpp"
#include "adp/operators.hpp"
#include "adp/solvers.hpp"

using namespace adp;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec64 random_vector(std::size_t n, Rng& rng) {
  Vec64 v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = gradcheck(8, 1, 1e-5, 20);
  const double secs = seconds_since(t0);
  report(1, r.passed && secs < 10.0, "gradients match central differences, n=8, 20 instances",
         fmt("grad_f %.2e, grad_f_at_a %.2e, %.2f s", r.max_rel_error_grad_f,
             r.max_rel_error_grad_f_at_a, secs));
}

void landweber_equivalence() {
  const std::size_t n = 50, steps = 100;
  const DenseMatrix a = make_integration(n).matrix;
  Rng rng(2);
  const Vec64 y = random_vector(n, rng);
  const double eta = default_step(a);
  const auto lw = landweber(a, y, Vec64(n, 0.0), eta, steps);
  // Trivial network φ_Θ(z) = Θ, descent on ½‖AΘ − y‖².
  Vec64 theta(n, 0.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec64 grad = matvec_t(a, matvec(a, theta) - y);
    theta = theta - eta * grad;
    worst = std::max(worst, max_abs(theta - lw.iterates[k]));
  }
  report(2, worst <= 1e-12, "trivial-network descent equals Landweber, n=50, 100 steps",
         fmt("max deviation %.2e", worst));
}

void unrolled_chain() {
  const std::size_t n = 50;
  const double alpha = 1e-2;
  const DenseMatrix a = make_integration(n).matrix;
  Rng rng(3);
  const Vec64 y = random_vector(n, rng);
  Vec64 z = random_vector(n, rng);
  for (double& v : z) v *= 1e-3;
  const Vec64 xl = unrolled_forward(a, y, z, 10000, default_step(a), alpha, ProxKind::HalfSquaredL2);
  const Vec64 xt = tikhonov_solve(a, y, alpha);
  const double rel = norm2(xl - xt) / norm2(xt);
  report(3, rel <= 1e-8, "unrolled L=1e4 matches closed-form Tikhonov, n=50, alpha=1e-2",
         fmt("relative difference %.2e", rel));
}

void beta_fixed_point_limits() {
  const double delta = 0.1, eta = 0.05;
  bool ok = true;
  std::string detail;
  for (auto [sigma, alpha] : {std::pair{1.0, 1.0}, {1.0, 0.04}, {0.3, 0.04}}) {
    const auto r = beta_iteration(sigma, alpha, delta, eta, sigma, 1000000, 1e-12);
    const double limit = r.betas.back();
    bool attractive = false;
    for (const auto& fp : r.fixed_points)
      if (fp.stability == Stability::Attractive && std::abs(fp.beta - limit) <= 1e-9) attractive = true;
    const double expected =
        sigma < 2 * std::sqrt(alpha) ? (sigma + delta) / (2 * std::sqrt(alpha)) : (sigma + delta) / sigma;
    const double err = std::abs(r.x_limit - expected);
    ok = ok && r.converged && attractive && err <= 1e-9;
    detail += fmt("%s(%g,%g): beta=%.9f %s, coef err %.1e", detail.empty() ? "" : "; ", sigma, alpha,
                  limit, attractive ? "attractive" : "NOT attractive", err);
  }
  report(4, ok, "scalar iteration reaches an attractive root with the predicted coefficient", detail);
}

void soft_tsvd_equivalence() {
  const std::size_t n = 50;
  const DenseMatrix a = make_integration(n).matrix;
  const Svd s = svd(a);
  Rng rng(5);
  double worst = 0.0;
  for (double alpha : {1e-4, 1e-3, 1e-2}) {
    const DenseMatrix b = optimal_b(s, alpha);
    const SpectralFilter f(FilterFamily::SoftTsvd, alpha);
    for (int k = 0; k < 10; ++k) {
      const Vec64 y = random_vector(n, rng);
      const Vec64 x1 = tikhonov_solve(b, y, alpha);
      const Vec64 x2 = filtered_pseudoinverse(s, f, y);
      worst = std::max(worst, norm2(x1 - x2) / norm2(x2));
    }
  }
  report(5, worst <= 1e-10, "Tikhonov with optimal B equals Soft-TSVD, n=50, 10 data, 3 alphas",
         fmt("max relative difference %.2e", worst));
}

void order_optimality() {
  const Vec64 grid = logspace(1e-6, 10.0, 2000);
  bool ok = true;
  std::string detail;
  for (double alpha : {1e-4, 1e-2}) {
    for (double nu : {0.5, 1.0, 2.0}) {
      const auto r = check_order_optimality(SpectralFilter(FilterFamily::SoftTsvd, alpha), nu, grid);
      if (!r.all_ok()) {
        ok = false;
        detail += fmt("soft_tsvd alpha=%g nu=%g failed; ", alpha, nu);
      }
    }
    const auto t = check_order_optimality(SpectralFilter(FilterFamily::Tikhonov, alpha), 3.0, grid);
    if (t.cond2_ok) {
      ok = false;
      detail += fmt("tikhonov alpha=%g nu=3 passed condition 2; ", alpha);
    }
  }
  if (detail.empty()) detail = "soft_tsvd passes at nu 0.5,1,2; tikhonov fails condition 2 at nu=3";
  report(6, ok, "order-optimality conditions", detail);
}

void experiment_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fs::temp_directory_path() / "adp_acceptance_c7";
  bool ok = true;
  std::string detail;
  for (std::size_t index : {2u, 4u, 8u}) {
    ExperimentConfig cfg;
    cfg.n = 200;
    cfg.alphas = {1e-3, 1e-2};
    cfg.target_snr_db = 17.0;
    cfg.x_dagger = SingularVectorTarget{index};
    cfg.descent.mode = DescentMode::ExactGradient;
    cfg.descent.eta = 0.05;
    cfg.descent.iters = 5000;
    const auto res = run_experiment(cfg, dir / std::to_string(index));
    for (const auto& r : res.per_alpha) {
      const bool better = !r.diverged && r.final_true_error < r.tikhonov_true_error;
      ok = ok && better;
      detail += fmt("%sidx %zu alpha %g: %.4f vs %.4f%s", detail.empty() ? "" : "; ", index, r.alpha,
                    r.final_true_error, r.tikhonov_true_error, better ? "" : " WORSE");
    }
  }
  fs::remove_all(dir);
  const double secs = seconds_since(t0);
  report(7, ok && secs <= 600.0, "B_opt beats Tikhonov true error, n=200, 17 dB, 5000 exact steps",
         detail + fmt("; %.0f s", secs));
}

void rank_one_confinement() {
  const std::size_t n = 50, k = 4;
  const DenseMatrix a = make_integration(n).matrix;
  const Svd s = svd(a);
  const Vec64 u = s.u.col(k), v = s.v.col(k);
  const double sigma = s.sigma[k], delta = 0.1, alpha = 1e-3;
  const auto p = make_deep_prior_problem(a, (sigma + delta) * v, alpha);
  DescentConfig cfg;
  cfg.eta = 0.05;
  cfg.iters = 2000;
  double worst = 0.0;
  std::size_t seen = 0;
  const auto trace = descend_b(p, cfg, u, [&](std::size_t, const DenseMatrix& b) {
    DenseMatrix d = b - a;
    add_outer(d, -dot(v, matvec(d, u)), v, u);
    worst = std::max(worst, std::sqrt(frobenius_sq(d)));
    ++seen;
  });
  report(8, !trace.diverged && worst <= 1e-9, "descent stays on the rank-one path for singular data, n=50",
         fmt("max off-span norm %.2e over %zu iterates", worst, seen));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void determinism() {
  const fs::path dir = fs::temp_directory_path() / "adp_acceptance_c9";
  fs::remove_all(dir);
  const std::string flags =
      " experiment --n 40 --alphas 1e-3,1e-2 --target-snr-db 17 --seed 11 --iters 50 --mode unroll --L 10";
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string(ADP_CLI_PATH) + flags + " --out " + (dir / run).string() + " >/dev/null";
    const int status = std::system(cmd.c_str());
    ok = ok && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }
  std::size_t compared = 0;
  if (ok)
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      ok = ok && slurp(e.path()) == slurp(dir / "b" / e.path().filename());
      ++compared;
    }
  fs::remove_all(dir);
  report(9, ok && compared == 7, "repeated CLI experiment runs write identical CSVs",
         fmt("%zu files compared", compared));
}

}  // namespace

int main() {
  gradient_oracle();
  landweber_equivalence();
  unrolled_chain();
  beta_fixed_point_limits();
  soft_tsvd_equivalence();
  order_optimality();
  experiment_reproduction();
  rank_one_confinement();
  determinism();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
