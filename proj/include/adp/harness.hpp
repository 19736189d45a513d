#pragma once

// Experiment drivers: seeded problem generation, SNR calibration, the α-sweep,
// filter-response export, gradient self-checks and CSV persistence.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "adp/deep_prior.hpp"
#include "adp/filters.hpp"
#include "adp/linalg.hpp"
#include "adp/operators.hpp"
#include "adp/random.hpp"
#include "adp/solvers.hpp"

namespace adp {

// ---- CSV -------------------------------------------------------------------

/// Rectangular table of reals with a header row. Written with 17 significant
/// digits; +∞ is written as "inf" (the only non-finite value allowed).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> r) {
    if (r.size() != header.size()) throw ValidationError("CsvTable: row width does not match header");
    rows.push_back(std::move(r));
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw ValidationError("CsvTable: no column named '" + name + "'");
  }

  Vec64 column_values(const std::string& name) const {
    const std::size_t j = column(name);
    Vec64 out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[j]);
    return out;
  }
};

inline std::string format_real(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  if (!std::isfinite(v)) throw NumericalError("CSV: refusing to write non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(const CsvTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  for (std::size_t j = 0; j < t.header.size(); ++j) out << (j ? "," : "") << t.header[j];
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_real(r[j]);
    out << '\n';
  }
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

inline double parse_real(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path.string() + "' is empty");
  t.header = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (const auto& cell : split(line, ',')) r.push_back(parse_real(cell));
    t.add_row(std::move(r));
  }
  return t;
}

/// A signal file: one value per line, or CSV whose first column holds the
/// values. Non-numeric lines (headers) are skipped.
inline Vec64 load_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  Vec64 out;
  std::string line;
  while (std::getline(in, line)) {
    const auto cells = split(line, ',');
    if (cells.empty() || cells[0].empty()) continue;
    try {
      out.push_back(parse_real(cells[0]));
    } catch (const ValidationError&) {
      if (!out.empty()) throw;
    }
  }
  if (out.empty()) throw ValidationError("'" + path.string() + "' contains no values");
  return out;
}

// ---- problem generation ----------------------------------------------------

struct SingularVectorTarget {
  std::size_t index = 4;  // 0-based, singular values sorted nonincreasing
};
struct CustomTarget {
  std::filesystem::path file;
};
using XDaggerKind = std::variant<SingularVectorTarget, CustomTarget>;

struct ExperimentConfig {
  std::size_t n = 200;
  std::vector<double> alphas{1e-3, 1e-2};
  double delta = 0.0;
  std::optional<double> target_snr_db;  // overrides delta when set
  std::uint64_t seed = 0;
  XDaggerKind x_dagger = SingularVectorTarget{};
  DescentConfig descent;

  void validate() const {
    if (n < 2) throw ValidationError("experiment: n must be at least 2");
    if (alphas.empty()) throw ValidationError("experiment: need at least one alpha");
    for (double a : alphas)
      if (!(a > 0.0)) throw ValidationError("experiment: alphas must be positive");
    if (!(delta >= 0.0)) throw ValidationError("experiment: delta must be nonnegative");
    if (target_snr_db && !std::isfinite(*target_snr_db))
      throw ValidationError("experiment: target SNR must be finite");
    descent.validate();
  }
};

struct Problem {
  DenseMatrix a;
  Vec64 x_dagger;
  Vec64 y_delta;
  double delta = 0.0;
  double snr_db = 0.0;
};

/// 10·log₁₀(‖signal‖² / ‖noise‖²); +∞ for zero noise.
inline double snr_db(std::span<const double> signal, std::span<const double> noise) {
  const double pn = dot(noise, noise);
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(dot(signal, signal) / pn);
}

/// δ with snr_db(signal, δτ) = target, by bisection on the measured SNR.
inline double calibrate_delta(std::span<const double> signal, std::span<const double> tau,
                              double target_db) {
  if (dot(tau, tau) == 0.0 || dot(signal, signal) == 0.0)
    throw ValidationError("calibrate_delta: signal and noise must be nonzero");
  auto measured = [&](double d) {
    Vec64 noise(tau.begin(), tau.end());
    for (double& v : noise) v *= d;
    return snr_db(signal, noise);
  };
  double lo = 0.0, hi = 1.0;
  while (measured(hi) > target_db) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("calibrate_delta: cannot bracket target SNR");
  }
  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (measured(mid) > target_db ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// y = A x† + δτ with A the integration matrix and τ ~ N(0, I) drawn from `seed`.
inline Problem make_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  Problem p;
  p.a = make_integration(cfg.n).matrix;
  if (const auto* sv = std::get_if<SingularVectorTarget>(&cfg.x_dagger)) {
    if (sv->index >= cfg.n)
      throw ValidationError("singular vector index " + std::to_string(sv->index) +
                            " out of range for n = " + std::to_string(cfg.n));
    p.x_dagger = svd(p.a).u.col(sv->index);
  } else {
    p.x_dagger = load_vector(std::get<CustomTarget>(cfg.x_dagger).file);
    if (p.x_dagger.size() != cfg.n)
      throw ValidationError("x_dagger file has " + std::to_string(p.x_dagger.size()) +
                            " values, expected " + std::to_string(cfg.n));
  }
  const Vec64 signal = matvec(p.a, p.x_dagger);
  Rng rng(cfg.seed);
  Vec64 tau(cfg.n);
  for (double& v : tau) v = rng.normal();
  p.delta = cfg.target_snr_db ? calibrate_delta(signal, tau, *cfg.target_snr_db) : cfg.delta;
  const Vec64 noise = p.delta * tau;
  p.y_delta = signal + noise;
  p.snr_db = snr_db(signal, noise);
  return p;
}

/// Cell midpoints t_i = (i + ½)h.
inline Vec64 grid_midpoints(std::size_t n) {
  Vec64 t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return t;
}

inline std::string alpha_tag(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

// ---- α-sweep ---------------------------------------------------------------

struct AlphaResult {
  double alpha = 0.0;
  double final_true_error = 0.0;
  double tikhonov_true_error = 0.0;
  bool diverged = false;
};

struct ExperimentResult {
  Problem problem;
  std::vector<AlphaResult> per_alpha;
  std::vector<std::filesystem::path> files;

  bool any_diverged() const {
    for (const auto& r : per_alpha)
      if (r.diverged) return true;
    return false;
  }
};

/// Writes trace_<α>.csv, recon_<α>.csv, b_opt_<α>.csv per α and summary.csv.
/// The descent for the k-th α uses seed + k.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::filesystem::path& outdir) {
  ExperimentResult res;
  res.problem = make_problem(cfg);
  const Problem& pb = res.problem;
  std::filesystem::create_directories(outdir);
  const Vec64 t = grid_midpoints(cfg.n);

  CsvTable summary{{"alpha", "final_true_error", "tikhonov_true_error", "snr_db"}, {}};
  for (std::size_t k = 0; k < cfg.alphas.size(); ++k) {
    const double alpha = cfg.alphas[k];
    DescentConfig dc = cfg.descent;
    dc.seed = cfg.descent.seed + k;
    const DeepPriorProblem dp = make_deep_prior_problem(pb.a, pb.y_delta, alpha, ProxKind::HalfSquaredL2);
    const DescentTrace tr = descend_b(dp, dc, pb.x_dagger);
    const Vec64 x_tik = tikhonov_solve(pb.a, pb.y_delta, alpha);

    AlphaResult ar{alpha, norm2(tr.x_opt - pb.x_dagger), norm2(x_tik - pb.x_dagger), tr.diverged};
    res.per_alpha.push_back(ar);
    const std::string tag = alpha_tag(alpha);

    CsvTable trace{{"iter", "true_error", "objective", "frob_sq"}, {}};
    for (std::size_t i = 0; i < tr.size(); ++i)
      trace.add_row({static_cast<double>(i), tr.true_error[i], tr.objective[i], tr.frob_sq[i]});
    CsvTable recon{{"t", "x_dagger", "x_tikhonov", "x_bopt"}, {}};
    for (std::size_t i = 0; i < cfg.n; ++i) recon.add_row({t[i], pb.x_dagger[i], x_tik[i], tr.x_opt[i]});
    CsvTable bopt;
    for (std::size_t j = 0; j < tr.b_opt.cols(); ++j) bopt.header.push_back("c" + std::to_string(j));
    for (std::size_t i = 0; i < tr.b_opt.rows(); ++i) {
      auto r = tr.b_opt.row(i);
      bopt.add_row({r.begin(), r.end()});
    }
    for (auto [table, name] : {std::pair{&trace, "trace_"}, std::pair{&recon, "recon_"},
                               std::pair{&bopt, "b_opt_"}}) {
      const auto path = outdir / (std::string(name) + tag + ".csv");
      write_csv(*table, path);
      res.files.push_back(path);
    }
    summary.add_row({alpha, ar.final_true_error, ar.tikhonov_true_error, pb.snr_db});
  }
  write_csv(summary, outdir / "summary.csv");
  res.files.push_back(outdir / "summary.csv");
  return res;
}

// ---- filter responses and optimality reports -------------------------------

inline CsvTable filter_response_table(std::span<const double> alphas,
                                      std::span<const double> sigma_grid) {
  if (sigma_grid.empty()) throw ValidationError("filter response: empty sigma grid");
  CsvTable t{{"alpha", "sigma", "tikhonov", "tsvd", "soft_tsvd"}, {}};
  for (double a : alphas) {
    const SpectralFilter tik(FilterFamily::Tikhonov, a), tsvd(FilterFamily::Tsvd, a),
        soft(FilterFamily::SoftTsvd, a);
    for (double s : sigma_grid)
      t.add_row({a, s, filter_value(tik, s), filter_value(tsvd, s), filter_value(soft, s)});
  }
  return t;
}

inline CsvTable export_filter_response(std::span<const double> alphas,
                                       std::span<const double> sigma_grid,
                                       const std::filesystem::path& outpath) {
  CsvTable t = filter_response_table(alphas, sigma_grid);
  write_csv(t, outpath);
  return t;
}

/// One row per (family, ν). family: 0 = Tikhonov, 1 = TSVD, 2 = Soft-TSVD.
inline CsvTable optimality_table(double alpha, std::span<const double> nus,
                                 std::span<const double> sigma_grid) {
  CsvTable t{{"family", "alpha", "nu", "gamma", "c1", "c2", "c3", "sup1", "bound1", "cond1",
              "sup2", "bound2", "cond2", "sup3", "bound3", "cond3"},
             {}};
  const FilterFamily families[] = {FilterFamily::Tikhonov, FilterFamily::Tsvd,
                                   FilterFamily::SoftTsvd};
  for (std::size_t f = 0; f < 3; ++f)
    for (double nu : nus) {
      const auto r = check_order_optimality(SpectralFilter(families[f], alpha), nu, sigma_grid);
      t.add_row({static_cast<double>(f), alpha, nu, r.gamma, r.c1, r.c2, r.c3, r.sup1, r.bound1,
                 r.cond1_ok ? 1.0 : 0.0, r.sup2, r.bound2, r.cond2_ok ? 1.0 : 0.0, r.sup3,
                 r.bound3, r.cond3_ok ? 1.0 : 0.0});
    }
  return t;
}

// ---- gradient self-check ---------------------------------------------------

using GradientFn = std::function<DenseMatrix(const DeepPriorProblem&, const DenseMatrix&)>;

/// Central differences of F(B), entry by entry.
inline DenseMatrix finite_difference_gradient(const DeepPriorProblem& p, const DenseMatrix& b,
                                              double step) {
  DenseMatrix g(b.rows(), b.cols());
  DenseMatrix work(b);
  for (std::size_t i = 0; i < b.data().size(); ++i) {
    const double orig = work.data()[i];
    work.data()[i] = orig + step;
    const double fp = objective_f(p, work);
    work.data()[i] = orig - step;
    const double fm = objective_f(p, work);
    work.data()[i] = orig;
    g.data()[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// max|g − fd| / max|fd|, or max|g| if fd vanishes identically.
inline double gradient_relative_error(const DenseMatrix& g, const DenseMatrix& fd) {
  const double scale = max_abs(fd);
  const double diff = max_abs(g - fd);
  return scale > 0.0 ? diff / scale : diff;
}

struct GradcheckReport {
  std::size_t n = 0;
  std::size_t instances = 0;
  double max_rel_error_grad_f = 0.0;
  double max_rel_error_grad_f_at_a = 0.0;
  double tol = 0.0;
  bool passed = false;
};

inline constexpr double gradcheck_step = 1e-5;

/// Seeded random instance: A, B with N(0, 1/n) entries, y ~ N(0, I),
/// α log-uniform on [1e-3, 1].
struct GradcheckInstance {
  DeepPriorProblem problem;
  DenseMatrix b;
};

inline GradcheckInstance random_gradcheck_instance(std::size_t n, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  DenseMatrix a(n, n), b(n, n);
  Vec64 y(n);
  for (double& v : a.data()) v = s * rng.normal();
  for (double& v : b.data()) v = s * rng.normal();
  for (double& v : y) v = rng.normal();
  const double alpha = std::pow(10.0, -3.0 * rng.uniform());
  return {DeepPriorProblem{std::move(a), std::move(y), alpha, ProxKind::HalfSquaredL2, 1.0},
          std::move(b)};
}

/// Compares `at_b` at random B and `at_a` at B = A against central differences
/// over `instances` seeded problems.
inline GradcheckReport gradcheck_with(std::size_t n, std::uint64_t seed, double tol,
                                      const GradientFn& at_b,
                                      const std::function<DenseMatrix(const DeepPriorProblem&)>& at_a,
                                      std::size_t instances = 20) {
  if (n == 0 || n > 16) throw ValidationError("gradcheck: n must be in [1, 16]");
  if (!(tol > 0.0)) throw ValidationError("gradcheck: tol must be positive");
  GradcheckReport r{n, instances, 0.0, 0.0, tol, false};
  Rng rng(seed);
  for (std::size_t k = 0; k < instances; ++k) {
    const auto inst = random_gradcheck_instance(n, rng);
    const auto fd_b = finite_difference_gradient(inst.problem, inst.b, gradcheck_step);
    r.max_rel_error_grad_f =
        std::max(r.max_rel_error_grad_f, gradient_relative_error(at_b(inst.problem, inst.b), fd_b));
    const auto fd_a = finite_difference_gradient(inst.problem, inst.problem.a, gradcheck_step);
    r.max_rel_error_grad_f_at_a =
        std::max(r.max_rel_error_grad_f_at_a, gradient_relative_error(at_a(inst.problem), fd_a));
  }
  r.passed = r.max_rel_error_grad_f <= tol && r.max_rel_error_grad_f_at_a <= tol;
  return r;
}

inline GradcheckReport gradcheck(std::size_t n, std::uint64_t seed, double tol,
                                 std::size_t instances = 20) {
  return gradcheck_with(
      n, seed, tol, [](const DeepPriorProblem& p, const DenseMatrix& b) { return grad_f(p, b); },
      [](const DeepPriorProblem& p) { return grad_f_at_a(p); }, instances);
}

// ---- Landweber trace -------------------------------------------------------

/// Landweber on the integration problem from x⁰ = 0; one row per iterate.
inline CsvTable landweber_table(const Problem& pb, double eta, std::size_t iters) {
  const Vec64 x0(pb.a.cols(), 0.0);
  const auto lw = landweber(pb.a, pb.y_delta, x0, eta, iters);
  CsvTable t{{"iter", "residual", "true_error"}, {}};
  for (std::size_t k = 0; k < lw.iterates.size(); ++k) {
    const Vec64& x = lw.iterates[k];
    t.add_row({static_cast<double>(k + 1), norm2(matvec(pb.a, x) - pb.y_delta),
               norm2(x - pb.x_dagger)});
  }
  return t;
}

// ---- configuration files ---------------------------------------------------

/// Reads `key=value` lines ('#' comments allowed) and returns them as
/// `--key value` argument pairs.
inline std::vector<std::string> config_file_args(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  std::vector<std::string> args;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    args.push_back("--" + key);
    args.push_back(trim(line.substr(eq + 1)));
  }
  return args;
}

/// Splices the contents of `--config FILE` in place of that flag, so any
/// flag given later on the command line overrides the file.
inline std::vector<std::string> expand_config_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string file;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file argument");
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    auto extra = config_file_args(file);
    out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

inline std::vector<double> parse_real_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& cell : split(s, ',')) {
    if (cell.empty()) continue;
    out.push_back(parse_real(cell));
  }
  if (out.empty()) throw ValidationError("empty list '" + s + "'");
  return out;
}

}  // namespace adp
