#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "adp/harness.hpp"

using namespace adp;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("adp_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ADP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n = 20;
  cfg.alphas = {1e-3, 1e-2};
  cfg.delta = 0.01;
  cfg.seed = 3;
  cfg.x_dagger = SingularVectorTarget{2};
  cfg.descent.iters = 5;
  return cfg;
}

}  // namespace

// ---- CSV --------------------------------------------------------------------------

TEST(FormatReal, SeventeenDigitsAndInfSentinel) {
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_THROW(format_real(std::nan("")), NumericalError);
  EXPECT_THROW(format_real(-std::numeric_limits<double>::infinity()), NumericalError);
}

TEST(Csv, RoundTripIsExact) {
  TempDir dir;
  CsvTable t{{"a", "b"}, {}};
  Rng rng(1);
  for (int i = 0; i < 50; ++i) t.add_row({rng.normal() * 1e-7, std::exp(30 * rng.normal())});
  t.add_row({1.0, std::numeric_limits<double>::infinity()});
  write_csv(t, dir.path() / "t.csv");
  const CsvTable r = read_csv(dir.path() / "t.csv");
  EXPECT_EQ(r.header, t.header);
  EXPECT_EQ(r.rows, t.rows);
}

TEST(Csv, RowWidthMustMatchHeader) {
  CsvTable t{{"a", "b"}, {}};
  EXPECT_THROW(t.add_row({1.0}), ValidationError);
  EXPECT_THROW(t.column("c"), ValidationError);
}

TEST(Csv, LoadVectorSkipsHeader) {
  TempDir dir;
  std::ofstream(dir.path() / "x.txt") << "x\n1.5\n-2\n\n3e-1\n";
  EXPECT_EQ(load_vector(dir.path() / "x.txt"), (Vec64{1.5, -2.0, 0.3}));
}

TEST(ParseRealList, CommaSeparated) {
  EXPECT_EQ(parse_real_list("1e-3,1e-2"), (Vec64{1e-3, 1e-2}));
  EXPECT_THROW(parse_real_list(""), ValidationError);
  EXPECT_THROW(parse_real_list("1,x"), ValidationError);
}

// ---- problem setup ------------------------------------------------------------------

TEST(MakeProblem, NoiselessDataHasInfiniteSnr) {
  ExperimentConfig cfg = small_config();
  cfg.delta = 0.0;
  const Problem p = make_problem(cfg);
  EXPECT_EQ(p.y_delta, matvec(p.a, p.x_dagger));
  EXPECT_TRUE(std::isinf(p.snr_db));
}

TEST(MakeProblem, SameSeedSameData) {
  const ExperimentConfig cfg = small_config();
  EXPECT_EQ(make_problem(cfg).y_delta, make_problem(cfg).y_delta);
  ExperimentConfig other = cfg;
  other.seed = 4;
  EXPECT_NE(make_problem(cfg).y_delta, make_problem(other).y_delta);
}

TEST(MakeProblem, SnrCalibrationMatchesClosedForm) {
  ExperimentConfig cfg = small_config();
  cfg.n = 200;
  cfg.x_dagger = SingularVectorTarget{4};
  cfg.target_snr_db = 17.0;
  const Problem p = make_problem(cfg);
  Rng rng(cfg.seed);
  Vec64 tau(cfg.n);
  for (double& v : tau) v = rng.normal();
  const double expected = norm2(matvec(p.a, p.x_dagger)) / norm2(tau) * std::pow(10.0, -17.0 / 20.0);
  EXPECT_NEAR(p.delta, expected, 1e-12 * expected);
  EXPECT_NEAR(p.snr_db, 17.0, 1e-9);
}

TEST(MakeProblem, IndexOutOfRange) {
  ExperimentConfig cfg = small_config();
  cfg.x_dagger = SingularVectorTarget{20};
  EXPECT_THROW(make_problem(cfg), ValidationError);
}

TEST(MakeProblem, CustomTargetLengthChecked) {
  TempDir dir;
  std::ofstream(dir.path() / "x.txt") << "1\n2\n3\n";
  ExperimentConfig cfg = small_config();
  cfg.x_dagger = CustomTarget{dir.path() / "x.txt"};
  EXPECT_THROW(make_problem(cfg), ValidationError);
}

// ---- experiment -----------------------------------------------------------------------

TEST(RunExperiment, ZeroIterationsReproducesTikhonov) {
  TempDir dir;
  ExperimentConfig cfg = small_config();
  cfg.descent.iters = 0;
  const auto res = run_experiment(cfg, dir.path());
  for (double alpha : cfg.alphas) {
    const CsvTable recon = read_csv(dir.path() / ("recon_" + alpha_tag(alpha) + ".csv"));
    EXPECT_EQ(recon.column_values("x_bopt"), recon.column_values("x_tikhonov"));
    EXPECT_TRUE(read_csv(dir.path() / ("trace_" + alpha_tag(alpha) + ".csv")).rows.empty());
  }
  for (const auto& r : res.per_alpha) EXPECT_EQ(r.final_true_error, r.tikhonov_true_error);
}

TEST(RunExperiment, SummaryMatchesReconstructionFiles) {
  TempDir dir;
  const ExperimentConfig cfg = small_config();
  run_experiment(cfg, dir.path());
  const CsvTable summary = read_csv(dir.path() / "summary.csv");
  ASSERT_EQ(summary.rows.size(), cfg.alphas.size());
  for (const auto& row : summary.rows) {
    const CsvTable recon = read_csv(dir.path() / ("recon_" + alpha_tag(row[0]) + ".csv"));
    const Vec64 xd = recon.column_values("x_dagger");
    EXPECT_NEAR(row[summary.column("tikhonov_true_error")], norm2(recon.column_values("x_tikhonov") - xd),
                1e-12);
    EXPECT_NEAR(row[summary.column("final_true_error")], norm2(recon.column_values("x_bopt") - xd), 1e-12);
  }
}

TEST(RunExperiment, CustomTargetEmitsAllFiles) {
  TempDir dir;
  ExperimentConfig cfg = small_config();
  {
    std::ofstream f(dir.path() / "x.txt");
    for (double t : grid_midpoints(cfg.n)) f << format_real(t < 0.5 ? 1.0 : 0.0) << "\n";
  }
  cfg.x_dagger = CustomTarget{dir.path() / "x.txt"};
  const auto res = run_experiment(cfg, dir.path() / "out");
  EXPECT_EQ(res.files.size(), 3 * cfg.alphas.size() + 1);
  for (const auto& f : res.files) {
    ASSERT_TRUE(fs::exists(f)) << f;
    const CsvTable t = read_csv(f);
    for (const auto& row : t.rows)
      for (double v : row)
        if (f.filename() != "summary.csv") EXPECT_TRUE(std::isfinite(v)) << f;
  }
  const CsvTable trace = read_csv(dir.path() / "out" / "trace_0.001.csv");
  EXPECT_EQ(trace.rows.size(), 5u);
  const CsvTable bopt = read_csv(dir.path() / "out" / "b_opt_0.001.csv");
  EXPECT_EQ(bopt.rows.size(), cfg.n);
  EXPECT_EQ(bopt.header.size(), cfg.n);
}

TEST(RunExperiment, ByteIdenticalReruns) {
  TempDir dir;
  ExperimentConfig cfg = small_config();
  cfg.descent.mode = DescentMode::TruncatedUnroll;
  run_experiment(cfg, dir.path() / "a");
  run_experiment(cfg, dir.path() / "b");
  for (const auto& e : fs::directory_iterator(dir.path() / "a"))
    EXPECT_EQ(slurp(e.path()), slurp(dir.path() / "b" / e.path().filename())) << e.path();
}

// ---- filters / optimality ---------------------------------------------------------------

TEST(FilterExport, LongFormat) {
  TempDir dir;
  const Vec64 alphas{1e-2, 0.25}, grid{0.01, 0.2, 1.0};
  const CsvTable t = export_filter_response(alphas, grid, dir.path() / "f.csv");
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(read_csv(dir.path() / "f.csv").rows, t.rows);
  // σ = 0.2 is the Soft-TSVD knee for α = 0.01.
  EXPECT_EQ(t.rows[1][t.column("soft_tsvd")], 1.0);
  EXPECT_DOUBLE_EQ(t.rows[4][t.column("soft_tsvd")], 0.2);  // α = 0.25, σ = 0.2
}

TEST(OptimalityTable, RowsPerFamilyAndNu) {
  const Vec64 nus{0.5, 3.0};
  const CsvTable t = optimality_table(1e-2, nus, logspace(1e-6, 10.0, 500));
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.header.size(), 16u);
  for (const auto& r : t.rows) {
    if (r[0] == 2.0) EXPECT_EQ(r[t.column("cond2")], 1.0);
    if (r[0] == 0.0 && r[2] == 3.0) EXPECT_EQ(r[t.column("cond2")], 0.0);
  }
}

// ---- gradcheck ------------------------------------------------------------------------

TEST(Gradcheck, PassesForSmallInstance) {
  const auto r = gradcheck(4, 7, 1e-5);
  EXPECT_TRUE(r.passed) << r.max_rel_error_grad_f << " " << r.max_rel_error_grad_f_at_a;
  EXPECT_EQ(r.instances, 20u);
}

TEST(Gradcheck, ZeroDataGivesZeroGradients) {
  Rng rng(2);
  auto inst = random_gradcheck_instance(5, rng);
  inst.problem.y.assign(5, 0.0);
  EXPECT_EQ(max_abs(grad_f(inst.problem, inst.b)), 0.0);
  EXPECT_EQ(max_abs(grad_f_at_a(inst.problem)), 0.0);
  EXPECT_EQ(max_abs(finite_difference_gradient(inst.problem, inst.b, gradcheck_step)), 0.0);
}

TEST(Gradcheck, CorruptedGradientFails) {
  // Flip the sign of the y wᵀ term.
  auto corrupted = [](const DeepPriorProblem& p, const DenseMatrix& b) {
    const Vec64 x = tikhonov_solve(b, p.y, p.alpha);
    DenseMatrix m = gram(b);
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += p.alpha;
    const Vec64 w = solve_spd(m, matvec_t(p.a, matvec(p.a, x) - p.y));
    DenseMatrix g(b.rows(), b.cols());
    add_outer(g, -1.0, matvec(b, x), w);
    add_outer(g, -1.0, matvec(b, w), x);
    add_outer(g, -1.0, p.y, w);
    return g;
  };
  const auto r = gradcheck_with(4, 7, 1e-5, corrupted, [](const DeepPriorProblem& p) { return grad_f_at_a(p); });
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error_grad_f, 1e-2);
  EXPECT_LE(r.max_rel_error_grad_f_at_a, 1e-5);
}

TEST(Gradcheck, RejectsLargeN) { EXPECT_THROW(gradcheck(17, 0, 1e-5), ValidationError); }

// ---- landweber ------------------------------------------------------------------------

TEST(LandweberTable, OneRowPerIterate) {
  ExperimentConfig cfg = small_config();
  const Problem pb = make_problem(cfg);
  const CsvTable t = landweber_table(pb, default_step(pb.a), 30);
  ASSERT_EQ(t.rows.size(), 30u);
  EXPECT_EQ(t.rows.front()[0], 1.0);
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LE(t.rows[k][1], t.rows[k - 1][1] * (1 + 1e-14));
}

// ---- config files ---------------------------------------------------------------------

TEST(ConfigFile, ParsesKeyValueLines) {
  TempDir dir;
  std::ofstream(dir.path() / "c.cfg") << "# comment\nn = 12\n\n--seed=5  # trailing\n";
  EXPECT_EQ(config_file_args(dir.path() / "c.cfg"),
            (std::vector<std::string>{"--n", "12", "--seed", "5"}));
}

TEST(ConfigFile, MalformedLineNamesLocation) {
  TempDir dir;
  std::ofstream(dir.path() / "c.cfg") << "n = 12\nseed\n";
  try {
    config_file_args(dir.path() / "c.cfg");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(ConfigFile, LaterFlagsOverride) {
  TempDir dir;
  const auto cfgfile = (dir.path() / "c.cfg").string();
  std::ofstream(cfgfile) << "n = 12\n";
  EXPECT_EQ(expand_config_args({"gradcheck", "--config", cfgfile, "--n", "4"}),
            (std::vector<std::string>{"gradcheck", "--n", "12", "--n", "4"}));
  EXPECT_THROW(expand_config_args({"gradcheck", "--config"}), ValidationError);
}

// ---- command line -----------------------------------------------------------------------

TEST(Cli, ExitCodes) {
  TempDir dir;
  const std::string d = dir.path().string();
  EXPECT_EQ(run_cli("gradcheck --n 4 --seed 7 --instances 3"), 0);
  EXPECT_EQ(run_cli("gradcheck --n 17"), 1);
  EXPECT_EQ(run_cli("gradcheck --bogus 1"), 1);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("experiment --n 10 --alphas 0 --out " + d + "/e"), 1);
  EXPECT_EQ(run_cli("experiment --n 10 --alphas 1e-3 --delta 0.01 --lr 1e9 --iters 50 --out " + d + "/e"), 2);
  EXPECT_EQ(run_cli("filters --alphas 1e-2 --points 50 --out " + d + "/f.csv"), 0);
  EXPECT_EQ(run_cli("optimality --alpha 1e-2 --nu 1 --points 50 --out " + d + "/o.csv"), 0);
  EXPECT_EQ(run_cli("landweber --n 20 --delta 0.01 --iters 10 --out " + d + "/l.csv"), 0);
  EXPECT_EQ(read_csv(dir.path() / "l.csv").rows.size(), 10u);
}

TEST(Cli, ConfigFileWithOverride) {
  TempDir dir;
  const auto cfgfile = (dir.path() / "c.cfg").string();
  std::ofstream(cfgfile) << "n = 17\ninstances = 2\n";
  EXPECT_EQ(run_cli("gradcheck --config " + cfgfile), 1);
  EXPECT_EQ(run_cli("gradcheck --config " + cfgfile + " --n 4"), 0);
  EXPECT_EQ(run_cli("gradcheck --config " + (dir.path() / "missing.cfg").string()), 1);
}
