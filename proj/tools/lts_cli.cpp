// lts: generate data, fit least trimmed squares, benchmark solver modes.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lts/datagen.hpp"
#include "lts/io.hpp"
#include "lts/solver.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitRankDeficient = 4;

std::uint64_t parse_threshold(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "none") return lts::kNoRelaxation;
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    // accept 1e6 style values
    double x = 0.0;
    const auto [end2, ec2] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec2 != std::errc() || end2 != s.data() + s.size() || !(x >= 0.0) || x >= 1.8e19 || x != std::floor(x))
      throw lts::InvalidSpec("threshold must be a non-negative integer or 'inf'");
    return static_cast<std::uint64_t>(x);
  }
  return v;
}

unsigned thread_cap() {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LTS_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) cap = static_cast<unsigned>(v);
  }
  return cap;
}

struct GenArgs {
  lts::GenSpec spec;
  std::string type = "high-leverage";
  std::string out_dir = ".";
};

int cmd_gen(const GenArgs& a) {
  lts::GenSpec spec = a.spec;
  spec.contamination = lts::parse_contamination(a.type);
  const lts::Generated g = lts::generate(spec);
  if (lts::exceeds_breakdown(spec))
    std::cerr << "warning: " << spec.n_outliers << " outliers exceed what the default coverage can trim\n";
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "data.csv", std::ios::binary);
  lts::write_csv(csv, g.data);
  std::ofstream truth(dir / "truth.json", std::ios::binary);
  truth << lts::truth_to_json(spec, g.truth).dump(2) << '\n';
  if (!csv || !truth) throw std::runtime_error("cannot write output files in " + dir.string());
  return 0;
}

struct FitArgs {
  std::string data_path;
  std::string mode = "sbb";
  std::optional<lts::Index> h;
  std::optional<double> q;
  std::string threshold = "1000000";
  std::optional<lts::Index> socp_depth;
  double tol_relax = 1e-7;
  double tol_pi = 1e-6;
  bool unsafe = false;
  lts::Index max_cstep_iter = lts::kDefaultCStepIterations;
  bool bba_csteps = false;
};

int cmd_fit(const FitArgs& a) {
  std::ifstream in(a.data_path, std::ios::binary);
  if (!in) throw lts::ParseError("cannot open " + a.data_path);
  const lts::Dataset data = lts::read_csv(in);
  lts::SolverConfig cfg;
  cfg.mode = lts::parse_mode(a.mode);
  cfg.h = a.h;
  cfg.q = a.q;
  cfg.socp_leaf_threshold = parse_threshold(a.threshold);
  cfg.socp_depth = a.socp_depth;
  cfg.tol_relax = a.tol_relax;
  cfg.tol_pi = a.tol_pi;
  cfg.unsafe_inconsistent_prune = a.unsafe;
  cfg.max_cstep_iter = a.max_cstep_iter;
  cfg.bba_csteps = a.bba_csteps;
  const lts::SolveReport report = lts::solve(data, cfg);
  std::cout << lts::to_json(lts::make_run_record(data, cfg, report)).dump(2) << '\n';
  return 0;
}

struct BenchArgs {
  std::vector<lts::Index> n_list{12, 14};
  std::vector<lts::Index> d_list{3, 4};
  std::vector<std::string> types{"high-leverage", "heavy-tail"};
  lts::Index reps = 25;
  std::uint64_t seed = 1;
  lts::Index outliers = 3;
  std::string threshold = "0";
  lts::Index brute_max_n = 16;
  bool timing = false;
  std::string out;
};

struct CellResult {
  double nodes_sbb = 0, nodes_bba = 0, socp_calls = 0, socp_prunes = 0, inconsistent = 0;
  double time_sbb = 0, time_bba = 0;
  lts::Index brute_runs = 0, sbb_hits = 0, bba_hits = 0;
};

bool same_objective(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

CellResult run_cell(const std::vector<lts::SuiteEntry>& suite, std::uint64_t threshold, bool brute) {
  CellResult r;
  for (const lts::SuiteEntry& e : suite) {
    lts::SolverConfig cfg;
    cfg.mode = lts::Mode::SBB;
    cfg.socp_leaf_threshold = threshold;
    const lts::SolveReport s = lts::solve(e.data, cfg);
    cfg.mode = lts::Mode::BBA;
    const lts::SolveReport b = lts::solve(e.data, cfg);
    r.nodes_sbb += static_cast<double>(s.stats.nodes_visited);
    r.nodes_bba += static_cast<double>(b.stats.nodes_visited);
    r.socp_calls += static_cast<double>(s.stats.socp_calls);
    r.socp_prunes += static_cast<double>(s.stats.socp_prunes);
    r.inconsistent += static_cast<double>(s.stats.inconsistent_relaxations);
    r.time_sbb += s.elapsed.count();
    r.time_bba += b.elapsed.count();
    if (brute) {
      cfg.mode = lts::Mode::Brute;
      const lts::SolveReport x = lts::solve(e.data, cfg);
      ++r.brute_runs;
      r.sbb_hits += same_objective(s.objective, x.objective);
      r.bba_hits += same_objective(b.objective, x.objective);
    }
  }
  const double k = static_cast<double>(suite.size());
  for (double* v : {&r.nodes_sbb, &r.nodes_bba, &r.socp_calls, &r.socp_prunes, &r.inconsistent, &r.time_sbb, &r.time_bba})
    *v /= k;
  return r;
}

int cmd_bench(const BenchArgs& a) {
  if (a.n_list.empty() || a.d_list.empty() || a.types.empty()) throw lts::InvalidSpec("benchmark grid is empty");
  std::vector<lts::Contamination> types;
  for (const std::string& t : a.types) types.push_back(lts::parse_contamination(t));
  const std::uint64_t threshold = parse_threshold(a.threshold);

  struct Cell {
    lts::Index n, d;
    lts::Contamination type;
    std::vector<lts::SuiteEntry> suite;
  };
  std::vector<Cell> cells;
  std::uint64_t cell_no = 0;
  for (lts::Index n : a.n_list)
    for (lts::Index d : a.d_list)
      for (lts::Contamination t : types) {
        // each cell owns a seed derived from the master seed and its position
        const std::uint64_t cell_seed = lts::mix_seed(a.seed ^ lts::mix_seed(cell_no++));
        cells.push_back({n, d, t, lts::benchmark_suite({n}, {d}, {t}, a.reps, cell_seed, a.outliers)});
      }

  std::vector<CellResult> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        results[i] = run_cell(cells[i].suite, threshold, cells[i].n <= a.brute_max_n);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned workers = std::min<unsigned>(thread_cap(), static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (!errors[i].empty()) throw lts::Error("cell " + std::to_string(i) + ": " + errors[i]);

  std::ostringstream table;
  table << "n,d,type,reps,mean_nodes_sbb,mean_nodes_bba,mean_socp_calls,mean_socp_prunes,mean_inconsistent,"
           "brute_runs,success_sbb,success_bba";
  if (a.timing) table << ",mean_seconds_sbb,mean_seconds_bba";
  table << '\n';
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& r = results[i];
    table << cells[i].n << ',' << cells[i].d << ',' << lts::to_string(cells[i].type) << ',' << a.reps << ','
          << r.nodes_sbb << ',' << r.nodes_bba << ',' << r.socp_calls << ',' << r.socp_prunes << ',' << r.inconsistent
          << ',' << r.brute_runs << ',';
    if (r.brute_runs > 0) {
      table << static_cast<double>(r.sbb_hits) / static_cast<double>(r.brute_runs) << ','
            << static_cast<double>(r.bba_hits) / static_cast<double>(r.brute_runs);
    } else {
      table << "NA,NA";
    }
    if (a.timing) table << ',' << r.time_sbb << ',' << r.time_bba;
    table << '\n';
  }
  if (a.out.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream f(a.out, std::ios::binary);
    f << table.str();
    if (!f) throw std::runtime_error("cannot write " + a.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Least trimmed squares by branch and bound"};
  app.require_subcommand(1);
  // -h would clash with the coverage option --h
  app.set_help_flag("--help", "Print this help message and exit");

  GenArgs gen;
  gen.spec.n = 0;
  CLI::App* g = app.add_subcommand("gen", "Generate a contaminated dataset (data.csv and truth.json)");
  g->add_option("--n", gen.spec.n, "Number of observations")->required();
  g->add_option("--d", gen.spec.d, "Number of explicative variables")->required();
  g->add_option("--type", gen.type, "vertical | good-leverage | high-leverage | heavy-tail")->capture_default_str();
  g->add_option("--outliers", gen.spec.n_outliers, "Number of contaminated rows")->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "Generator seed")->capture_default_str();
  g->add_option("--noise-sd", gen.spec.noise_sd, "Standard deviation of the regression noise")->capture_default_str();
  g->add_option("--shift", gen.spec.shift_magnitude, "Shift for leverage and vertical outliers")->capture_default_str();
  g->add_option("--laplace-scale", gen.spec.laplace_scale, "Scale of heavy-tail perturbations")->capture_default_str();
  g->add_option("--out-dir", gen.out_dir, "Directory for data.csv and truth.json")->capture_default_str();

  FitArgs fit;
  CLI::App* f = app.add_subcommand("fit", "Fit a dataset and print the run record as JSON");
  f->add_option("data", fit.data_path, "CSV file: d feature columns then y")->required();
  f->add_option("--mode", fit.mode, "sbb | bba | brute")->capture_default_str();
  f->add_option("--h", fit.h, "Coverage (default floor(n/2) + floor((d+1)/2))");
  f->add_option("--q", fit.q, "Weight mass for the residual cap (default d/2)");
  f->add_option("--threshold", fit.threshold, "Leaf count above which relaxations are solved, or 'inf'")
      ->capture_default_str();
  f->add_option("--socp-depth", fit.socp_depth, "Deepest level using relaxations (default d)");
  f->add_option("--tol-relax", fit.tol_relax, "Relative gap tolerance of relaxations")->capture_default_str();
  f->add_option("--tol-pi", fit.tol_pi, "Tolerance of the residual cap")->capture_default_str();
  f->add_flag("--unsafe-inconsistent-prune", fit.unsafe, "Also prune on inconsistent relaxations");
  f->add_option("--max-cstep-iter", fit.max_cstep_iter, "C-step iteration cap")->capture_default_str();
  f->add_flag("--bba-csteps", fit.bba_csteps, "Apply C-steps in bba mode too");

  BenchArgs bench;
  CLI::App* b = app.add_subcommand("bench", "Compare sbb and bba (and brute where small) over a grid");
  b->add_option("--n", bench.n_list, "Sample sizes")->delimiter(',')->capture_default_str();
  b->add_option("--d", bench.d_list, "Dimensions")->delimiter(',')->capture_default_str();
  b->add_option("--types", bench.types, "Contamination types")->delimiter(',')->capture_default_str();
  b->add_option("--reps", bench.reps, "Datasets per cell")->capture_default_str();
  b->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
  b->add_option("--outliers", bench.outliers, "Outliers per dataset")->capture_default_str();
  b->add_option("--threshold", bench.threshold, "Leaf threshold for sbb, or 'inf'")->capture_default_str();
  b->add_option("--brute-max-n", bench.brute_max_n, "Largest n also solved by brute force")->capture_default_str();
  b->add_flag("--timing", bench.timing, "Add mean wall-clock columns (not deterministic)");
  b->add_option("--out", bench.out, "Output CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*f) return cmd_fit(fit);
    if (*b) return cmd_bench(bench);
  } catch (const lts::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const lts::InvalidSpec& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const lts::InfeasibleConfig& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const lts::RankDeficient& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRankDeficient;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
