// Benchmark and verification CLI for the support-basis attention kernels.
//
// Subcommands:
//   sweep    threshold sweep over the attention engines, CSV output
//   dist     entry-distribution histogram of a matrix (file or generated)
//   verify   run the invariant suite (fast or full)
//   convert  convert a matrix file between text and binary formats
//
// Exit codes: 0 ok, 1 check/computation failure, 2 usage error, 3 I/O error.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbattn/attention.hpp"
#include "sbattn/checks.hpp"
#include "sbattn/matrix_io.hpp"
#include "sbattn/multi_threshold.hpp"
#include "sbattn/support_basis.hpp"

namespace {

std::string fmt_shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_ms(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", seconds * 1e3);
  return buf;
}

struct SweepConfig {
  std::size_t n = 8192;
  std::size_t d = 64;
  double sigma = 0.1;
  std::uint64_t seed = 42;
  std::vector<double> thresholds = {0.15, 0.22, 0.28, 0.33, 0.38, 0.50};
  double eps0 = 1e-7;
  std::vector<std::string> engines = {"exact", "as23", "support_basis"};
  int repeats = 5;
  std::string out;
  int threads = 1;
  double eps_b = 0.5;
  double eps_sk = 0.5;
  double delta = 0.1;
};

template <typename T>
bool parse_scalar(const std::string& text, T& out) {
  std::stringstream ss(text);
  ss >> out;
  return !ss.fail() && ss.eof();
}

template <typename T>
bool parse_list(const std::string& text, std::vector<T>& out) {
  out.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v;
    if (!parse_scalar(item, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

// key=value config file; explicitly passed flags keep precedence.
int merge_sweep_config(const std::string& path, const CLI::App& sub, SweepConfig& cfg) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "sweep: cannot read config file " << path << "\n";
    return 3;
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::cerr << "sweep: config line " << lineno << " is not key=value\n";
      return 2;
    }
    std::string key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    std::size_t v0 = value.find_first_not_of(" \t");
    value = v0 == std::string::npos ? "" : value.substr(v0);
    auto flag_given = [&](const char* name) { return sub.count(name) > 0; };
    bool ok = true;
    if (key == "n" && !flag_given("--n")) ok = parse_scalar(value, cfg.n);
    else if (key == "d" && !flag_given("--d")) ok = parse_scalar(value, cfg.d);
    else if (key == "sigma" && !flag_given("--sigma")) ok = parse_scalar(value, cfg.sigma);
    else if (key == "seed" && !flag_given("--seed")) ok = parse_scalar(value, cfg.seed);
    else if (key == "thresholds" && !flag_given("--thresholds"))
      ok = parse_list(value, cfg.thresholds);
    else if (key == "eps0" && !flag_given("--eps0")) ok = parse_scalar(value, cfg.eps0);
    else if (key == "engines" && !flag_given("--engines")) ok = parse_list(value, cfg.engines);
    else if (key == "repeats" && !flag_given("--repeats")) ok = parse_scalar(value, cfg.repeats);
    else if (key == "out" && !flag_given("--out")) cfg.out = value;
    else if (key == "threads" && !flag_given("--threads")) ok = parse_scalar(value, cfg.threads);
    else if (key == "eps-b" && !flag_given("--eps-b")) ok = parse_scalar(value, cfg.eps_b);
    else if (key == "eps-sk" && !flag_given("--eps-sk")) ok = parse_scalar(value, cfg.eps_sk);
    else if (key == "delta" && !flag_given("--delta")) ok = parse_scalar(value, cfg.delta);
    else if (key == "n" || key == "d" || key == "sigma" || key == "seed" ||
             key == "thresholds" || key == "eps0" || key == "engines" || key == "repeats" ||
             key == "out" || key == "threads" || key == "eps-b" || key == "eps-sk" ||
             key == "delta") {
      continue;  // flag on the command line wins
    } else {
      std::cerr << "sweep: unknown config key '" << key << "' at line " << lineno << "\n";
      return 2;
    }
    if (!ok) {
      std::cerr << "sweep: bad value for '" << key << "' at line " << lineno << "\n";
      return 2;
    }
  }
  return 0;
}

int cmd_sweep(const SweepConfig& cfg) {
  using namespace sbattn;
  if (cfg.thresholds.empty()) {
    std::cerr << "sweep: at least one threshold required\n";
    return 2;
  }
  for (std::size_t i = 1; i < cfg.thresholds.size(); ++i)
    if (cfg.thresholds[i] <= cfg.thresholds[i - 1]) {
      std::cerr << "sweep: thresholds must be strictly increasing\n";
      return 2;
    }
  if (cfg.repeats < 1) {
    std::cerr << "sweep: repeats must be >= 1\n";
    return 2;
  }
  for (const auto& e : cfg.engines)
    if (e != "exact" && e != "as23" && e != "support_basis" && e != "multi_threshold") {
      std::cerr << "sweep: unknown engine '" << e << "'\n";
      return 2;
    }

  AttentionInputs in(sample_subgaussian(cfg.n, cfg.d, cfg.sigma, derive_seed(cfg.seed, 40)),
                     sample_subgaussian(cfg.n, cfg.d, cfg.sigma, derive_seed(cfg.seed, 41)),
                     sample_subgaussian(cfg.n, cfg.d, cfg.sigma, derive_seed(cfg.seed, 42)));
  EngineOptions opt;
  opt.threads = cfg.threads;
  opt.allow_degraded = true;
  opt.seed = cfg.seed;

  auto has_engine = [&](const char* name) {
    return std::find(cfg.engines.begin(), cfg.engines.end(), name) != cfg.engines.end();
  };
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  auto run_multi = [&]() {
    return approx_attention_multi(in, cfg.eps_b, cfg.eps0, cfg.eps_sk, cfg.delta, opt);
  };

  std::cerr << "sweep: n=" << cfg.n << " d=" << cfg.d << " sigma=" << cfg.sigma
            << " seed=" << cfg.seed << " repeats=" << cfg.repeats << "\n";

  // Reference output for error columns (always needed); also the warmup.
  AttentionOutput exact = exact_attention(in, opt);

  struct Row {
    double wall_ms_median = 0.0;
    double linf = 0.0;
    double rel = 0.0;
  };

  // Warmup pass: errors for the threshold-independent engines and for every
  // threshold of the split engine.
  Row exact_row, as23_row, multi_row;
  if (has_engine("as23")) {
    AttentionOutput as = poly_attention_as23(in, cfg.eps0, opt);
    as23_row.linf = max_abs_diff(as.P, exact.P);
    as23_row.rel = rel_fro(as.P, exact.P);
  }
  if (has_engine("multi_threshold")) {
    AttentionOutput mt = run_multi();
    multi_row.linf = max_abs_diff(mt.P, exact.P);
    multi_row.rel = rel_fro(mt.P, exact.P);
  }
  std::vector<Row> support_rows(cfg.thresholds.size());
  if (has_engine("support_basis")) {
    for (std::size_t g = 0; g < cfg.thresholds.size(); ++g) {
      AttentionOutput sb = approx_attention_single(in, cfg.thresholds[g], cfg.eps0, opt);
      support_rows[g].linf = max_abs_diff(sb.P, exact.P);
      support_rows[g].rel = rel_fro(sb.P, exact.P);
    }
  }

  // Timed repeats, interleaved across engines and thresholds so clock drift
  // is shared instead of biasing whichever configuration runs last.
  {
    std::vector<double> t_exact, t_as23, t_multi;
    std::vector<std::vector<double>> t_support(cfg.thresholds.size());
    for (int rep = 0; rep < cfg.repeats; ++rep) {
      if (has_engine("exact")) t_exact.push_back(exact_attention(in, opt).wall_seconds);
      if (has_engine("as23"))
        t_as23.push_back(poly_attention_as23(in, cfg.eps0, opt).wall_seconds);
      if (has_engine("multi_threshold")) t_multi.push_back(run_multi().wall_seconds);
      if (has_engine("support_basis"))
        for (std::size_t g = 0; g < cfg.thresholds.size(); ++g)
          t_support[g].push_back(
              approx_attention_single(in, cfg.thresholds[g], cfg.eps0, opt).wall_seconds);
      std::cerr << "sweep: repeat " << rep + 1 << "/" << cfg.repeats << " done\n";
    }
    if (has_engine("exact")) exact_row.wall_ms_median = median(t_exact);
    if (has_engine("as23")) as23_row.wall_ms_median = median(t_as23);
    if (has_engine("multi_threshold")) multi_row.wall_ms_median = median(t_multi);
    if (has_engine("support_basis"))
      for (std::size_t g = 0; g < cfg.thresholds.size(); ++g)
        support_rows[g].wall_ms_median = median(t_support[g]);
  }

  std::ofstream csv(cfg.out, std::ios::binary);
  if (!csv) {
    std::cerr << "sweep: cannot open output file " << cfg.out << "\n";
    return 3;
  }
  csv << "threshold,engine,wall_ms_median,linf_err,rel_fro_err,mask_size,alpha_hat\n";

  double proxy = cfg.sigma * std::sqrt(2.0);
  for (std::size_t g = 0; g < cfg.thresholds.size(); ++g) {
    double T = cfg.thresholds[g];
    ThresholdSplit qs = split(in.Q, T);
    ThresholdSplit ks = split(in.K, T);
    SparsityReport rep = sparsity_report(qs, ks, build_large_mask(qs, ks, cfg.n), proxy);
    auto emit = [&](const char* engine, const Row& row) {
      csv << fmt_shortest(T) << ',' << engine << ',' << fmt_ms(row.wall_ms_median) << ','
          << fmt_shortest(row.linf) << ',' << fmt_shortest(row.rel) << ',' << rep.mask_size << ','
          << fmt_shortest(rep.alpha_hat) << '\n';
    };
    if (has_engine("exact")) emit("exact", exact_row);
    if (has_engine("as23")) emit("as23", as23_row);
    if (has_engine("support_basis")) emit("support_basis", support_rows[g]);
    if (has_engine("multi_threshold")) emit("multi_threshold", multi_row);
  }
  if (!csv) {
    std::cerr << "sweep: write failed for " << cfg.out << "\n";
    return 3;
  }
  return 0;
}

struct DistConfig {
  std::string in_path;
  std::size_t n = 1024;
  std::size_t d = 64;
  double sigma = 0.1;
  std::uint64_t seed = 42;
  int bins = 64;
  std::string out;
};

int cmd_dist(const DistConfig& cfg) {
  using namespace sbattn;
  if (cfg.bins < 1) {
    std::cerr << "dist: bins must be >= 1\n";
    return 2;
  }
  DenseMatrix m;
  if (!cfg.in_path.empty()) {
    m = load_matrix(cfg.in_path);
  } else {
    m = sample_subgaussian(cfg.n, cfg.d, cfg.sigma, cfg.seed);
  }
  if (m.data.empty()) {
    std::cerr << "dist: empty matrix\n";
    return 2;
  }
  double lo = m.data[0], hi = m.data[0];
  for (double v : m.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  int bins = (hi == lo) ? 1 : cfg.bins;
  double width = (hi == lo) ? 0.0 : (hi - lo) / bins;
  std::vector<std::uint64_t> counts(bins, 0);
  for (double v : m.data) {
    int idx = width == 0.0
                  ? 0
                  : std::min<int>(bins - 1, static_cast<int>((v - lo) / width));
    ++counts[idx];
  }

  double nd = static_cast<double>(m.data.size());
  double mean = 0.0;
  for (double v : m.data) mean += v;
  mean /= nd;
  double var = 0.0;
  for (double v : m.data) var += (v - mean) * (v - mean);
  double sigma_hat = std::sqrt(var / nd);
  double marker = std::sqrt(std::log(static_cast<double>(m.rows)));
  std::uint64_t beyond = 0;
  for (double v : m.data)
    if (std::abs(v) > marker) ++beyond;

  std::ofstream csv(cfg.out, std::ios::binary);
  if (!csv) {
    std::cerr << "dist: cannot open output file " << cfg.out << "\n";
    return 3;
  }
  csv << "bin_lo,bin_hi,count\n";
  for (int i = 0; i < bins; ++i) {
    double blo = (width == 0.0) ? lo : lo + i * width;
    double bhi = (width == 0.0) ? hi : (i + 1 == bins ? hi : lo + (i + 1) * width);
    csv << fmt_shortest(blo) << ',' << fmt_shortest(bhi) << ',' << counts[i] << '\n';
  }
  csv << "# trailer n=" << m.rows << " d=" << m.cols << " sqrt_log_n=" << fmt_shortest(marker)
      << " frac_beyond=" << fmt_shortest(static_cast<double>(beyond) / nd)
      << " sigma_hat=" << fmt_shortest(sigma_hat) << '\n';
  if (!csv) {
    std::cerr << "dist: write failed for " << cfg.out << "\n";
    return 3;
  }
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, int threads) {
  using namespace sbattn;
  std::vector<CheckResult> results =
      suite == "full" ? run_full_checks(seed, threads) : run_fast_checks(seed);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-4s %-36s measured=%-14.6g bound=%-14.6g %s\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.measured, r.bound, r.note.c_str());
    all_pass = all_pass && r.pass;
  }
  std::printf("%s: %zu checks, %s\n", suite.c_str(), results.size(),
              all_pass ? "all passed" : "FAILURES PRESENT");
  return all_pass ? 0 : 1;
}

int cmd_convert(const std::string& input, const std::string& out, std::string format) {
  using namespace sbattn;
  if (format.empty()) {
    if (out.size() >= 6 && out.substr(out.size() - 6) == ".dmatb")
      format = "binary";
    else if (out.size() >= 5 && out.substr(out.size() - 5) == ".dmat")
      format = "text";
    else {
      std::cerr << "convert: cannot infer format from '" << out << "'; pass --format\n";
      return 2;
    }
  }
  DenseMatrix m = load_matrix(input);
  save_matrix(out, m, format == "binary" ? MatrixFormat::binary : MatrixFormat::text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"support-basis attention kernels: benchmark and verification harness"};
  app.require_subcommand(1);

  SweepConfig sweep_cfg;
  auto* sweep = app.add_subcommand("sweep", "threshold sweep over the attention engines");
  sweep->add_option("--n", sweep_cfg.n, "sequence length")->capture_default_str();
  sweep->add_option("--d", sweep_cfg.d, "head dimension")->capture_default_str();
  sweep->add_option("--sigma", sweep_cfg.sigma, "input Gaussian std")->capture_default_str();
  sweep->add_option("--seed", sweep_cfg.seed, "RNG seed")
      ->envname("SBATTN_SEED")
      ->capture_default_str();
  sweep->add_option("--thresholds", sweep_cfg.thresholds, "threshold grid (increasing)")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--eps0", sweep_cfg.eps0, "polynomial accuracy target")->capture_default_str();
  sweep->add_option("--engines", sweep_cfg.engines,
                    "subset of exact,as23,support_basis,multi_threshold")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--repeats", sweep_cfg.repeats, "timing repeats (median)")
      ->capture_default_str();
  sweep->add_option("--out", sweep_cfg.out, "output CSV path (required here or in the config)");
  sweep->add_option("--threads", sweep_cfg.threads, "engine-internal threads")
      ->capture_default_str();
  sweep->add_option("--eps-b", sweep_cfg.eps_b, "bucketing parameter (multi_threshold)")
      ->capture_default_str();
  sweep->add_option("--eps-sk", sweep_cfg.eps_sk, "sketch accuracy (multi_threshold)")
      ->capture_default_str();
  sweep->add_option("--delta", sweep_cfg.delta, "sketch failure probability (multi_threshold)")
      ->capture_default_str();
  std::string sweep_config_path;
  sweep->add_option("--config", sweep_config_path, "key=value config file");

  DistConfig dist_cfg;
  auto* dist = app.add_subcommand("dist", "entry-distribution histogram");
  dist->add_option("--in", dist_cfg.in_path, "input matrix file (DMAT/DMATB1)");
  dist->add_option("--n", dist_cfg.n, "rows (generator)")->capture_default_str();
  dist->add_option("--d", dist_cfg.d, "cols (generator)")->capture_default_str();
  dist->add_option("--sigma", dist_cfg.sigma, "Gaussian std (generator)")->capture_default_str();
  dist->add_option("--seed", dist_cfg.seed, "RNG seed")
      ->envname("SBATTN_SEED")
      ->capture_default_str();
  dist->add_option("--bins", dist_cfg.bins, "histogram bins")->capture_default_str();
  dist->add_option("--out", dist_cfg.out, "output CSV path")->required();

  std::string verify_suite = "fast";
  std::uint64_t verify_seed = 42;
  int verify_threads = 1;
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("suite", verify_suite, "fast or full")
      ->check(CLI::IsMember({"fast", "full"}))
      ->capture_default_str();
  verify->add_option("--seed", verify_seed, "RNG seed")
      ->envname("SBATTN_SEED")
      ->capture_default_str();
  verify->add_option("--threads", verify_threads, "engine-internal threads")
      ->capture_default_str();

  std::string conv_in, conv_out, conv_format;
  auto* convert = app.add_subcommand("convert", "convert a matrix file between formats");
  convert->add_option("input", conv_in, "input matrix file")->required();
  convert->add_option("--out", conv_out, "output path")->required();
  convert->add_option("--format", conv_format, "text or binary")
      ->check(CLI::IsMember({"text", "binary"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (sweep->parsed()) {
      if (!sweep_config_path.empty()) {
        int rc = merge_sweep_config(sweep_config_path, *sweep, sweep_cfg);
        if (rc != 0) return rc;
      }
      if (sweep_cfg.out.empty()) {
        std::cerr << "sweep: --out is required (flag or config file)\n";
        return 2;
      }
      return cmd_sweep(sweep_cfg);
    }
    if (dist->parsed()) return cmd_dist(dist_cfg);
    if (verify->parsed()) return cmd_verify(verify_suite, verify_seed, verify_threads);
    if (convert->parsed()) return cmd_convert(conv_in, conv_out, conv_format);
  } catch (const sbattn::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
