// nvdnp: sweeps, spectrum fits, transition lines and anticrossing search.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nvdnp/config.hpp"
#include "nvdnp/spectrum_io.hpp"
#include "nvdnp/sweep.hpp"

namespace fs = std::filesystem;
using namespace nvdnp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

// Thrown for bad user input that is not a ConfigError.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<int> env_workers() {
  const char* raw = std::getenv("NVDNP_WORKERS");
  if (!raw || !*raw) return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw UsageError("NVDNP_WORKERS: expected an integer in [1, 1024]");
  return static_cast<int>(n);
}

int resolve_workers(int flag, int fallback) {
  if (flag > 0) return flag;
  if (auto env = env_workers()) return *env;
  return fallback;
}

SystemParams load_params(const std::string& file) {
  return file.empty() ? SystemParams{} : parse_params_file(file);
}

Branch branch_arg(const std::string& text) {
  try {
    return parse_branch(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--branch: ") + e.what());
  }
}

void check_params(const SystemParams& p) {
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int cmd_sweep(const std::string& config_path, int workers_flag) {
  SweepConfig config = parse_config(config_path);
  apply_environment(config);
  if (workers_flag > 0) config.parallelism = workers_flag;
  const auto rows = run_sweep(config);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.status != "ok";
  std::cout << "wrote " << rows.size() << " points to " << config.output_path.string() << '\n';
  if (failed) std::cerr << "warning: " << failed << " point(s) recorded a non-ok status\n";
  return kExitOk;
}

int cmd_fit(const std::string& dir, const std::string& params_file, const std::string& out_dir,
            const std::string& branch, int workers_flag) {
  const SystemParams params = load_params(params_file);
  FitOptions options;
  options.branch = branch_arg(branch);
  if (!fs::is_directory(dir)) throw UsageError(dir + ": not a directory");
  const auto entries = fit_batch(dir, params, options, resolve_workers(workers_flag, 1));

  const fs::path out = out_dir.empty() ? fs::path(dir) / "fits" : fs::path(out_dir);
  fs::create_directories(out);
  std::ofstream summary(out / "fit_summary.csv");
  if (!summary) throw UsageError((out / "fit_summary.csv").string() + ": cannot write");
  summary << batch_summary_csv(entries);
  for (const auto& e : entries) {
    if (e.fit) {
      write_fit_result(out / (e.file.stem().string() + ".fit.json"), *e.fit);
    } else {
      std::cerr << "skipped " << e.file.filename().string() << ": " << e.status << '\n';
    }
  }
  if (entries.empty()) std::cerr << "warning: no spectrum files in " << dir << '\n';
  std::cout << "fitted " << entries.size() << " file(s); summary in " << (out / "fit_summary.csv").string() << '\n';
  return kExitOk;
}

int cmd_lines(double b, double theta, const std::string& branch, const std::string& params_file) {
  SystemParams params = load_params(params_file);
  params.b_magnitude = b;
  params.theta = theta;
  check_params(params);
  const auto lines = transition_lines(params, branch_arg(branch));
  std::cout << "frequency_mhz,probability,lower_ms,lower_mi,upper_ms,upper_mi,attributed_mi\n";
  for (const auto& l : lines) {
    std::cout << format_number(l.frequency) << ',' << format_number(l.probability) << ',' << l.lower.ms << ','
              << l.lower.mi << ',' << l.upper.ms << ',' << l.upper.mi << ',' << l.attributed_mi << '\n';
  }
  return kExitOk;
}

int cmd_anticross(const std::string& manifold_text, std::optional<double> from, std::optional<double> to,
                  const std::string& params_file) {
  Manifold manifold;
  if (manifold_text == "ground") {
    manifold = Manifold::ground;
  } else if (manifold_text == "excited") {
    manifold = Manifold::excited;
  } else {
    throw UsageError("--manifold: expected 'ground' or 'excited'");
  }
  SystemParams params = load_params(params_file);
  check_params(params);
  FieldRange range = default_anticrossing_range(manifold);
  if (from) range.start = *from;
  if (to) range.stop = *to;
  if (!(range.start >= 0.0 && range.stop > range.start)) throw UsageError("--from/--to: need 0 <= from < to");
  const auto r = find_anticrossing(manifold, params, range);
  std::cout << "manifold,field_gauss,gap_mhz,upper_ms,upper_mi,lower_ms,lower_mi\n"
            << to_string(manifold) << ',' << format_number(r.field) << ',' << format_number(r.gap) << ','
            << r.upper.ms << ',' << r.upper.mi << ',' << r.lower.ms << ',' << r.lower.mi << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-centre 14N nuclear polarization: Lindblad steady states and ODMR fits"};
  app.require_subcommand(1);

  std::string config_path;
  int workers = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep described by a JSON config");
  sweep->add_option("config", config_path, "Sweep configuration file")->required();
  sweep->add_option("--workers", workers, "Worker threads (overrides config and NVDNP_WORKERS)")
      ->check(CLI::Range(1, 1024));

  std::string fit_dir, params_file, out_dir, branch = "plus";
  auto* fit = app.add_subcommand("fit", "Fit every spectrum in a directory");
  fit->add_option("dir", fit_dir, "Directory of spectrum files with JSON sidecars")->required();
  fit->add_option("--params", params_file, "JSON file of physics parameter overrides");
  fit->add_option("--out", out_dir, "Output directory (default <dir>/fits)");
  fit->add_option("--branch", branch, "MW branch: plus or minus");
  fit->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 1024));

  double b = 0.0, theta = 0.0;
  auto* lines = app.add_subcommand("lines", "List ground-state ODMR transitions");
  lines->add_option("--b", b, "Field magnitude (G)")->required();
  lines->add_option("--theta", theta, "Field angle from the NV axis (deg)")->required();
  lines->add_option("--branch", branch, "MW branch: plus or minus");
  lines->add_option("--params", params_file, "JSON file of physics parameter overrides");

  std::string manifold;
  std::optional<double> from, to;
  auto* anticross = app.add_subcommand("anticross", "Locate the level anticrossing field");
  anticross->add_option("--manifold", manifold, "ground or excited")->required();
  anticross->add_option("--from", from, "Search start (G)");
  anticross->add_option("--to", to, "Search stop (G)");
  anticross->add_option("--params", params_file, "JSON file of physics parameter overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sweep) return cmd_sweep(config_path, workers);
    if (*fit) return cmd_fit(fit_dir, params_file, out_dir, branch, workers);
    if (*lines) return cmd_lines(b, theta, branch, params_file);
    if (*anticross) return cmd_anticross(manifold, from, to, params_file);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
