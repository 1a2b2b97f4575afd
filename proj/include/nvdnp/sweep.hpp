#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nvdnp/config.hpp"

namespace nvdnp {

struct SweepRow {
  double axis_value = 0.0;
  double p_th = 0.0;
  double min_ground_gap = 0.0;        // MHz, coupled mS=0 / mS=-1 sublevels
  double ground_ms0_population = 0.0;
  double residual = 0.0;              // ||M rho|| / ||M||
  double min_eigenvalue = 0.0;        // positivity margin
  double trace_error = 0.0;
  std::string status = "ok";
};

struct SweepPoint {
  SweepRow row;
  std::vector<TransitionLine> lines;
  EigenSystem ground;
  EigenSystem excited;
  std::optional<OdmrSpectrum> spectrum;
};

/// Runs `body(i)` for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

/// Computes one grid point. Solver failures land in row.status.
SweepPoint evaluate_point(const SweepConfig& config, double axis_value);

/// Evaluates every grid point, in axis order, without writing anything.
std::vector<SweepPoint> compute_sweep(const SweepConfig& config);

/// Runs the sweep and writes sweep.csv, sweep.json, resolved_config.json and
/// any requested per-point artifacts into config.output_path.
std::vector<SweepRow> run_sweep(const SweepConfig& config);

std::string sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis);

struct BatchEntry {
  std::filesystem::path file;
  std::optional<FitResult> fit;
  std::optional<double> p_th;  // carried over from the spectrum sidecar when present
  std::string status = "ok";
};

/// Fits every spectrum file (*.csv, *.txt, *.dat with a JSON sidecar) in a
/// directory, in file-name order. Files that fail to parse or fit are kept as
/// entries with an error status.
std::vector<BatchEntry> fit_batch(const std::filesystem::path& spectra_dir, const SystemParams& params,
                                  const FitOptions& options = {}, int workers = 1);

std::string batch_summary_csv(const std::vector<BatchEntry>& entries);

}  // namespace nvdnp
