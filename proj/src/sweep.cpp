#include "nvdnp/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nvdnp/spectrum_io.hpp"

namespace nvdnp {

namespace fs = std::filesystem;

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  const std::size_t n_threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string clean_status(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

const char* axis_column(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::b_field: return "b_gauss";
    case SweepAxis::theta: return "theta_deg";
    case SweepAxis::strain: return "strain_ground_mhz";
    case SweepAxis::pump_rate: return "pump_rate_mhz";
  }
  return "axis";
}

NuclearPopulations ground_ms0_populations(const DensityMatrix& rho) {
  NuclearPopulations n{};
  for (int mi : kProjections)
    n[static_cast<std::size_t>(projection_index(mi))] = std::max(0.0, rho.population(ground_index(0, mi)));
  return n;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << text;
}

}  // namespace

SweepPoint evaluate_point(const SweepConfig& config, double axis_value) {
  SweepPoint point;
  SweepRow& row = point.row;
  row.axis_value = axis_value;
  try {
    const SystemParams params = config.params_at(axis_value);
    const RateSet rates = config.rates_at(axis_value);
    const CompositeOperator h_ground = build_ground_hamiltonian(params);
    point.ground = eigensystem(h_ground);
    point.excited = eigensystem(build_excited_hamiltonian(params));
    row.min_ground_gap = anticrossing_gap(h_ground).first;

    const SteadyStateSolution sol = solve_steady_state(params, rates);
    row.p_th = sol.p_th;
    row.ground_ms0_population = sol.rho.ground_ms0_population();
    row.residual = sol.residual;
    row.min_eigenvalue = sol.min_eigenvalue;
    row.trace_error = sol.trace_error;
    if (sol.min_eigenvalue < -1e-8 || sol.trace_error > 1e-10 || sol.rho.hermiticity_error() > 1e-10) {
      row.status = "invariant_violation";
    }

    const bool want_lines = config.outputs.count(SweepOutput::lines) > 0;
    const bool want_spectrum = config.outputs.count(SweepOutput::odmr_spectrum) > 0;
    if (want_lines || want_spectrum) point.lines = transition_lines(params, config.spectrum.branch);
    if (want_spectrum) {
      const auto grid = line_grid(point.lines, config.spectrum.margin, config.spectrum.step);
      OdmrSpectrum spectrum = synthesize_odmr(point.lines, ground_ms0_populations(sol.rho), config.spectrum.width,
                                              config.spectrum.contrast, grid);
      spectrum.b_field = params.b_magnitude;
      spectrum.theta = params.theta;
      point.spectrum = std::move(spectrum);
    }
  } catch (const std::exception& e) {
    row.p_th = row.ground_ms0_population = row.residual = row.min_eigenvalue = row.trace_error = kNaN;
    row.status = clean_status(std::string("error: ") + e.what());
  }
  return point;
}

std::vector<SweepPoint> compute_sweep(const SweepConfig& config) {
  const auto values = config.grid.values();
  std::vector<SweepPoint> points(values.size());
  parallel_for(values.size(), config.parallelism,
               [&](std::size_t i) { points[i] = evaluate_point(config, values[i]); });
  return points;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis) {
  std::ostringstream out;
  out << axis_column(axis)
      << ",p_th,min_ground_gap_mhz,ground_ms0_population,residual,min_eigenvalue,trace_error,status\n";
  for (const auto& r : rows) {
    out << format_number(r.axis_value) << ',' << format_number(r.p_th) << ',' << format_number(r.min_ground_gap)
        << ',' << format_number(r.ground_ms0_population) << ',' << format_number(r.residual) << ','
        << format_number(r.min_eigenvalue) << ',' << format_number(r.trace_error) << ',' << r.status << '\n';
  }
  return out.str();
}

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
  const auto points = compute_sweep(config);
  const fs::path dir = config.output_path;
  fs::create_directories(dir);

  std::vector<SweepRow> rows;
  rows.reserve(points.size());
  for (const auto& p : points) rows.push_back(p.row);
  write_text(dir / "sweep.csv", sweep_csv(rows, config.axis));
  write_text(dir / "resolved_config.json", resolved_config_json(config) + "\n");

  const auto failed = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.status != "ok"; });
  const nlohmann::json meta = {
      {"fingerprint", config_fingerprint(config)},
      {"axis", to_string(config.axis)},
      {"axis_column", axis_column(config.axis)},
      {"points", rows.size()},
      {"failed_points", failed},
      {"columns",
       {axis_column(config.axis), "p_th", "min_ground_gap_mhz", "ground_ms0_population", "residual",
        "min_eigenvalue", "trace_error", "status"}},
  };
  write_text(dir / "sweep.json", meta.dump(2) + "\n");

  if (config.outputs.count(SweepOutput::lines)) {
    std::ostringstream out;
    out << "point," << axis_column(config.axis)
        << ",frequency_mhz,probability,strength,lower_ms,lower_mi,upper_ms,upper_mi,attributed_mi\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (const auto& l : points[i].lines) {
        out << i << ',' << format_number(points[i].row.axis_value) << ',' << format_number(l.frequency) << ','
            << format_number(l.probability) << ',' << format_number(l.strength) << ',' << l.lower.ms << ','
            << l.lower.mi << ',' << l.upper.ms << ',' << l.upper.mi << ',' << l.attributed_mi << '\n';
      }
    }
    write_text(dir / "lines.csv", out.str());
  }

  if (config.outputs.count(SweepOutput::eigenvalues)) {
    std::ostringstream out;
    out << "point," << axis_column(config.axis) << ",manifold,level,energy_mhz,ms,mi,weight\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].row.status.rfind("error", 0) == 0) continue;
      for (const auto& [name, es] : {std::pair{"ground", &points[i].ground}, std::pair{"excited", &points[i].excited}}) {
        for (int k = 0; k < kProductDim; ++k) {
          const auto& lab = es->labels[static_cast<std::size_t>(k)];
          out << i << ',' << format_number(points[i].row.axis_value) << ',' << name << ',' << k << ','
              << format_number(es->energies(k)) << ',' << lab.ms << ',' << lab.mi << ',' << format_number(lab.weight)
              << '\n';
        }
      }
    }
    write_text(dir / "eigenvalues.csv", out.str());
  }

  if (config.outputs.count(SweepOutput::odmr_spectrum)) {
    const fs::path spectra = dir / "spectra";
    fs::create_directories(spectra);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].spectrum) continue;
      char name[32];
      std::snprintf(name, sizeof(name), "point_%05zu.csv", i);
      SpectrumMetadata extra;
      extra.p_th = points[i].row.p_th;
      write_spectrum(spectra / name, *points[i].spectrum, extra);
    }
  }
  return rows;
}

std::vector<BatchEntry> fit_batch(const fs::path& spectra_dir, const SystemParams& params, const FitOptions& options,
                                  int workers) {
  if (!fs::is_directory(spectra_dir)) throw std::runtime_error(spectra_dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(spectra_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".csv" || ext == ".txt" || ext == ".dat") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<BatchEntry> entries(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    BatchEntry& e = entries[i];
    e.file = files[i];
    try {
      SpectrumMetadata extra;
      const OdmrSpectrum spectrum = read_spectrum(files[i], &extra);
      e.p_th = extra.p_th;
      e.fit = fit_odmr(spectrum, params, options);
    } catch (const std::exception& ex) {
      e.status = clean_status(std::string("error: ") + ex.what());
    }
  });
  return entries;
}

std::string batch_summary_csv(const std::vector<BatchEntry>& entries) {
  std::ostringstream out;
  out << "file,b_gauss,p_exp,theta_deg,width_mhz,residual_rms,p_th,status\n";
  for (const auto& e : entries) {
    out << e.file.filename().string() << ',';
    if (e.fit) {
      out << format_number(e.fit->b_field) << ',' << format_number(e.fit->p_exp) << ','
          << format_number(e.fit->theta_reported) << ',' << format_number(e.fit->width) << ','
          << format_number(e.fit->residual) << ',';
    } else {
      out << "nan,nan,nan,nan,nan,";
    }
    out << (e.p_th ? format_number(*e.p_th) : std::string("nan")) << ',' << e.status << '\n';
  }
  return out.str();
}

}  // namespace nvdnp
