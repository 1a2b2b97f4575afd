#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "nvdnp/lindblad.hpp"
#include "nvdnp/odmr.hpp"

namespace nvdnp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepAxis { b_field, theta, strain, pump_rate };

const char* to_string(SweepAxis axis);

enum class SweepOutput { p_th, odmr_spectrum, lines, eigenvalues };

const char* to_string(SweepOutput output);

/// Either a (start, stop, step) range or an explicit list of values.
struct AxisGrid {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.9;
  std::vector<double> explicit_values;

  std::vector<double> values() const;
};

struct SpectrumSettings {
  Branch branch = Branch::plus;
  double width = 1.0;      // MHz
  double contrast = 0.05;  // dimensionless dip scale
  double step = 0.05;      // MHz
  double margin = 10.0;    // MHz beyond the outermost line
};

struct SweepConfig {
  SweepAxis axis = SweepAxis::b_field;
  AxisGrid grid;
  SystemParams params;
  RateSet rates;
  // Strain sweeps set the excited-state strain to this multiple of the ground value.
  double excited_strain_ratio = 10.0;
  std::set<SweepOutput> outputs{SweepOutput::p_th};
  SpectrumSettings spectrum;
  std::filesystem::path output_path = "sweep_out";
  int parallelism = 1;

  /// Parameters for one grid point.
  SystemParams params_at(double axis_value) const;
  RateSet rates_at(double axis_value) const;
};

/// Parses a JSON sweep configuration. Unset physics parameters keep their
/// defaults; unknown keys and out-of-range values raise ConfigError naming
/// the key. Relative output paths resolve against the config's directory.
SweepConfig parse_config(const std::filesystem::path& path);
SweepConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".");

/// Reads a flat JSON object of SystemParams keys on top of the defaults.
SystemParams parse_params_file(const std::filesystem::path& path);

/// Fully resolved configuration as canonical JSON text.
std::string resolved_config_json(const SweepConfig& config);

/// 64-bit FNV-1a of the resolved configuration, as 16 hex digits.
std::string config_fingerprint(const SweepConfig& config);

/// Applies the NVDNP_WORKERS environment override, if set.
void apply_environment(SweepConfig& config);

}  // namespace nvdnp
