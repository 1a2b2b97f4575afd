#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "nvdnp/odmr.hpp"

namespace nvdnp {

/// Shortest round-trippable text for a double, independent of locale.
std::string format_number(double value);

/// Sidecar path of a spectrum data file: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

/// Extra sidecar fields a spectrum may carry besides B and theta.
struct SpectrumMetadata {
  std::optional<double> p_th;
};

/// Reads a two-column (frequency MHz, normalized fluorescence) file. Comma,
/// tab and space delimiters are accepted, '#' starts a comment and a
/// non-numeric first line is treated as a header. B and the nominal theta come
/// from the JSON sidecar. Throws std::runtime_error with the reason on failure.
OdmrSpectrum read_spectrum(const std::filesystem::path& data_path, SpectrumMetadata* extra = nullptr);

/// Writes the data file and its sidecar.
void write_spectrum(const std::filesystem::path& data_path, const OdmrSpectrum& spectrum,
                    const SpectrumMetadata& extra = {});

std::string fit_result_json(const FitResult& fit);
void write_fit_result(const std::filesystem::path& path, const FitResult& fit);

}  // namespace nvdnp
