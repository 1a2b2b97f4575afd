#include "nvdnp/spectrum_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace nvdnp {

using nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::filesystem::path sidecar_path(const std::filesystem::path& data_path) {
  auto p = data_path;
  p.replace_extension(".json");
  return p;
}

namespace {

bool parse_double(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = first + token.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',' || c == ';' || c == '\t' || c == ' ' || c == '\r') {
      if (!current.empty()) fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) fields.push_back(current);
  return fields;
}

double required_number(const json& j, const char* key, const std::filesystem::path& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw std::runtime_error(where.string() + ": sidecar is missing numeric '" + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace

OdmrSpectrum read_spectrum(const std::filesystem::path& data_path, SpectrumMetadata* extra) {
  std::ifstream in(data_path);
  if (!in) throw std::runtime_error(data_path.string() + ": cannot open");

  OdmrSpectrum spectrum;
  std::string line;
  int line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    double f = 0.0, v = 0.0;
    const bool numeric = fields.size() == 2 && parse_double(fields[0], f) && parse_double(fields[1], v);
    if (!numeric) {
      if (!seen_data && spectrum.frequencies.empty()) {
        seen_data = true;  // header line
        continue;
      }
      throw std::runtime_error(data_path.string() + ":" + std::to_string(line_no) +
                               ": expected two numeric columns");
    }
    seen_data = true;
    spectrum.frequencies.push_back(f);
    spectrum.values.push_back(v);
  }
  if (spectrum.frequencies.empty()) throw std::runtime_error(data_path.string() + ": no data rows");

  const auto side = sidecar_path(data_path);
  std::ifstream side_in(side);
  if (!side_in) throw std::runtime_error(data_path.string() + ": missing metadata sidecar " + side.string());
  json meta;
  try {
    meta = json::parse(side_in);
  } catch (const json::exception& e) {
    throw std::runtime_error(side.string() + ": " + e.what());
  }
  spectrum.b_field = required_number(meta, "b_gauss", side);
  spectrum.theta = meta.contains("theta_deg") ? required_number(meta, "theta_deg", side) : 0.0;
  if (extra && meta.contains("p_th") && meta.at("p_th").is_number()) extra->p_th = meta.at("p_th").get<double>();

  try {
    spectrum.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(data_path.string() + ": " + e.what());
  }
  return spectrum;
}

void write_spectrum(const std::filesystem::path& data_path, const OdmrSpectrum& spectrum,
                    const SpectrumMetadata& extra) {
  spectrum.validate();
  std::ofstream out(data_path);
  if (!out) throw std::runtime_error(data_path.string() + ": cannot write");
  out << "frequency_mhz,fluorescence\n";
  for (std::size_t k = 0; k < spectrum.frequencies.size(); ++k)
    out << format_number(spectrum.frequencies[k]) << ',' << format_number(spectrum.values[k]) << '\n';

  json meta = {
      {"b_gauss", spectrum.b_field},
      {"theta_deg", spectrum.theta},
      {"grid",
       {{"start_mhz", spectrum.frequencies.front()},
        {"stop_mhz", spectrum.frequencies.back()},
        {"points", spectrum.frequencies.size()}}},
  };
  if (extra.p_th) meta["p_th"] = *extra.p_th;
  std::ofstream side(sidecar_path(data_path));
  if (!side) throw std::runtime_error(sidecar_path(data_path).string() + ": cannot write");
  side << meta.dump(2) << '\n';
}

std::string fit_result_json(const FitResult& fit) {
  const json j = {
      {"b_gauss", fit.b_field},
      {"populations", {{"m_i_plus1", fit.populations[0]}, {"m_i_0", fit.populations[1]}, {"m_i_minus1", fit.populations[2]}}},
      {"width_mhz", fit.width},
      {"theta_deg", fit.theta_reported},
      {"theta_fit_raw_deg", fit.theta_fit},
      {"baseline", fit.baseline},
      {"contrast", fit.contrast},
      {"p_exp", fit.p_exp},
      {"residual_rms", fit.residual},
      {"iterations", fit.iterations},
  };
  return j.dump(2);
}

void write_fit_result(const std::filesystem::path& path, const FitResult& fit) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << fit_result_json(fit) << '\n';
}

}  // namespace nvdnp
