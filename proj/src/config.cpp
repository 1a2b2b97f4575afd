#include "nvdnp/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace nvdnp {

using nlohmann::json;

namespace {

template <typename T>
using Field = std::pair<const char*, double T::*>;

const std::vector<Field<SystemParams>>& physics_fields() {
  static const std::vector<Field<SystemParams>> fields = {
      {"d_ground", &SystemParams::d_ground},
      {"d_excited", &SystemParams::d_excited},
      {"gamma_e", &SystemParams::gamma_e},
      {"gamma_n", &SystemParams::gamma_n},
      {"q_quadrupole", &SystemParams::q_quadrupole},
      {"a_par_ground", &SystemParams::a_par_ground},
      {"a_perp_ground", &SystemParams::a_perp_ground},
      {"a_par_excited", &SystemParams::a_par_excited},
      {"a_perp_excited", &SystemParams::a_perp_excited},
      {"strain_ground", &SystemParams::strain_ground},
      {"strain_excited", &SystemParams::strain_excited},
      {"b_magnitude", &SystemParams::b_magnitude},
      {"theta", &SystemParams::theta},
  };
  return fields;
}

const std::vector<Field<RateSet>>& rate_fields() {
  static const std::vector<Field<RateSet>> fields = {
      {"gamma_fluor", &RateSet::gamma_fluor},
      {"gamma_pump", &RateSet::gamma_pump},
      {"isc_e_pm1", &RateSet::isc_e_pm1},
      {"isc_e_0", &RateSet::isc_e_0},
      {"isc_g_0", &RateSet::isc_g_0},
      {"isc_g_pm1", &RateSet::isc_g_pm1},
      {"t1_e_gs", &RateSet::t1_e_gs},
      {"t2_e_gs", &RateSet::t2_e_gs},
      {"t1_n_gs", &RateSet::t1_n_gs},
      {"t2_n_gs", &RateSet::t2_n_gs},
      {"t1_e_es", &RateSet::t1_e_es},
      {"t2_e_es", &RateSet::t2_e_es},
      {"t1_n_es", &RateSet::t1_n_es},
      {"t2_n_es", &RateSet::t2_n_es},
      {"coherent_factor", &RateSet::coherent_factor},
  };
  return fields;
}

[[noreturn]] void fail(const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); }

void require_object(const json& j, const std::string& key) {
  if (!j.is_object()) fail(key, "expected an object");
}

double number(const json& j, const std::string& key) {
  if (!j.is_number()) fail(key, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(key, "must be finite");
  return v;
}

template <typename T>
void read_fields(const json& section, const std::string& prefix, const std::vector<Field<T>>& fields, T& target) {
  require_object(section, prefix);
  for (const auto& [key, value] : section.items()) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return key == f.first; });
    if (it == fields.end()) fail(prefix + "." + key, "unknown key");
    target.*(it->second) = number(value, prefix + "." + key);
  }
}

// Re-raise a validation failure ("field: reason") with the section prefix.
template <typename T>
void validate_section(const T& target, const std::string& prefix) {
  try {
    target.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(prefix + "." + e.what());
  }
}

SweepAxis parse_axis(const json& j) {
  if (!j.is_string()) fail("sweep.axis", "expected a string");
  const auto s = j.get<std::string>();
  if (s == "B" || s == "b" || s == "b_field") return SweepAxis::b_field;
  if (s == "theta") return SweepAxis::theta;
  if (s == "strain") return SweepAxis::strain;
  if (s == "pump_rate") return SweepAxis::pump_rate;
  fail("sweep.axis", "expected one of B, theta, strain, pump_rate; got '" + s + "'");
}

SweepOutput parse_output(const json& j) {
  if (!j.is_string()) fail("outputs", "entries must be strings");
  const auto s = j.get<std::string>();
  for (auto o : {SweepOutput::p_th, SweepOutput::odmr_spectrum, SweepOutput::lines, SweepOutput::eigenvalues})
    if (s == to_string(o)) return o;
  fail("outputs", "unknown output '" + s + "'");
}

void check_axis_value(SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::b_field:
      if (v < 0.0) fail("sweep", "B values must be >= 0");
      break;
    case SweepAxis::theta:
      if (v < 0.0 || v >= 90.0) fail("theta", "sweep values must lie in [0, 90) degrees");
      break;
    case SweepAxis::pump_rate:
      if (v <= 0.0) fail("sweep", "pump_rate values must be > 0");
      break;
    case SweepAxis::strain:
      break;
  }
}

json axis_json(const SweepConfig& c) {
  json s = {{"axis", to_string(c.axis)}, {"excited_strain_ratio", c.excited_strain_ratio}};
  if (c.grid.explicit_values.empty()) {
    s["start"] = c.grid.start;
    s["stop"] = c.grid.stop;
    s["step"] = c.grid.step;
  } else {
    s["values"] = c.grid.explicit_values;
  }
  return s;
}

}  // namespace

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::b_field: return "B";
    case SweepAxis::theta: return "theta";
    case SweepAxis::strain: return "strain";
    case SweepAxis::pump_rate: return "pump_rate";
  }
  return "unknown";
}

const char* to_string(SweepOutput output) {
  switch (output) {
    case SweepOutput::p_th: return "p_th";
    case SweepOutput::odmr_spectrum: return "odmr_spectrum";
    case SweepOutput::lines: return "lines";
    case SweepOutput::eigenvalues: return "eigenvalues";
  }
  return "unknown";
}

std::vector<double> AxisGrid::values() const {
  if (!explicit_values.empty()) return explicit_values;
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  out.reserve(static_cast<std::size_t>(std::max(0L, count)));
  for (long k = 0; k < count; ++k) out.push_back(start + static_cast<double>(k) * step);
  return out;
}

SystemParams SweepConfig::params_at(double v) const {
  SystemParams p = params;
  switch (axis) {
    case SweepAxis::b_field: p.b_magnitude = v; break;
    case SweepAxis::theta: p.theta = v; break;
    case SweepAxis::strain:
      p.strain_ground = v;
      p.strain_excited = excited_strain_ratio * v;
      break;
    case SweepAxis::pump_rate: break;
  }
  return p;
}

RateSet SweepConfig::rates_at(double v) const {
  RateSet r = rates;
  if (axis == SweepAxis::pump_rate) r.gamma_pump = v;
  return r;
}

SweepConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require_object(root, "config");

  SweepConfig c;
  bool has_sweep = false;
  for (const auto& [key, value] : root.items()) {
    if (key == "sweep") {
      has_sweep = true;
      require_object(value, "sweep");
      bool has_range = false;
      for (const auto& [k, v] : value.items()) {
        if (k == "axis") {
          c.axis = parse_axis(v);
        } else if (k == "start") {
          c.grid.start = number(v, "sweep.start"), has_range = true;
        } else if (k == "stop") {
          c.grid.stop = number(v, "sweep.stop"), has_range = true;
        } else if (k == "step") {
          c.grid.step = number(v, "sweep.step");
        } else if (k == "values") {
          if (!v.is_array() || v.empty()) fail("sweep.values", "expected a non-empty array");
          for (const auto& x : v) c.grid.explicit_values.push_back(number(x, "sweep.values"));
        } else if (k == "excited_strain_ratio") {
          c.excited_strain_ratio = number(v, "sweep.excited_strain_ratio");
        } else {
          fail("sweep." + k, "unknown key");
        }
      }
      if (has_range && !c.grid.explicit_values.empty()) fail("sweep", "give either start/stop/step or values");
      if (!has_range && c.grid.explicit_values.empty()) fail("sweep", "missing start/stop or values");
    } else if (key == "physics") {
      read_fields(value, "physics", physics_fields(), c.params);
    } else if (key == "rates") {
      read_fields(value, "rates", rate_fields(), c.rates);
    } else if (key == "outputs") {
      if (!value.is_array()) fail("outputs", "expected an array");
      c.outputs.clear();
      for (const auto& o : value) c.outputs.insert(parse_output(o));
      c.outputs.insert(SweepOutput::p_th);
    } else if (key == "spectrum") {
      require_object(value, "spectrum");
      for (const auto& [k, v] : value.items()) {
        if (k == "branch") {
          if (!v.is_string()) fail("spectrum.branch", "expected a string");
          try {
            c.spectrum.branch = parse_branch(v.get<std::string>());
          } catch (const std::invalid_argument& e) {
            fail("spectrum.branch", e.what());
          }
        } else if (k == "width") {
          c.spectrum.width = number(v, "spectrum.width");
        } else if (k == "contrast") {
          c.spectrum.contrast = number(v, "spectrum.contrast");
        } else if (k == "step") {
          c.spectrum.step = number(v, "spectrum.step");
        } else if (k == "margin") {
          c.spectrum.margin = number(v, "spectrum.margin");
        } else {
          fail("spectrum." + k, "unknown key");
        }
      }
    } else if (key == "output_path") {
      if (!value.is_string()) fail("output_path", "expected a string");
      c.output_path = value.get<std::string>();
    } else if (key == "parallelism") {
      if (!value.is_number_integer() || value.get<long>() < 1) fail("parallelism", "expected an integer >= 1");
      c.parallelism = value.get<int>();
    } else {
      fail(key, "unknown key");
    }
  }
  if (!has_sweep) fail("sweep", "section is required");
  std::sort(c.grid.explicit_values.begin(), c.grid.explicit_values.end());

  validate_section(c.params, "physics");
  validate_section(c.rates, "rates");
  if (c.grid.explicit_values.empty()) {
    if (!(c.grid.step > 0.0)) fail("sweep.step", "must be > 0");
    if (!(c.grid.stop >= c.grid.start)) fail("sweep.stop", "must be >= sweep.start");
  }
  for (double v : c.grid.values()) check_axis_value(c.axis, v);
  if (c.axis == SweepAxis::strain) {
    for (double v : c.grid.values()) validate_section(c.params_at(v), "physics");
  }
  if (!(c.spectrum.width > 0.0)) fail("spectrum.width", "must be > 0");
  if (!(c.spectrum.step > 0.0)) fail("spectrum.step", "must be > 0");
  if (!(c.spectrum.margin >= 0.0)) fail("spectrum.margin", "must be >= 0");
  if (!(c.spectrum.contrast >= 0.0)) fail("spectrum.contrast", "must be >= 0");
  if (c.output_path.is_relative()) c.output_path = base_dir / c.output_path;
  return c;
}

SweepConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.parent_path());
}

SystemParams parse_params_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open params file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  SystemParams p;
  read_fields(j, "physics", physics_fields(), p);
  validate_section(p, "physics");
  return p;
}

std::string resolved_config_json(const SweepConfig& c) {
  json physics = json::object(), rates = json::object();
  for (const auto& [name, member] : physics_fields()) physics[name] = c.params.*member;
  for (const auto& [name, member] : rate_fields()) rates[name] = c.rates.*member;
  json outputs = json::array();
  for (auto o : c.outputs) outputs.push_back(to_string(o));
  const json root = {
      {"sweep", axis_json(c)},
      {"physics", physics},
      {"rates", rates},
      {"outputs", outputs},
      {"spectrum",
       {{"branch", to_string(c.spectrum.branch)},
        {"width", c.spectrum.width},
        {"contrast", c.spectrum.contrast},
        {"step", c.spectrum.step},
        {"margin", c.spectrum.margin}}},
  };
  return root.dump(2);
}

std::string config_fingerprint(const SweepConfig& config) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char ch : resolved_config_json(config)) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void apply_environment(SweepConfig& config) {
  const char* env = std::getenv("NVDNP_WORKERS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw ConfigError("NVDNP_WORKERS: expected an integer in [1, 1024]");
  config.parallelism = static_cast<int>(n);
}

}  // namespace nvdnp
