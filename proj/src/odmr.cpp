#include "nvdnp/odmr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nvdnp {

const char* to_string(Branch b) { return b == Branch::plus ? "plus" : "minus"; }

Branch parse_branch(const std::string& text) {
  if (text == "plus" || text == "+1" || text == "0->+1") return Branch::plus;
  if (text == "minus" || text == "-1" || text == "0->-1") return Branch::minus;
  throw std::invalid_argument("branch: expected 'plus' or 'minus', got '" + text + "'");
}

namespace {

// Dominant mI of an eigenvector; ties resolve toward larger |mI|, then +1.
int attribute_mi(const CompositeOperator& vectors, int k) {
  const auto weights = vectors.col(k).cwiseAbs2().eval();
  const double best = weights.maxCoeff();
  int pick_mi = 0;
  bool found = false;
  for (int idx = 0; idx < kProductDim; ++idx) {
    if (weights(idx) < best - 1e-12) continue;
    const int mi = basis_mi(idx);
    if (!found || std::abs(mi) > std::abs(pick_mi) || (std::abs(mi) == std::abs(pick_mi) && mi > pick_mi)) {
      pick_mi = mi;
      found = true;
    }
  }
  return pick_mi;
}

}  // namespace

std::vector<TransitionLine> transition_lines(const SystemParams& params, Branch branch, double threshold) {
  const EigenSystem es = eigensystem(build_ground_hamiltonian(params));
  const int target = branch == Branch::plus ? +1 : -1;
  const CompositeOperator drive = embed_electron(spin_one().sx);

  std::vector<TransitionLine> lines;
  for (int f = 0; f < kProductDim; ++f) {
    if (es.labels[static_cast<std::size_t>(f)].ms != target) continue;
    const auto coupled = (es.vectors.col(f).adjoint() * drive).eval();
    for (int i = 0; i < kProductDim; ++i) {
      if (es.labels[static_cast<std::size_t>(i)].ms == target) continue;
      const double frequency = std::abs(es.energies(f) - es.energies(i));
      if (frequency <= 1e-9) continue;
      TransitionLine line;
      line.frequency = frequency;
      line.strength = std::norm((coupled * es.vectors.col(i))(0, 0));
      line.lower = es.labels[static_cast<std::size_t>(i)];
      line.upper = es.labels[static_cast<std::size_t>(f)];
      line.attributed_mi = attribute_mi(es.vectors, i);
      lines.push_back(line);
    }
  }

  std::sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.frequency < b.frequency; });
  // Coincident lines from one population are a single resonance.
  std::vector<TransitionLine> merged;
  for (const auto& line : lines) {
    if (!merged.empty() && std::abs(merged.back().frequency - line.frequency) <= 1e-9 &&
        merged.back().attributed_mi == line.attributed_mi) {
      merged.back().strength += line.strength;
    } else {
      merged.push_back(line);
    }
  }

  double strongest = 0.0;
  for (const auto& line : merged) strongest = std::max(strongest, line.strength);
  std::vector<TransitionLine> kept;
  for (auto& line : merged) {
    if (strongest <= 0.0 || line.strength < threshold * strongest) continue;
    line.probability = line.strength / strongest;
    kept.push_back(line);
  }
  return kept;
}

void OdmrSpectrum::validate() const {
  if (frequencies.size() != values.size()) throw std::invalid_argument("spectrum: column lengths differ");
  if (frequencies.empty()) throw std::invalid_argument("spectrum: no samples");
  for (std::size_t k = 1; k < frequencies.size(); ++k) {
    if (!(frequencies[k] > frequencies[k - 1])) {
      throw std::invalid_argument("spectrum: frequency grid is not strictly increasing at sample " +
                                  std::to_string(k));
    }
  }
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("spectrum: non-finite value");
}

double lorentzian(double nu, double center, double width) {
  const double hw = 0.5 * width;
  const double d = nu - center;
  return hw * hw / (d * d + hw * hw);
}

namespace {

std::size_t mi_slot(int mi) { return static_cast<std::size_t>(projection_index(mi)); }

}  // namespace

OdmrSpectrum synthesize_odmr(const std::vector<TransitionLine>& lines, const NuclearPopulations& populations,
                             double width, double contrast, const std::vector<double>& grid, double baseline) {
  if (lines.empty()) throw std::invalid_argument("synthesize_odmr: no transition lines");
  if (!(width > 0.0)) throw std::invalid_argument("synthesize_odmr: width must be > 0");
  for (double n : populations)
    if (!(n >= 0.0)) throw std::invalid_argument("synthesize_odmr: populations must be >= 0");

  OdmrSpectrum out;
  out.frequencies = grid;
  out.values.assign(grid.size(), baseline);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double dip = 0.0;
    for (const auto& line : lines)
      dip += line.probability * populations[mi_slot(line.attributed_mi)] * lorentzian(grid[k], line.frequency, width);
    out.values[k] -= contrast * dip;
  }
  out.validate();
  return out;
}

std::vector<double> line_grid(const std::vector<TransitionLine>& lines, double margin, double step) {
  if (lines.empty()) throw std::invalid_argument("line_grid: no transition lines");
  if (!(step > 0.0)) throw std::invalid_argument("line_grid: step must be > 0");
  const double lo = lines.front().frequency - margin;
  const double hi = lines.back().frequency + margin;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step)) + 1;
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = lo + static_cast<double>(k) * step;
  return grid;
}

double polarization_experimental(const NuclearPopulations& populations) {
  double weighted = 0.0, total = 0.0;
  for (int mi : kProjections) {
    const double n = populations[mi_slot(mi)];
    weighted += mi * n;
    total += n;
  }
  if (!(total > 0.0)) throw std::domain_error("polarization_experimental: all populations are zero");
  return weighted / total;  // nuclear spin I = 1
}

std::vector<std::pair<double, double>> line_clusters(const std::vector<TransitionLine>& lines,
                                                     const NuclearPopulations& populations, double gap,
                                                     double visibility) {
  double strongest = 0.0;
  for (const auto& line : lines)
    strongest = std::max(strongest, line.probability * populations[mi_slot(line.attributed_mi)]);
  std::vector<double> visible;
  for (const auto& line : lines)
    if (line.probability * populations[mi_slot(line.attributed_mi)] >= visibility * strongest && strongest > 0.0)
      visible.push_back(line.frequency);
  std::sort(visible.begin(), visible.end());

  std::vector<std::pair<double, double>> clusters;
  for (double f : visible) {
    if (clusters.empty() || f - clusters.back().second > gap) {
      clusters.emplace_back(f, f);
    } else {
      clusters.back().second = f;
    }
  }
  return clusters;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

constexpr int kParams = 6;
enum Slot { kUp = 0, kMid = 1, kDown = 2, kWidth = 3, kTheta = 4, kBaseline = 5 };

constexpr double kMinWidth = 1e-3;
constexpr double kMaxWidth = 1e3;
constexpr double kMaxTheta = 89.0;
constexpr double kThetaStep = 1e-4;

using Params = Eigen::Matrix<double, kParams, 1>;

struct Problem {
  std::vector<double> nu;
  Eigen::VectorXd data;
  SystemParams params;
  Branch branch;
  double threshold;

  std::vector<TransitionLine> lines_at(double theta) const {
    SystemParams p = params;
    p.theta = theta;
    return transition_lines(p, branch, threshold);
  }

  // Columns: per-mI line shapes and their width derivatives.
  void shapes(const std::vector<TransitionLine>& lines, double width, Eigen::MatrixXd& g,
              Eigen::MatrixXd& dg) const {
    const auto n = static_cast<Eigen::Index>(nu.size());
    g.setZero(n, 3);
    dg.setZero(n, 3);
    const double hw = 0.5 * width;
    for (const auto& line : lines) {
      const auto col = static_cast<Eigen::Index>(mi_slot(line.attributed_mi));
      for (Eigen::Index k = 0; k < n; ++k) {
        const double d = nu[static_cast<std::size_t>(k)] - line.frequency;
        const double den = d * d + hw * hw;
        g(k, col) += line.probability * hw * hw / den;
        dg(k, col) += line.probability * hw * d * d / (den * den);
      }
    }
  }

  Eigen::VectorXd model(const Params& x) const {
    Eigen::MatrixXd g, dg;
    shapes(lines_at(x(kTheta)), x(kWidth), g, dg);
    return Eigen::VectorXd::Constant(g.rows(), x(kBaseline)) - g * x.head<3>();
  }

  Eigen::VectorXd residual(const Params& x) const { return model(x) - data; }

  Eigen::MatrixXd jacobian(const Params& x) const {
    Eigen::MatrixXd g, dg;
    shapes(lines_at(x(kTheta)), x(kWidth), g, dg);
    Eigen::MatrixXd j(g.rows(), kParams);
    j.leftCols<3>() = -g;
    j.col(kWidth) = -dg * x.head<3>();
    j.col(kBaseline).setOnes();
    Params hi = x, lo = x;
    if (x(kTheta) >= kThetaStep) {
      hi(kTheta) += kThetaStep;
      lo(kTheta) -= kThetaStep;
      j.col(kTheta) = (model(hi) - model(lo)) / (2.0 * kThetaStep);
    } else {
      hi(kTheta) += kThetaStep;
      j.col(kTheta) = (model(hi) - model(x)) / kThetaStep;
    }
    return j;
  }
};

Params clamp(Params x) {
  for (int k = 0; k < 3; ++k) x(k) = std::max(0.0, x(k));
  x(kWidth) = std::clamp(x(kWidth), kMinWidth, kMaxWidth);
  x(kTheta) = std::clamp(x(kTheta), 0.0, kMaxTheta);
  return x;
}

// Amplitudes and baseline by linear least squares at fixed (width, theta).
Params linear_fit(const Problem& problem, const std::vector<TransitionLine>& lines, double theta, double width,
                  double& cost) {
  Eigen::MatrixXd g, dg;
  problem.shapes(lines, width, g, dg);
  Eigen::MatrixXd design(g.rows(), 4);
  design.leftCols<3>() = -g;
  design.col(3).setOnes();
  const Eigen::Vector4d coef = design.colPivHouseholderQr().solve(problem.data);
  cost = 0.5 * (design * coef - problem.data).squaredNorm();
  Params x;
  x << coef(0), coef(1), coef(2), width, theta, coef(3);
  return clamp(x);
}

struct ScanPoint {
  double cost;
  Params x;
};

// Best (width, amplitudes) per theta grid point, then the lowest local minima in theta.
std::vector<Params> scan_starts(const Problem& problem, const FitOptions& options) {
  const double lo = std::max(0.0, options.theta_guess - options.theta_window);
  const double hi = std::min(kMaxTheta - 1.0, options.theta_guess + options.theta_window);
  const double step = options.theta_scan_step > 0.0 ? options.theta_scan_step : 0.0025;
  const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> widths = options.width_candidates;
  if (widths.empty()) widths.push_back(1.0);

  std::vector<ScanPoint> scan;
  scan.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double theta = lo + step * k;
    const auto lines = problem.lines_at(theta);
    ScanPoint best{std::numeric_limits<double>::infinity(), Params::Zero()};
    for (double w : widths) {
      double cost = 0.0;
      const Params x = linear_fit(problem, lines, theta, w, cost);
      if (cost < best.cost) best = {cost, x};
    }
    scan.push_back(best);
  }

  std::vector<std::size_t> minima;
  for (std::size_t k = 0; k < scan.size(); ++k) {
    const bool left = k == 0 || scan[k].cost <= scan[k - 1].cost;
    const bool right = k + 1 == scan.size() || scan[k].cost <= scan[k + 1].cost;
    if (left && right) minima.push_back(k);
  }
  std::sort(minima.begin(), minima.end(), [&](auto a, auto b) { return scan[a].cost < scan[b].cost; });
  const auto keep = std::min<std::size_t>(minima.size(), static_cast<std::size_t>(std::max(1, options.refine_candidates)));
  std::vector<Params> starts;
  for (std::size_t k = 0; k < keep; ++k) starts.push_back(scan[minima[k]].x);
  return starts;
}

struct LmOutcome {
  Params x;
  double cost = 0.0;
  int iterations = 0;
};

LmOutcome levenberg_marquardt(const Problem& problem, Params x, int max_iterations) {
  Eigen::VectorXd r = problem.residual(x);
  double cost = 0.5 * r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::MatrixXd j = problem.jacobian(x);
    if (j.leftCols<3>().cwiseAbs().maxCoeff() == 0.0) {
      throw FitError("fit_odmr: degenerate Jacobian (no line inside the spectrum window)");
    }
    const Eigen::VectorXd grad = j.transpose() * r;
    const Eigen::MatrixXd a = j.transpose() * j;
    const double floor = 1e-12 * a.diagonal().maxCoeff();

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      for (int k = 0; k < kParams; ++k) damped(k, k) += lambda * std::max(a(k, k), floor) + floor;
      const Params step = damped.ldlt().solve(-grad);
      const Params trial = clamp(x + step);
      const Eigen::VectorXd r_trial = problem.residual(trial);
      const double cost_trial = 0.5 * r_trial.squaredNorm();
      if (std::isfinite(cost_trial) && cost_trial < cost) {
        const double drop = cost - cost_trial;
        const double moved = (trial - x).norm();
        x = trial;
        r = r_trial;
        cost = cost_trial;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (drop <= 1e-14 * cost || moved <= 1e-12 * (1.0 + x.norm())) return {x, cost, it};
      } else {
        lambda *= 4.0;
        if (lambda > 1e14) return {x, cost, it};  // no descent direction left
      }
    }
  }
  throw FitError("fit_odmr: no convergence after " + std::to_string(max_iterations) + " iterations");
}

}  // namespace

FitResult fit_odmr(const OdmrSpectrum& spectrum, SystemParams params, const FitOptions& options) {
  spectrum.validate();
  params.b_magnitude = spectrum.b_field;
  params.validate();

  Problem problem;
  problem.params = params;
  problem.branch = options.branch;
  problem.threshold = options.line_threshold;
  std::vector<double> kept;
  for (std::size_t k = 0; k < spectrum.frequencies.size(); ++k) {
    const double f = spectrum.frequencies[k];
    const bool excluded = std::any_of(options.excluded_windows.begin(), options.excluded_windows.end(),
                                      [f](const auto& w) { return f >= w.first && f <= w.second; });
    if (excluded) continue;
    problem.nu.push_back(f);
    kept.push_back(spectrum.values[k]);
  }
  if (problem.nu.size() <= static_cast<std::size_t>(kParams)) {
    throw FitError("fit_odmr: fewer samples than free parameters");
  }
  problem.data = Eigen::Map<const Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));

  LmOutcome best;
  best.cost = std::numeric_limits<double>::infinity();
  std::string last_error;
  for (const Params& x0 : scan_starts(problem, options)) {
    try {
      LmOutcome out = levenberg_marquardt(problem, x0, options.max_iterations);
      if (out.cost < best.cost) best = out;
    } catch (const FitError& e) {
      last_error = e.what();
    }
  }
  if (!std::isfinite(best.cost)) throw FitError(last_error.empty() ? "fit_odmr: all starts failed" : last_error);

  const Params& x = best.x;
  if (x(kWidth) <= kMinWidth || x(kWidth) >= kMaxWidth) throw FitError("fit_odmr: width ran into its bound");
  if (x(kTheta) >= kMaxTheta) throw FitError("fit_odmr: theta ran into its bound");
  const double contrast = x(kUp) + x(kMid) + x(kDown);
  if (!(contrast > 1e-9 * std::max(1.0, std::abs(x(kBaseline))))) {
    throw FitError("fit_odmr: no resonance amplitude in the spectrum");
  }

  FitResult result;
  result.populations = {x(kUp) / contrast, x(kMid) / contrast, x(kDown) / contrast};
  result.width = x(kWidth);
  result.theta_fit = x(kTheta);
  result.theta_reported = std::round(x(kTheta) / kThetaGranularity) * kThetaGranularity;
  result.baseline = x(kBaseline);
  result.contrast = contrast;
  result.p_exp = polarization_experimental(result.populations);
  result.residual = std::sqrt(2.0 * best.cost / static_cast<double>(problem.nu.size()));
  result.iterations = best.iterations;
  result.b_field = spectrum.b_field;
  return result;
}

}  // namespace nvdnp
