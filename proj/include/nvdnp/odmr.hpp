#pragma once

#include <array>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nvdnp/hamiltonian.hpp"

namespace nvdnp {

/// Microwave branch: mS = 0 -> +1 or mS = 0 -> -1.
enum class Branch { plus, minus };

const char* to_string(Branch b);
Branch parse_branch(const std::string& text);

struct TransitionLine {
  double frequency = 0.0;    // MHz
  double probability = 0.0;  // strength relative to the strongest line of the branch
  double strength = 0.0;     // |<f| Sx |i>|^2
  StateLabel lower;          // dominant character of the initial state
  StateLabel upper;          // dominant character of the final state
  int attributed_mi = 0;     // mI whose population scales this line
};

/// Populations N(mI) ordered (+1, 0, -1).
using NuclearPopulations = std::array<double, 3>;

/// Hyperfine-resolved MW lines of the ground-state Hamiltonian. Final states are
/// the eigenstates dominated by the branch's target mS; every other eigenstate
/// is a candidate initial state. Probabilities come from the Sx matrix element
/// and lines weaker than `threshold` times the strongest are dropped.
std::vector<TransitionLine> transition_lines(const SystemParams& params, Branch branch, double threshold = 1e-4);

struct OdmrSpectrum {
  std::vector<double> frequencies;  // MHz, strictly increasing
  std::vector<double> values;       // normalized fluorescence
  double b_field = 0.0;             // G
  double theta = 0.0;               // nominal angle, degrees

  /// Throws std::invalid_argument when the grid is not strictly increasing or
  /// the sizes disagree.
  void validate() const;
};

/// Unit-peak Lorentzian with full width at half maximum `width`.
double lorentzian(double nu, double center, double width);

/// baseline - contrast * sum_i p_i N(mI_i) L(nu; nu_i, width).
OdmrSpectrum synthesize_odmr(const std::vector<TransitionLine>& lines, const NuclearPopulations& populations,
                             double width, double contrast, const std::vector<double>& grid,
                             double baseline = 1.0);

/// Uniform grid spanning the lines with `margin` MHz on both sides.
std::vector<double> line_grid(const std::vector<TransitionLine>& lines, double margin, double step);

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitOptions {
  Branch branch = Branch::plus;
  // The angle is first located by a grid scan over theta_guess +/- theta_window
  // (clipped at 0; the spectrum depends on |theta| only), solving the linear
  // amplitudes at every grid point. The best local minima are then refined.
  double theta_guess = 0.0;        // degrees
  double theta_window = 1.0;       // degrees
  double theta_scan_step = 0.0025; // degrees
  std::vector<double> width_candidates{0.3, 0.6, 1.2, 2.4};  // MHz
  int refine_candidates = 4;
  int max_iterations = 300;
  double line_threshold = 1e-4;
  // Frequency windows (MHz) excluded from the residual, e.g. 13C satellites.
  std::vector<std::pair<double, double>> excluded_windows;
};

inline constexpr double kThetaGranularity = 0.02;  // degrees

struct FitResult {
  NuclearPopulations populations{};  // normalized to unit sum
  double width = 0.0;                // MHz, shared FWHM
  double theta_fit = 0.0;            // degrees, converged value
  double theta_reported = 0.0;       // theta_fit on the 0.02 degree grid
  double baseline = 0.0;
  double contrast = 0.0;  // sum of the per-mI dip amplitudes
  double p_exp = 0.0;
  double residual = 0.0;  // RMS
  int iterations = 0;
  double b_field = 0.0;
};

/// Damped least squares over (N(+1), N(0), N(-1), width, theta, baseline) with
/// lines recomputed from the Hamiltonian at every theta iterate. The overall
/// dip amplitude is carried by the populations and reported as `contrast`.
/// The field is taken from the spectrum metadata.
FitResult fit_odmr(const OdmrSpectrum& spectrum, SystemParams params, const FitOptions& options = {});

/// sum_mI mI N(mI) / (I sum N(mI)) with I = 1.
double polarization_experimental(const NuclearPopulations& populations);
inline double polarization_experimental(const FitResult& fit) { return polarization_experimental(fit.populations); }

/// Groups visible lines (amplitude >= `visibility` of the strongest) into
/// clusters separated by more than `gap` MHz. Returns [low, high] per cluster.
std::vector<std::pair<double, double>> line_clusters(const std::vector<TransitionLine>& lines,
                                                     const NuclearPopulations& populations, double gap,
                                                     double visibility = 0.2);

}  // namespace nvdnp
