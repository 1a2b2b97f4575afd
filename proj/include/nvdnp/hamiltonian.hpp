#pragma once

#include <array>
#include <utility>

#include "nvdnp/spin_algebra.hpp"

namespace nvdnp {

/// Physical constants and control parameters of the NV-14N system.
/// Energies in MHz, gyromagnetic ratios in MHz/G, field in G, angle in degrees.
struct SystemParams {
  double d_ground = 2870.0;
  double d_excited = 1420.0;
  double gamma_e = 2.8025;
  double gamma_n = 3.077e-4;
  double q_quadrupole = -4.96;
  double a_par_ground = -2.16;
  double a_perp_ground = -2.70;
  double a_par_excited = -40.0;
  double a_perp_excited = -23.0;
  double strain_ground = 0.0;
  double strain_excited = 0.0;
  double b_magnitude = 0.0;
  double theta = 0.0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

enum class Manifold { ground, excited };

const char* to_string(Manifold m);

/// Ground-state triplet Hamiltonian on the |mS, mI> space: zero-field
/// splitting, electron Zeeman, quadrupole, hyperfine, nuclear Zeeman and the
/// transverse strain term. B = (B sin(theta), 0, B cos(theta)).
CompositeOperator build_ground_hamiltonian(const SystemParams& params);

/// Same form with the excited-state splitting, hyperfine tensor and strain.
CompositeOperator build_excited_hamiltonian(const SystemParams& params);

CompositeOperator build_triplet_hamiltonian(Manifold manifold, const SystemParams& params);

/// Nuclear-only Hamiltonian of the singlet shelf: quadrupole plus nuclear Zeeman.
Eigen::Matrix3cd build_singlet_hamiltonian(const SystemParams& params);

struct StateLabel {
  int ms = 0;
  int mi = 0;
  double weight = 0.0;
};

struct EigenSystem {
  Eigen::Matrix<double, 9, 1> energies;  // ascending, MHz
  CompositeOperator vectors;             // columns
  std::array<StateLabel, 9> labels;
};

/// Diagonalizes a product-space Hamiltonian and labels each eigenvector by its
/// largest |amplitude|^2 basis state (ties go to the lower basis index).
/// Rejects input that deviates from Hermitian by more than 1e-9 MHz.
EigenSystem eigensystem(const CompositeOperator& h);

struct AnticrossingResult {
  double field = 0.0;  // G
  double gap = 0.0;    // MHz
  StateLabel upper;    // mS = 0 partner
  StateLabel lower;    // mS = -1 partner
};

/// Smallest splitting between mS = 0 and mS = -1 sublevels that are directly
/// coupled by the Hamiltonian. For each coupled basis pair the splitting is
/// taken between the two eigenstates carrying the most weight on that pair,
/// which keeps the measure continuous through the avoided crossing.
std::pair<double, std::pair<int, int>> anticrossing_gap(const CompositeOperator& h);

struct FieldRange {
  double start = 0.0;
  double stop = 0.0;
};

FieldRange default_anticrossing_range(Manifold manifold);

/// Locates the field that minimizes anticrossing_gap over the given range:
/// a coarse scan followed by golden-section refinement to 1e-3 G. Throws
/// std::runtime_error when the minimum sits on the range boundary.
AnticrossingResult find_anticrossing(Manifold manifold, SystemParams params, FieldRange search);

}  // namespace nvdnp
