#pragma once

#include <array>
#include <complex>
#include <optional>

#include <Eigen/Dense>

namespace nvdnp {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Operator on the nine-dimensional |mS, mI> product space of one triplet
// manifold coupled to the 14N nucleus.
using CompositeOperator = Eigen::Matrix<Complex, 9, 9>;

inline constexpr int kTripletDim = 3;
inline constexpr int kProductDim = 9;

// Projections in basis order. Both spins use the descending order +1, 0, -1,
// with mS as the outer (major) index.
inline constexpr std::array<int, 3> kProjections{+1, 0, -1};

constexpr int projection_index(int m) { return 1 - m; }
constexpr int basis_index(int ms, int mi) { return 3 * projection_index(ms) + projection_index(mi); }
constexpr int basis_ms(int index) { return kProjections[static_cast<std::size_t>(index / 3)]; }
constexpr int basis_mi(int index) { return kProjections[static_cast<std::size_t>(index % 3)]; }

/// Angular momentum component matrices (hbar = 1) in the descending
/// |s, m> basis, m = s, s-1, ..., -s.
struct SpinOperatorSet {
  double s = 1.0;
  Matrix sx;
  Matrix sy;
  Matrix sz;

  int dim() const { return static_cast<int>(sz.rows()); }
  Matrix identity() const { return Matrix::Identity(dim(), dim()); }
};

/// Builds the spin-s operators. Throws std::invalid_argument unless 2s is a
/// non-negative integer.
SpinOperatorSet spin_matrices(double s);

/// The spin-1 set shared by the electron and the 14N nucleus.
const SpinOperatorSet& spin_one();

Matrix kron(const Matrix& a, const Matrix& b);

/// Embeds operators acting on the electron (S) and nuclear (I) triplets into
/// the product space: kron(op_s, 1), kron(1, op_i) or kron(op_s, op_i)
/// depending on which are present. Omitting both yields the identity.
CompositeOperator embed(const std::optional<Matrix>& op_s, const std::optional<Matrix>& op_i);

inline CompositeOperator embed_electron(const Matrix& op_s) { return embed(op_s, std::nullopt); }
inline CompositeOperator embed_nuclear(const Matrix& op_i) { return embed(std::nullopt, op_i); }

}  // namespace nvdnp
