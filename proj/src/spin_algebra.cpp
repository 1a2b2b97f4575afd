#include "nvdnp/spin_algebra.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nvdnp {

SpinOperatorSet spin_matrices(double s) {
  const double twice = 2.0 * s;
  if (!(s >= 0.0) || std::abs(twice - std::round(twice)) > 1e-12) {
    throw std::invalid_argument("spin quantum number must be a non-negative half-integer, got " +
                                std::to_string(s));
  }
  const int dim = static_cast<int>(std::round(twice)) + 1;

  SpinOperatorSet ops;
  ops.s = s;
  ops.sz = Matrix::Zero(dim, dim);
  Matrix raise = Matrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double m = s - k;
    ops.sz(k, k) = m;
    // <m+1| S+ |m> sits one row above the diagonal in descending order.
    if (k > 0) raise(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const Matrix lower = raise.adjoint();
  ops.sx = 0.5 * (raise + lower);
  ops.sy = Complex(0.0, -0.5) * (raise - lower);
  return ops;
}

const SpinOperatorSet& spin_one() {
  static const SpinOperatorSet ops = spin_matrices(1.0);
  return ops;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

namespace {

void require_triplet(const std::optional<Matrix>& op, const char* which) {
  if (op && (op->rows() != kTripletDim || op->cols() != kTripletDim)) {
    throw std::invalid_argument(std::string("embed: ") + which + " operator must be 3x3, got " +
                                std::to_string(op->rows()) + "x" + std::to_string(op->cols()));
  }
}

}  // namespace

CompositeOperator embed(const std::optional<Matrix>& op_s, const std::optional<Matrix>& op_i) {
  require_triplet(op_s, "electron");
  require_triplet(op_i, "nuclear");
  const Matrix id = Matrix::Identity(kTripletDim, kTripletDim);
  return kron(op_s.value_or(id), op_i.value_or(id));
}

}  // namespace nvdnp
