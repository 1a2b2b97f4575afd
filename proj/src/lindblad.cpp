#include "nvdnp/lindblad.hpp"

#include <cmath>
#include <utility>

#include <unsupported/Eigen/MatrixFunctions>

namespace nvdnp {

namespace {

constexpr double kPairFactor = 3.0;

struct Entry {
  int row;
  int col;
  Complex value;
};

std::vector<Entry> nonzeros(const Matrix& a) {
  std::vector<Entry> out;
  for (int j = 0; j < a.cols(); ++j)
    for (int i = 0; i < a.rows(); ++i)
      if (a(i, j) != Complex(0.0)) out.push_back({i, j, a(i, j)});
  return out;
}

std::vector<Entry> operator_entries(const CollapseOperator& op) {
  if (op.kind == CollapseKind::jump) return {{op.to, op.from, 1.0}};
  return {{op.to, op.to, 1.0}, {op.from, op.from, -1.0}};
}

void check_rate(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + ": must be a positive finite number");
  }
}

}  // namespace

void RateSet::validate() const {
  const std::pair<const char*, double> all[] = {
      {"gamma_fluor", gamma_fluor}, {"gamma_pump", gamma_pump}, {"isc_e_pm1", isc_e_pm1},
      {"isc_e_0", isc_e_0},         {"isc_g_0", isc_g_0},       {"isc_g_pm1", isc_g_pm1},
      {"t1_e_gs", t1_e_gs},         {"t2_e_gs", t2_e_gs},       {"t1_n_gs", t1_n_gs},
      {"t2_n_gs", t2_n_gs},         {"t1_e_es", t1_e_es},       {"t2_e_es", t2_e_es},
      {"t1_n_es", t1_n_es},         {"t2_n_es", t2_n_es},       {"coherent_factor", coherent_factor}};
  for (const auto& [name, value] : all) check_rate(value, name);
}

double DensityMatrix::hermiticity_error() const { return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff(); }

double DensityMatrix::min_eigenvalue() const {
  const Matrix sym = 0.5 * (matrix + matrix.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double DensityMatrix::ground_ms0_population() const {
  double sum = 0.0;
  for (int mi : kProjections) sum += population(ground_index(0, mi));
  return sum;
}

double DensityMatrix::ground_population() const {
  double sum = 0.0;
  for (int k = kGroundOffset; k < kGroundOffset + kProductDim; ++k) sum += population(k);
  return sum;
}

DensityMatrix DensityMatrix::pure(int index) {
  DensityMatrix rho;
  rho.matrix(index, index) = 1.0;
  return rho;
}

const char* to_string(Channel c) {
  switch (c) {
    case Channel::pump: return "pump";
    case Channel::fluorescence: return "fluorescence";
    case Channel::isc_to_singlet: return "isc_to_singlet";
    case Channel::isc_to_ground: return "isc_to_ground";
    case Channel::electron_t1: return "electron_t1";
    case Channel::nuclear_t1: return "nuclear_t1";
    case Channel::electron_t2: return "electron_t2";
    case Channel::nuclear_t2: return "nuclear_t2";
  }
  return "unknown";
}

Matrix CollapseOperator::matrix() const {
  Matrix l = Matrix::Zero(kModelDim, kModelDim);
  for (const auto& e : operator_entries(*this)) l(e.row, e.col) = e.value;
  return l;
}

std::vector<CollapseOperator> collapse_operators(const RateSet& rates) {
  rates.validate();
  std::vector<CollapseOperator> ops;
  auto jump = [&](Channel c, int to, int from, double rate) {
    ops.push_back({rate, CollapseKind::jump, c, to, from});
  };
  auto dephase = [&](Channel c, int a, int b, double rate) {
    ops.push_back({rate, CollapseKind::dephase, c, a, b});
  };

  for (int ms : kProjections) {
    for (int mi : kProjections) {
      const int g = ground_index(ms, mi);
      const int e = excited_index(ms, mi);
      const int s = singlet_index(mi);
      jump(Channel::pump, e, g, rates.gamma_pump);
      jump(Channel::fluorescence, g, e, rates.gamma_fluor);
      jump(Channel::isc_to_singlet, s, e, ms == 0 ? rates.isc_e_0 : rates.isc_e_pm1);
      jump(Channel::isc_to_ground, g, s, ms == 0 ? rates.isc_g_0 : rates.isc_g_pm1);
    }
  }

  struct Triplet {
    int (*index)(int, int);
    double t1_e, t2_e, t1_n, t2_n;
  };
  const Triplet triplets[] = {
      {ground_index, rates.t1_e_gs, rates.t2_e_gs, rates.t1_n_gs, rates.t2_n_gs},
      {excited_index, rates.t1_e_es, rates.t2_e_es, rates.t1_n_es, rates.t2_n_es},
  };
  for (const auto& t : triplets) {
    for (int a : kProjections) {
      for (int b : kProjections) {
        if (a == b) continue;
        for (int m : kProjections) {
          jump(Channel::electron_t1, t.index(a, m), t.index(b, m), 1.0 / (kPairFactor * t.t1_e));
          jump(Channel::nuclear_t1, t.index(m, a), t.index(m, b), 1.0 / (kPairFactor * t.t1_n));
        }
      }
    }
    for (int a : kProjections) {
      for (int b : kProjections) {
        if (a <= b) continue;
        for (int m : kProjections) {
          dephase(Channel::electron_t2, t.index(a, m), t.index(b, m), 1.0 / (kPairFactor * t.t2_e));
          dephase(Channel::nuclear_t2, t.index(m, a), t.index(m, b), 1.0 / (kPairFactor * t.t2_n));
        }
      }
    }
  }
  // Nuclear relaxation in the singlet shelf follows the ground-state constants.
  for (int a : kProjections) {
    for (int b : kProjections) {
      if (a != b) jump(Channel::nuclear_t1, singlet_index(a), singlet_index(b), 1.0 / (kPairFactor * rates.t1_n_gs));
      if (a > b) dephase(Channel::nuclear_t2, singlet_index(a), singlet_index(b), 1.0 / (kPairFactor * rates.t2_n_gs));
    }
  }
  return ops;
}

Matrix full_hamiltonian(const SystemParams& params) {
  Matrix h = Matrix::Zero(kModelDim, kModelDim);
  h.block(kGroundOffset, kGroundOffset, kProductDim, kProductDim) = build_ground_hamiltonian(params);
  h.block(kExcitedOffset, kExcitedOffset, kProductDim, kProductDim) = build_excited_hamiltonian(params);
  h.block(kSingletOffset, kSingletOffset, 3, 3) = build_singlet_hamiltonian(params);
  return h;
}

namespace {

void check_generator_inputs(const Matrix& h, const std::vector<CollapseOperator>& ops) {
  if (h.rows() != h.cols()) throw std::invalid_argument("liouvillian: Hamiltonian must be square");
  for (const auto& op : ops) {
    if (op.to < 0 || op.from < 0 || op.to >= h.rows() || op.from >= h.rows()) {
      throw std::invalid_argument("liouvillian: collapse operator index outside the Hamiltonian dimension");
    }
  }
}

}  // namespace

Matrix liouvillian(const Matrix& h, const std::vector<CollapseOperator>& ops, double coherent_factor) {
  check_generator_inputs(h, ops);
  const Eigen::Index n = h.rows();
  const auto vec = [n](Eigen::Index i, Eigen::Index j) { return i + n * j; };
  Matrix m = Matrix::Zero(n * n, n * n);

  const Complex minus_i(0.0, -coherent_factor);
  for (const auto& e : nonzeros(h)) {
    for (Eigen::Index k = 0; k < n; ++k) {
      m(vec(e.row, k), vec(e.col, k)) += minus_i * e.value;  // H rho
      m(vec(k, e.col), vec(k, e.row)) -= minus_i * e.value;  // rho H
    }
  }

  for (const auto& op : ops) {
    const auto entries = operator_entries(op);
    for (const auto& p : entries)
      for (const auto& q : entries)
        m(vec(p.row, q.row), vec(p.col, q.col)) += op.rate * p.value * std::conj(q.value);

    Matrix k = Matrix::Zero(n, n);
    for (const auto& p : entries)
      for (const auto& q : entries)
        if (p.row == q.row) k(p.col, q.col) += std::conj(p.value) * q.value;
    const double half = 0.5 * op.rate;
    for (const auto& e : nonzeros(k)) {
      for (Eigen::Index j = 0; j < n; ++j) {
        m(vec(e.row, j), vec(e.col, j)) -= half * e.value;  // K rho
        m(vec(j, e.col), vec(j, e.row)) -= half * e.value;  // rho K
      }
    }
  }
  return m;
}

Matrix liouvillian_dense(const Matrix& h, const std::vector<CollapseOperator>& ops, double coherent_factor) {
  check_generator_inputs(h, ops);
  const Eigen::Index n = h.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix m = Complex(0.0, -coherent_factor) * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& op : ops) {
    const Matrix l = op.matrix().topLeftCorner(n, n);
    const Matrix k = l.adjoint() * l;
    m += op.rate * (kron(l.conjugate(), l) - 0.5 * (kron(id, k) + kron(k.transpose(), id)));
  }
  return m;
}

Vector vectorize(const Matrix& rho) { return rho.reshaped(); }

Matrix unvectorize(const Vector& v, int dim) { return v.reshaped(dim, dim); }

DensityMatrix steady_state(const Matrix& m) {
  const Eigen::Index n2 = m.rows();
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n2))));
  if (m.cols() != n2 || n * n != n2) throw std::invalid_argument("steady_state: generator must be n^2 x n^2");

  // The row of rho(0,0) is redundant under trace preservation.
  Matrix a = m;
  a.row(0).setZero();
  for (Eigen::Index i = 0; i < n; ++i) a(0, i + n * i) = 1.0;
  Vector b = Vector::Zero(n2);
  b(0) = 1.0;

  const Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-15)) {
    throw SolverError("steady_state: stationary state is not unique (reciprocal condition " +
                      std::to_string(rcond) + ")");
  }
  Vector x = lu.solve(b);
  x += lu.solve(b - a * x);  // one step of iterative refinement

  DensityMatrix rho;
  rho.matrix = unvectorize(x, static_cast<int>(n));
  rho.matrix = 0.5 * (rho.matrix + rho.matrix.adjoint()).eval();
  rho.matrix /= rho.matrix.trace();
  if (!rho.matrix.allFinite()) throw SolverError("steady_state: non-finite solution");

  const double residual = stationarity_residual(m, rho);
  if (!(residual <= 1e-8)) {
    throw SolverError("steady_state: stationarity residual " + std::to_string(residual) +
                      " exceeds tolerance; null space is numerically defective");
  }
  return rho;
}

DensityMatrix propagate(const DensityMatrix& rho0, const Matrix& m, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("propagate: t must be finite and >= 0");
  const Eigen::Index n = rho0.matrix.rows();
  if (m.rows() != n * n || m.cols() != n * n) throw std::invalid_argument("propagate: dimension mismatch");
  if (t == 0.0) return rho0;

  // exp(M t) = exp(M t / 2^k)^(2^k). Each squaring is followed by a rank-one
  // correction restoring tr(exp(M t) x) = tr(x), which the exact propagator
  // satisfies and which long squaring chains otherwise lose to rounding.
  int squarings = 0;
  double tau = t;
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  while (tau * norm > 0.5) {
    tau *= 0.5;
    ++squarings;
  }
  Vector trace_row = Vector::Zero(n * n);
  for (Eigen::Index i = 0; i < n; ++i) trace_row(i + n * i) = 1.0;
  const auto restore_trace = [&](Matrix& p) {
    const Eigen::RowVectorXcd defect = trace_row.transpose() - trace_row.transpose() * p;
    p.noalias() += trace_row * defect / static_cast<double>(n);
  };
  Matrix step = (m * tau).exp();
  restore_trace(step);
  for (int k = 0; k < squarings; ++k) {
    step = (step * step).eval();
    restore_trace(step);
  }
  DensityMatrix out;
  out.matrix = unvectorize(step * vectorize(rho0.matrix), static_cast<int>(n));
  if (!out.matrix.allFinite()) throw SolverError("propagate: propagator overflowed");
  return out;
}

double stationarity_residual(const Matrix& m, const DensityMatrix& rho) {
  return (m * vectorize(rho.matrix)).norm() / m.norm();
}

double polarization_theory(const DensityMatrix& rho) {
  const double up = rho.population(ground_index(0, +1));
  const double mid = rho.population(ground_index(0, 0));
  const double down = rho.population(ground_index(0, -1));
  const double total = up + mid + down;
  if (!(total > 1e-12)) throw std::domain_error("polarization_theory: no population in ground mS=0");
  return (up - down) / total;
}

SteadyStateSolution solve_steady_state(const SystemParams& params, const RateSet& rates) {
  const Matrix m = liouvillian(full_hamiltonian(params), collapse_operators(rates), rates.coherent_factor);
  SteadyStateSolution out;
  out.rho = steady_state(m);
  out.p_th = polarization_theory(out.rho);
  out.residual = stationarity_residual(m, out.rho);
  out.min_eigenvalue = out.rho.min_eigenvalue();
  out.trace_error = std::abs(out.rho.trace() - Complex(1.0));
  return out;
}

}  // namespace nvdnp
