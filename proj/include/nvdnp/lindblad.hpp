#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nvdnp/hamiltonian.hpp"

namespace nvdnp {

inline constexpr int kModelDim = 21;
inline constexpr int kGroundOffset = 0;
inline constexpr int kExcitedOffset = 9;
inline constexpr int kSingletOffset = 18;

constexpr int ground_index(int ms, int mi) { return kGroundOffset + basis_index(ms, mi); }
constexpr int excited_index(int ms, int mi) { return kExcitedOffset + basis_index(ms, mi); }
constexpr int singlet_index(int mi) { return kSingletOffset + projection_index(mi); }

/// Transition rates in MHz (1/us) and relaxation time constants in us.
struct RateSet {
  double gamma_fluor = 66.0;
  double gamma_pump = 5.0;
  double isc_e_pm1 = 50.0;
  double isc_e_0 = 2.5;
  double isc_g_0 = 1.0;
  double isc_g_pm1 = 1.0;

  double t1_e_gs = 1.0e4;  // 10 ms
  double t2_e_gs = 100.0;  // 100 us
  double t1_n_gs = 1.0e7;  // 10 s
  double t2_n_gs = 10.0;   // 10 us
  double t1_e_es = 1.0e3;  // 1 ms
  double t2_e_es = 0.01;   // 10 ns
  double t1_n_es = 1.0e5;  // 100 ms
  double t2_n_es = 1.0e3;  // 1 ms

  // Multiplies the Hamiltonian (MHz) inside the commutator. With 1 the MHz
  // energies act directly as rad/us against the 1/us rates; 2*pi converts
  // them from cycles.
  double coherent_factor = 1.0;

  void validate() const;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 21x21 state: ground |g,mS,mI> (0-8), excited |e,mS,mI> (9-17), singlet |s,mI> (18-20).
struct DensityMatrix {
  Matrix matrix = Matrix::Zero(kModelDim, kModelDim);

  Complex trace() const { return matrix.trace(); }
  double hermiticity_error() const;
  double min_eigenvalue() const;
  double population(int index) const { return matrix(index, index).real(); }
  double ground_ms0_population() const;
  double ground_population() const;

  static DensityMatrix pure(int index);
};

enum class CollapseKind { jump, dephase };

enum class Channel {
  pump,
  fluorescence,
  isc_to_singlet,
  isc_to_ground,
  electron_t1,
  nuclear_t1,
  electron_t2,
  nuclear_t2,
};

const char* to_string(Channel c);

/// jump: L = |to><from|.  dephase: L = |to><to| - |from><from|.
struct CollapseOperator {
  double rate = 0.0;
  CollapseKind kind = CollapseKind::jump;
  Channel channel = Channel::pump;
  int to = 0;
  int from = 0;

  Matrix matrix() const;
};

/// Every relaxation and transfer channel of the 21-state model. All channels
/// conserve mI. Relaxation inside each three-level sublevel set uses a
/// per-pair rate 1/(3T), so populations relax with time constant T1 and
/// coherences decay with time constant T2.
std::vector<CollapseOperator> collapse_operators(const RateSet& rates);

/// Block-diagonal ground / excited / singlet Hamiltonian in MHz.
Matrix full_hamiltonian(const SystemParams& params);

/// Generator M with vec(drho/dt) = M vec(rho) under column-major vectorization:
///   M = -i c (1 (x) H - H^T (x) 1)
///       + sum_k g_k [ conj(L_k) (x) L_k - (1 (x) L_k^dag L_k + (L_k^dag L_k)^T (x) 1) / 2 ]
/// where c is the coherent factor.
Matrix liouvillian(const Matrix& h_full, const std::vector<CollapseOperator>& ops, double coherent_factor = 1.0);

/// Reference assembly of the same generator from dense Kronecker products.
Matrix liouvillian_dense(const Matrix& h_full, const std::vector<CollapseOperator>& ops,
                         double coherent_factor = 1.0);

Vector vectorize(const Matrix& rho);
Matrix unvectorize(const Vector& v, int dim);

/// Stationary state of M. One row of M is replaced by the trace condition and
/// the bordered system is solved by LU. Throws SolverError when the null space
/// is not one-dimensional within tolerance.
DensityMatrix steady_state(const Matrix& m);

/// rho(t) = exp(M t) rho0 with t in us (scaling and squaring).
DensityMatrix propagate(const DensityMatrix& rho0, const Matrix& m, double t);

/// Relative stationarity residual ||M vec(rho)|| / ||M||.
double stationarity_residual(const Matrix& m, const DensityMatrix& rho);

/// Nuclear polarization from the ground mS = 0 populations:
/// (p(+1) - p(-1)) / (p(+1) + p(0) + p(-1)). Throws std::domain_error if the
/// ground mS = 0 block is empty.
double polarization_theory(const DensityMatrix& rho);

struct SteadyStateSolution {
  DensityMatrix rho;
  double p_th = 0.0;
  double residual = 0.0;
  double min_eigenvalue = 0.0;
  double trace_error = 0.0;
};

/// Builds the model for one (params, rates) point and solves it.
SteadyStateSolution solve_steady_state(const SystemParams& params, const RateSet& rates);

}  // namespace nvdnp
