#include "nvdnp/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nvdnp {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

struct TripletTerms {
  double zfs;
  double a_par;
  double a_perp;
  double strain;
};

TripletTerms terms_for(Manifold manifold, const SystemParams& p) {
  if (manifold == Manifold::ground) return {p.d_ground, p.a_par_ground, p.a_perp_ground, p.strain_ground};
  return {p.d_excited, p.a_par_excited, p.a_perp_excited, p.strain_excited};
}

}  // namespace

void SystemParams::validate() const {
  const std::pair<const char*, double> all[] = {
      {"d_ground", d_ground},           {"d_excited", d_excited},
      {"gamma_e", gamma_e},             {"gamma_n", gamma_n},
      {"q_quadrupole", q_quadrupole},   {"a_par_ground", a_par_ground},
      {"a_perp_ground", a_perp_ground}, {"a_par_excited", a_par_excited},
      {"a_perp_excited", a_perp_excited}, {"strain_ground", strain_ground},
      {"strain_excited", strain_excited}, {"b_magnitude", b_magnitude},
      {"theta", theta}};
  for (const auto& [name, value] : all) require(std::isfinite(value), name, "must be finite");
  require(b_magnitude >= 0.0, "b_magnitude", "must be >= 0 G");
  require(theta >= 0.0 && theta < 90.0, "theta", "must lie in [0, 90) degrees");
}

const char* to_string(Manifold m) { return m == Manifold::ground ? "ground" : "excited"; }

CompositeOperator build_triplet_hamiltonian(Manifold manifold, const SystemParams& params) {
  params.validate();
  const auto& s = spin_one();
  const TripletTerms t = terms_for(manifold, params);
  const double bx = params.b_magnitude * std::sin(params.theta * kDegree);
  const double bz = params.b_magnitude * std::cos(params.theta * kDegree);

  const CompositeOperator sx = embed_electron(s.sx);
  const CompositeOperator sy = embed_electron(s.sy);
  const CompositeOperator sz = embed_electron(s.sz);
  const CompositeOperator ix = embed_nuclear(s.sx);
  const CompositeOperator iy = embed_nuclear(s.sy);
  const CompositeOperator iz = embed_nuclear(s.sz);

  CompositeOperator h = t.zfs * sz * sz;
  h += params.gamma_e * (bx * sx + bz * sz);
  h += params.q_quadrupole * iz * iz;
  h += t.a_par * sz * iz + t.a_perp * (sx * ix + sy * iy);
  h -= params.gamma_n * (bx * ix + bz * iz);
  h += t.strain * (sx * sz + sz * sx);
  return h;
}

CompositeOperator build_ground_hamiltonian(const SystemParams& params) {
  return build_triplet_hamiltonian(Manifold::ground, params);
}

CompositeOperator build_excited_hamiltonian(const SystemParams& params) {
  return build_triplet_hamiltonian(Manifold::excited, params);
}

Eigen::Matrix3cd build_singlet_hamiltonian(const SystemParams& params) {
  params.validate();
  const auto& s = spin_one();
  const double bx = params.b_magnitude * std::sin(params.theta * kDegree);
  const double bz = params.b_magnitude * std::cos(params.theta * kDegree);
  Eigen::Matrix3cd h = params.q_quadrupole * s.sz * s.sz;
  h -= params.gamma_n * (bx * s.sx + bz * s.sz);
  return h;
}

EigenSystem eigensystem(const CompositeOperator& h) {
  const double asym = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-9)) {
    throw std::invalid_argument("eigensystem: Hamiltonian is not Hermitian (deviation " +
                                std::to_string(asym) + " MHz)");
  }
  const CompositeOperator sym = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CompositeOperator> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensystem: diagonalization failed");

  EigenSystem out;
  out.energies = solver.eigenvalues();
  out.vectors = solver.eigenvectors();

  // Inside an exactly degenerate cluster the solver's basis is arbitrary; fix
  // it by diagonalizing a label operator that separates every |mS, mI>.
  const auto& s = spin_one();
  const CompositeOperator tag = 4.0 * embed_electron(s.sz) + embed_nuclear(s.sz);
  const double scale = std::max(1.0, out.energies.cwiseAbs().maxCoeff());
  for (int first = 0; first < kProductDim;) {
    int last = first + 1;
    while (last < kProductDim && out.energies(last) - out.energies(first) <= 1e-10 * scale) ++last;
    const int size = last - first;
    if (size > 1) {
      const Matrix block = out.vectors.middleCols(first, size);
      const Matrix projected = block.adjoint() * tag * block;
      Eigen::SelfAdjointEigenSolver<Matrix> sub(0.5 * (projected + projected.adjoint()));
      const Matrix rotated = block * sub.eigenvectors().rowwise().reverse();
      out.vectors.middleCols(first, size) = rotated;
      out.energies.segment(first, size).setConstant(out.energies.segment(first, size).mean());
    }
    first = last;
  }

  for (int k = 0; k < kProductDim; ++k) {
    const auto weights = out.vectors.col(k).cwiseAbs2().eval();
    const double best = weights.maxCoeff();
    int pick = 0;
    while (weights(pick) < best - 1e-12) ++pick;
    out.labels[static_cast<std::size_t>(k)] = {basis_ms(pick), basis_mi(pick), weights(pick)};
  }
  return out;
}

std::pair<double, std::pair<int, int>> anticrossing_gap(const CompositeOperator& h) {
  const EigenSystem es = eigensystem(h);
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, int> best_pair{-1, -1};
  for (int mi_a : kProjections) {
    const int a = basis_index(0, mi_a);
    for (int mi_b : kProjections) {
      const int b = basis_index(-1, mi_b);
      if (std::abs(h(a, b)) <= 1e-9) continue;
      // Two eigenstates with the largest weight on span{a, b}.
      int first = -1, second = -1;
      double w_first = -1.0, w_second = -1.0;
      for (int k = 0; k < kProductDim; ++k) {
        const double w = std::norm(es.vectors(a, k)) + std::norm(es.vectors(b, k));
        if (w > w_first) {
          second = first, w_second = w_first;
          first = k, w_first = w;
        } else if (w > w_second) {
          second = k, w_second = w;
        }
      }
      const double gap = std::abs(es.energies(first) - es.energies(second));
      if (gap < best) {
        best = gap;
        best_pair = {a, b};
      }
    }
  }
  return {best, best_pair};
}

FieldRange default_anticrossing_range(Manifold manifold) {
  return manifold == Manifold::ground ? FieldRange{900.0, 1150.0} : FieldRange{400.0, 650.0};
}

AnticrossingResult find_anticrossing(Manifold manifold, SystemParams params, FieldRange search) {
  if (!(search.start >= 0.0) || !(search.stop > search.start)) {
    throw std::invalid_argument("find_anticrossing: search range must satisfy 0 <= start < stop");
  }
  auto gap_at = [&](double field) {
    params.b_magnitude = field;
    return anticrossing_gap(build_triplet_hamiltonian(manifold, params));
  };

  constexpr double kScanStep = 0.25;
  const int steps = std::max(2, static_cast<int>(std::ceil((search.stop - search.start) / kScanStep)));
  const double h = (search.stop - search.start) / steps;
  int best_index = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double g = gap_at(search.start + i * h).first;
    if (g < best_gap) {
      best_gap = g;
      best_index = i;
    }
  }
  if (!std::isfinite(best_gap)) {
    throw std::runtime_error("find_anticrossing: no coupled mS=0 / mS=-1 sublevels in range");
  }
  if (best_index == 0 || best_index == steps) {
    throw std::runtime_error("find_anticrossing: no minimum inside [" + std::to_string(search.start) + ", " +
                             std::to_string(search.stop) + "] G");
  }

  // Golden-section refinement on the bracketing scan cells.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = search.start + (best_index - 1) * h;
  double hi = search.start + (best_index + 1) * h;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = gap_at(x1).first;
  double f2 = gap_at(x2).first;
  while (hi - lo > 1e-3) {
    if (f1 < f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = gap_at(x1).first;
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = gap_at(x2).first;
    }
  }

  AnticrossingResult result;
  result.field = 0.5 * (lo + hi);
  const auto [gap, pair] = gap_at(result.field);
  result.gap = gap;
  result.upper = {basis_ms(pair.first), basis_mi(pair.first), 1.0};
  result.lower = {basis_ms(pair.second), basis_mi(pair.second), 1.0};
  return result;
}

}  // namespace nvdnp
