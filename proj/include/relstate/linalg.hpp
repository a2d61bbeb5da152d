#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "relstate/error.hpp"

namespace relstate {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline constexpr cplx I{0.0, 1.0};

struct Tolerances {
  double hermiticity = 1e-10;
  double dual = 1e-10;
  double cond_max = 1e12;
  double pd_floor = 1e-10;
};

inline const Tolerances kDefaultTolerances{};

enum class Signature : int { Spacelike = 1, Timelike = -1 };

inline double sign_of(Signature s) { return static_cast<int>(s) > 0 ? 1.0 : -1.0; }
inline Signature flipped(Signature s) {
  return s == Signature::Spacelike ? Signature::Timelike : Signature::Spacelike;
}

namespace linalg {

bool all_finite(const CMatrix& m);
bool all_finite(const CVector& v);

// Largest entry of |M - M^dagger|.
double hermiticity_drift(const CMatrix& m);

}  // namespace linalg

// A square complex matrix that was Hermitian within tolerance at construction
// and has been symmetrized since. The drift seen before symmetrization is kept.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  // Throws InvalidInput when the input is not square, not finite, or its
  // Hermiticity drift exceeds tol.
  static HermitianMatrix from(const CMatrix& m, double tol = kDefaultTolerances.hermiticity);
  static HermitianMatrix identity(Eigen::Index n);

  const CMatrix& matrix() const { return m_; }
  Eigen::Index size() const { return m_.rows(); }
  double drift() const { return drift_; }

  cplx operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  RVector eigenvalues() const;
  double min_eigenvalue() const;

 private:
  CMatrix m_;
  double drift_ = 0.0;
};

namespace linalg {

// result(i,j) = <b_i|b_j>, first slot conjugated.
HermitianMatrix gram(std::span<const CVector> basis);

// Ratio of extreme eigenvalue magnitudes. Infinity for a singular matrix.
double condition_number(const HermitianMatrix& m);

// Duals pair with the basis as <dual_j|b_i> = sign * delta_ij. Throws
// DegenerateBasis when the Gram matrix is ill-conditioned beyond cond_max.
std::vector<CVector> dual_basis(std::span<const CVector> basis, Signature signature,
                                const Tolerances& tol = kDefaultTolerances);

// ln det M with imaginary part in (-pi, pi]. Throws DegenerateMetric if M is
// singular to working precision.
cplx logdet(const HermitianMatrix& m);

HermitianMatrix inverse(const HermitianMatrix& m);

struct EigenPairs {
  RVector values;
  CMatrix vectors;  // columns
};

EigenPairs eigh(const HermitianMatrix& m);

// exp(-i H t) through the eigendecomposition of H.
CMatrix unitary_propagator(const HermitianMatrix& h, double t);

// Symmetrize, reporting drift. Does not throw.
CMatrix hermitize(const CMatrix& m, double* drift = nullptr);

}  // namespace linalg
}  // namespace relstate
