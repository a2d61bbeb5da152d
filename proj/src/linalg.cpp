#include "relstate/linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace relstate {
namespace linalg {

bool all_finite(const CMatrix& m) { return m.allFinite(); }
bool all_finite(const CVector& v) { return v.allFinite(); }

double hermiticity_drift(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

CMatrix hermitize(const CMatrix& m, double* drift) {
  if (drift) *drift = hermiticity_drift(m);
  return 0.5 * (m + m.adjoint());
}

}  // namespace linalg

HermitianMatrix HermitianMatrix::from(const CMatrix& m, double tol) {
  require(m.rows() == m.cols() && m.rows() > 0, ErrorKind::InvalidInput,
          "Hermitian matrix must be square and non-empty");
  require(m.allFinite(), ErrorKind::InvalidInput, "matrix has non-finite entries");
  HermitianMatrix out;
  // Absolute tolerance for O(1) matrices, relative for large ones (grid
  // Hamiltonians carry 1/dx^2 scales).
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  out.m_ = linalg::hermitize(m, &out.drift_);
  if (out.drift_ > tol * scale) {
    std::ostringstream msg;
    msg << "Hermiticity drift " << out.drift_ << " exceeds tolerance " << tol * scale;
    fail(ErrorKind::InvalidInput, msg.str());
  }
  return out;
}

HermitianMatrix HermitianMatrix::identity(Eigen::Index n) {
  return from(CMatrix::Identity(n, n));
}

RVector HermitianMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double HermitianMatrix::min_eigenvalue() const { return eigenvalues().minCoeff(); }

namespace linalg {

HermitianMatrix gram(std::span<const CVector> basis) {
  require(!basis.empty(), ErrorKind::InvalidInput, "empty basis");
  const Eigen::Index d = basis.front().size();
  require(d >= static_cast<Eigen::Index>(basis.size()), ErrorKind::InvalidInput,
          "ambient dimension smaller than basis count");
  CMatrix b(d, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    require(basis[i].size() == d, ErrorKind::InvalidInput, "basis vectors differ in dimension");
    b.col(static_cast<Eigen::Index>(i)) = basis[i];
  }
  return HermitianMatrix::from(b.adjoint() * b);
}

double condition_number(const HermitianMatrix& m) {
  const RVector ev = m.eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / lo;
}

std::vector<CVector> dual_basis(std::span<const CVector> basis, Signature signature,
                                const Tolerances& tol) {
  const HermitianMatrix g = gram(basis);
  const double cond = condition_number(g);
  if (!(cond < tol.cond_max)) {
    std::ostringstream msg;
    msg << "Gram condition number " << cond << " exceeds " << tol.cond_max;
    fail(ErrorKind::DegenerateBasis, msg.str());
  }
  const CMatrix ginv = g.matrix().inverse();
  const double s = sign_of(signature);
  const auto n = static_cast<Eigen::Index>(basis.size());

  // dual_j = s * sum_k conj(ginv(j,k)) b_k, so <dual_j|b_i> = s * (ginv g)(j,i).
  std::vector<CVector> duals(basis.size(), CVector::Zero(basis.front().size()));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      duals[j] += s * std::conj(ginv(j, k)) * basis[k];

  double worst = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const cplx expect = (i == j) ? cplx(s) : cplx(0.0);
      worst = std::max(worst, std::abs(duals[j].dot(basis[i]) - expect));
    }
  if (worst > tol.dual * std::max(1.0, cond * 1e-6)) {
    std::ostringstream msg;
    msg << "dual pairing error " << worst << " above tolerance";
    fail(ErrorKind::DegenerateBasis, msg.str());
  }
  return duals;
}

cplx logdet(const HermitianMatrix& m) {
  Eigen::LLT<CMatrix> llt(m.matrix());
  if (llt.info() == Eigen::Success) {
    double acc = 0.0;
    const CMatrix& l = llt.matrixLLT();
    bool ok = true;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      const double d = l(i, i).real();
      if (!(d > 0.0)) { ok = false; break; }
      acc += 2.0 * std::log(d);
    }
    if (ok && std::isfinite(acc)) return {acc, 0.0};
  }
  // Indefinite: det is real, its sign fixes the branch.
  const RVector ev = m.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double acc = 0.0;
  int negatives = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) <= 64 * std::numeric_limits<double>::epsilon() * scale * ev.size())
      fail(ErrorKind::DegenerateMetric, "logdet of a singular matrix");
    acc += std::log(std::abs(ev(i)));
    if (ev(i) < 0) ++negatives;
  }
  return {acc, (negatives % 2) ? std::numbers::pi : 0.0};
}

HermitianMatrix inverse(const HermitianMatrix& m) {
  Eigen::FullPivLU<CMatrix> lu(m.matrix());
  if (!lu.isInvertible()) fail(ErrorKind::DegenerateMetric, "matrix is not invertible");
  return HermitianMatrix::from(lu.inverse(), std::numeric_limits<double>::infinity());
}

EigenPairs eigh(const HermitianMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m.matrix());
  if (es.info() != Eigen::Success) fail(ErrorKind::InvalidInput, "eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

CMatrix unitary_propagator(const HermitianMatrix& h, double t) {
  const EigenPairs ep = eigh(h);
  CVector phases(ep.values.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) phases(i) = std::exp(-I * ep.values(i) * t);
  return ep.vectors * phases.asDiagonal() * ep.vectors.adjoint();
}

}  // namespace linalg
}  // namespace relstate
