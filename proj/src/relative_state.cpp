#include "relstate/relative_state.hpp"

#include <cmath>
#include <sstream>

namespace relstate {

BasisFamily::BasisFamily(std::vector<CVector> vectors, Signature signature, std::string label,
                         const Tolerances& tol)
    : vectors_(std::move(vectors)), signature_(signature), label_(std::move(label)) {
  require(!vectors_.empty(), ErrorKind::InvalidInput, "basis family '" + label_ + "' is empty");
  for (const auto& v : vectors_)
    require(v.allFinite(), ErrorKind::InvalidInput, "basis family '" + label_ + "' has non-finite entries");
  gram_ = linalg::gram(vectors_);
  duals_ = linalg::dual_basis(vectors_, signature_, tol);
  inverse_gram_ = linalg::inverse(gram_);
}

BasisFamily BasisFamily::with_signature(Signature s) const {
  BasisFamily out = *this;
  if (s != signature_) {
    out.signature_ = s;
    for (auto& d : out.duals_) d = -d;
  }
  return out;
}

EntangledState::EntangledState(CVector coefficients, BasisFamily x_basis, BasisFamily t_basis)
    : c_(std::move(coefficients)), x_(std::move(x_basis)), t_(std::move(t_basis)) {
  require(c_.size() >= 1 && c_.allFinite(), ErrorKind::InvalidInput, "coefficients must be finite and non-empty");
  require(x_.count() == c_.size() && t_.count() == c_.size(), ErrorKind::InvalidInput,
          "calibration needs equal counts in both families and the coefficient list");
  const double norm2 = c_.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "coefficients not normalized: sum |C|^2 = " << norm2;
    fail(ErrorKind::InvalidInput, msg.str());
  }
}

RelativeDistribution conditional_project(const EntangledState& state, const SubsystemState& condition,
                                         Normalization mode) {
  const CVector& c = state.coefficients();
  const CVector& a = condition.amplitudes;
  require(a.size() == c.size(), ErrorKind::InvalidInput, "condition has wrong number of amplitudes");
  require(a.allFinite(), ErrorKind::InvalidInput, "condition amplitudes not finite");

  RelativeDistribution out;
  out.mode = mode;
  out.amplitudes.assign(c.size(), cplx(0.0));
  out.probabilities.assign(c.size(), 0.0);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (a(i) == cplx(0.0)) {
      if (c(i) != cplx(0.0)) {
        std::ostringstream msg;
        msg << "condition amplitude vanishes at occupied index " << i;
        fail(ErrorKind::UndefinedConditional, msg.str());
      }
      out.omitted.push_back(i);
      out.diagnostics.push_back("index " + std::to_string(i) + " omitted: C and a both zero");
      continue;
    }
    out.amplitudes[i] = c(i) / std::conj(a(i));
    out.probabilities[i] = std::norm(out.amplitudes[i]);
  }

  if (mode == Normalization::Renormalized) {
    double total = 0.0;
    for (double p : out.probabilities) total += p;
    require(total > 0.0, ErrorKind::UndefinedConditional, "relative distribution has zero total weight");
    const double scale = 1.0 / std::sqrt(total);
    for (std::size_t i = 0; i < out.amplitudes.size(); ++i) {
      out.amplitudes[i] *= scale;
      out.probabilities[i] /= total;
    }
  }
  return out;
}

CMatrix partial_trace_metric(const EntangledState& state, Subsystem over) {
  const BasisFamily& traced = (over == Subsystem::T) ? state.t_basis() : state.x_basis();
  const CVector& c = state.coefficients();
  const CMatrix& ginv = traced.inverse_gram().matrix();
  // <d_j|d_i> = ginv(j,i) for the positive duals d of the traced family.
  const Eigen::Index n = c.size();
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = c(i) * std::conj(c(j)) * ginv(j, i);
  return m;
}

SubsystemState reference_condition(const EntangledState& state, Subsystem over) {
  const BasisFamily& traced = (over == Subsystem::T) ? state.t_basis() : state.x_basis();
  const CMatrix& ginv = traced.inverse_gram().matrix();
  SubsystemState s;
  s.amplitudes.resize(ginv.rows());
  for (Eigen::Index i = 0; i < ginv.rows(); ++i) s.amplitudes(i) = 1.0 / std::sqrt(ginv(i, i).real());
  return s;
}

CVector condition_ket(const BasisFamily& family, const SubsystemState& condition) {
  require(condition.amplitudes.size() == family.count(), ErrorKind::InvalidInput,
          "condition has wrong number of amplitudes");
  const double s = sign_of(family.signature());
  CVector ket = CVector::Zero(family.ambient_dim());
  for (Eigen::Index i = 0; i < family.count(); ++i) {
    if (condition.amplitudes(i) == cplx(0.0))
      fail(ErrorKind::UndefinedConditional, "condition ket needs nonzero amplitudes");
    ket += (s / condition.amplitudes(i)) * family.duals()[i];
  }
  return ket;
}

double relative_expectation(const EntangledState& state, const HermitianMatrix& observable,
                            const SubsystemState& condition, Normalization mode) {
  require(observable.size() == state.size(), ErrorKind::InvalidInput,
          "observable dimension does not match the entangled dimension");
  const RelativeDistribution dist = conditional_project(state, condition, mode);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) acc += dist.probabilities[i] * observable(i, i).real();
  return acc;
}

EntangledState swap_roles(const EntangledState& state) {
  return EntangledState(state.coefficients(), state.t_basis().with_signature(flipped(state.t_basis().signature())),
                        state.x_basis().with_signature(flipped(state.x_basis().signature())));
}

}  // namespace relstate
