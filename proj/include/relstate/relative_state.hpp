#pragma once

#include <string>
#include <vector>

#include "relstate/linalg.hpp"

namespace relstate {

// A non-orthonormal family of N kets in a D-dimensional ambient space.
class BasisFamily {
 public:
  BasisFamily() = default;
  BasisFamily(std::vector<CVector> vectors, Signature signature, std::string label = {},
              const Tolerances& tol = kDefaultTolerances);

  const std::vector<CVector>& vectors() const { return vectors_; }
  Signature signature() const { return signature_; }
  const std::string& label() const { return label_; }
  Eigen::Index count() const { return static_cast<Eigen::Index>(vectors_.size()); }
  Eigen::Index ambient_dim() const { return vectors_.front().size(); }

  const HermitianMatrix& gram() const { return gram_; }
  const HermitianMatrix& inverse_gram() const { return inverse_gram_; }

  // Duals carrying the family's signature: <dual_j|v_i> = sign * delta.
  const std::vector<CVector>& duals() const { return duals_; }

  BasisFamily with_signature(Signature s) const;

 private:
  std::vector<CVector> vectors_;
  Signature signature_ = Signature::Spacelike;
  std::string label_;
  HermitianMatrix gram_;
  HermitianMatrix inverse_gram_;
  std::vector<CVector> duals_;
};

// sum_i C_i |X_i> (x) |T_i>. The coefficients are fixed at construction.
class EntangledState {
 public:
  EntangledState(CVector coefficients, BasisFamily x_basis, BasisFamily t_basis);

  const CVector& coefficients() const { return c_; }
  const BasisFamily& x_basis() const { return x_; }
  const BasisFamily& t_basis() const { return t_; }
  Eigen::Index size() const { return c_.size(); }

 private:
  CVector c_;
  BasisFamily x_;
  BasisFamily t_;
};

// Amplitudes of a subsystem ket expanded in the entangled basis of one family.
struct SubsystemState {
  CVector amplitudes;
};

enum class Normalization { Raw, Renormalized };

struct RelativeDistribution {
  std::vector<cplx> amplitudes;
  std::vector<double> probabilities;
  Normalization mode = Normalization::Raw;
  // Indices where both C_i and a_i vanish. Their entries are zero.
  std::vector<Eigen::Index> omitted;
  std::vector<std::string> diagnostics;
};

enum class Subsystem { X, T };

// Conditions the X subsystem on a T-side ket with amplitudes a_i. The
// amplitude of X_i is C_i / conj(a_i).
RelativeDistribution conditional_project(const EntangledState& state, const SubsystemState& condition,
                                         Normalization mode = Normalization::Raw);

// Trace over one subsystem, contracting with the inverse Gram of the traced
// family. Returned in the index space of the kept family:
//   rho = sum_ij M(i,j) |K_i><K_j|.
CMatrix partial_trace_metric(const EntangledState& state, Subsystem over = Subsystem::T);

// Condition state whose raw relative probabilities coincide with the
// diagonal of partial_trace_metric(state, over).
SubsystemState reference_condition(const EntangledState& state, Subsystem over = Subsystem::T);

// Ambient ket of a condition state: sum_i (1/a_i) times the positive dual of
// T_i, so that <T|T_i> = 1/conj(a_i).
CVector condition_ket(const BasisFamily& family, const SubsystemState& condition);

double relative_expectation(const EntangledState& state, const HermitianMatrix& observable,
                            const SubsystemState& condition,
                            Normalization mode = Normalization::Renormalized);

EntangledState swap_roles(const EntangledState& state);

}  // namespace relstate
