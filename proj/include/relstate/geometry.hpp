#pragma once

#include <optional>
#include <vector>

#include "relstate/chart.hpp"

namespace relstate::geometry {

// Gamma^k_{ij} for each Space axis i, stored as the matrix (k, j).
// The barred block is the entrywise conjugate; mixed blocks vanish for a
// Hermitian metric and are not stored.
struct Connection {
  std::vector<int> axes;
  std::vector<CMatrix> gamma;

  CMatrix barred(std::size_t i) const { return gamma[i].conjugate(); }
};

Connection connection(const MetricField& h, std::size_t node);

// R_{ij} = -d_j tr(h^-1 d_{i*} h) over the Space axes of the chart, indexed
// (i, j) by position in chart.axes_with_role(Space). Needs two nodes of
// margin along every Space direction.
//
// The nested stencils applied to the trace do not commute exactly, so the raw
// result carries an anti-Hermitian part of truncation order. It is returned
// symmetrized with that part in drift(); a drift above drift_tol (relative to
// the largest entry) means the grid does not resolve the metric and throws.
HermitianMatrix ricci(const MetricField& h, std::size_t node, double drift_tol = 1e-2);

struct Extrinsic {
  std::vector<int> axes;              // Time axes of the chart
  std::vector<CMatrix> k_ext;         // (1/2) d_a h, per axis
  std::vector<cplx> k_trace;          // tr(h^-1 K_ext[a])
  std::vector<cplx> k_log;            // (1/2) d_a ln det h from the logdet stencil
  double identity_gap = 0.0;          // max_a |k_trace - k_log|
};

Extrinsic extrinsic(const MetricField& h, std::size_t node);

// Relative metric g = G + (i/2) Omega and inertial force F over the Time axes.
struct RelativeMetric {
  std::vector<int> axes;
  CMatrix g;       // g(a,b) = sum_i <d_a X^i | d_b X_i>
  Eigen::MatrixXd G;
  Eigen::MatrixXd Omega;
  CMatrix F;       // F(a,b) = d_{a*} K_b with K_b = (1/2) d_b ln det gram
  CMatrix B;       // F - F^dagger
  double f_minus_g = 0.0;
};

RelativeMetric relative_metric(const BasisField& x, std::size_t node);

// g rebuilt from its split, for the decomposition-recomposition identity.
CMatrix recompose(const Eigen::MatrixXd& G, const Eigen::MatrixXd& Omega);

struct KahlerDiagnostics {
  double potential_gap = 0.0;   // |F - d d* (1/2) ln det h| with F from the trace route
  double closedness = 0.0;      // max |dB| per unit volume over cubes at the node
  bool closedness_defined = false;  // needs at least three real Time directions
};

KahlerDiagnostics kahler_check(const MetricField& h, std::size_t node);

// Closedness of B = F - F^dagger for an arbitrary field of K_a components, one
// ScalarField per Time axis.
KahlerDiagnostics kahler_check(const std::vector<ScalarField>& k, std::size_t node);

// F(a,b) = d_{a*} K_b at a node from sampled K components.
CMatrix inertial_force(const std::vector<ScalarField>& k, std::size_t node);

struct GeometryReport {
  Connection gamma;
  std::optional<HermitianMatrix> ricci;
  Extrinsic extrinsic;
  std::optional<RelativeMetric> relative;
};

// Everything that can be evaluated at the node: Ricci is filled when the chart
// has Space axes with enough margin, the relative metric when a basis field is
// given.
GeometryReport report(const MetricField& h, std::size_t node, const BasisField* x = nullptr);

}  // namespace relstate::geometry
