#pragma once

#include <functional>
#include <span>
#include <vector>

#include "relstate/chart.hpp"

namespace relstate::phase {

// Polyline through complex coordinates, one entry per Time axis at each sample.
struct Path {
  std::vector<std::vector<cplx>> samples;
  bool closed = false;

  // Validates: at least two samples, equal dimension, first == last when closed.
  static Path make(std::vector<std::vector<cplx>> samples, bool closed);
  // Single-axis convenience.
  static Path from_points(const std::vector<cplx>& points, bool closed);
  // Circle of the given radius about centre on one axis, n segments, closed.
  static Path circle(cplx centre, double radius, int segments);
  // Axis-aligned rectangle through grid nodes: from `corner`, n1 nodes along
  // real direction d1 and n2 nodes along d2, traversed counter-clockwise in
  // the (d1, d2) plane. Every grid node on the boundary is a sample.
  static Path rectangle(const CoordinateChart& chart, std::size_t corner, int d1, int n1, int d2, int n2);

  Path reversed() const;
  std::size_t dim() const { return samples.front().size(); }
};

// Concatenation; the last sample of a must equal the first of b.
Path concatenate(const Path& a, const Path& b);

struct PhaseRecord {
  cplx theta{0.0, 0.0};
  double re_part = 0.0;
  double im_part = 0.0;
  std::vector<cplx> increments;
};

// K_a at a point, one component per Time axis.
using KField = std::function<std::vector<cplx>(std::span<const cplx>)>;

// Multilinear interpolation of sampled K components. Points outside the chart
// throw InvalidPath.
KField interpolate(const std::vector<ScalarField>& k);

// Theta = (1/2) int K_a dt^a by the trapezoid rule on each segment.
PhaseRecord accumulate_phase(const KField& k, const Path& path);
PhaseRecord accumulate_phase(const std::vector<ScalarField>& k, const Path& path);

// Overlap route: increments -log <psi_k|psi_{k+1}>, so im_part is the
// Pancharatnam phase -arg prod <psi_k|psi_{k+1}> and re_part collects the
// fidelity loss. With closed = true the overlap of the last state with the
// first is included; pass each point of the loop once.
PhaseRecord accumulate_phase(const std::vector<CVector>& states, bool closed);

// Geometric phase from the connection A = i <psi| d psi>, with the derivative
// by central differences along the closed sequence. Needs a smooth gauge.
double berry_phase_connection(const std::vector<CVector>& states);

struct StokesReport {
  cplx line{0.0, 0.0};   // Theta around the rectangle
  double surface = 0.0;  // (1/4) flux of B over the rectangle
  double gap = 0.0;      // |Re line - surface|
};

// Rectangle loop built by Path::rectangle on the chart of k. The surface term
// pulls (1/4) B dt*^a ^ dt^b back to the loop plane with nodewise Wirtinger
// stencils and trapezoid quadrature. In these conventions Stokes ties the
// B-flux to Re Theta; the gap is what B does not account for, namely the
// flux of the holomorphic curl d_a K_b - d_b K_a, plus truncation error.
StokesReport stokes_check(const std::vector<ScalarField>& k, const Path& loop);

struct AASeries {
  std::vector<double> fs_speed2;        // 2 (1 - |<psi(t)|psi(t+dt)>|) / dt^2
  std::vector<double> energy_variance;  // <H^2> - <H>^2 at psi(t)
  double max_gap = 0.0;
};

// Unitary trajectory psi(t + dt) = exp(-i H dt) psi(t). The proportionality
// constant between the two series is 1 (two-level oracle). A non-Hermitian
// generator throws InvalidInput.
AASeries anandan_aharonov(const CMatrix& generator, const CVector& psi0, double dt, int steps);

}  // namespace relstate::phase
