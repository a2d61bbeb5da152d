#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "relstate/linalg.hpp"

namespace relstate {

enum class AxisRole { Space, Time };

// One complex coordinate sampled on a Re x Im rectangle. Counts include both
// end points, so step = (max - min) / (count - 1). A periodic axis identifies
// max with min instead: step = (max - min) / count.
struct ComplexAxis {
  std::string label;
  AxisRole role = AxisRole::Space;
  double re_min = -1.0, re_max = 1.0;
  int re_count = 5;
  double im_min = -1.0, im_max = 1.0;
  int im_count = 5;
  bool periodic = false;  // wraps both real directions (used by Laplacians)
};

// Product grid over 2k real directions. Real direction 2a is Re t^a and 2a+1
// is Im t^a. Direction 0 varies fastest in the flat node index.
class CoordinateChart {
 public:
  CoordinateChart() = default;
  explicit CoordinateChart(std::vector<ComplexAxis> axes);

  std::size_t axis_count() const { return axes_.size(); }
  const ComplexAxis& axis(std::size_t a) const { return axes_[a]; }
  const std::vector<ComplexAxis>& axes() const { return axes_; }
  std::vector<int> axes_with_role(AxisRole role) const;

  int real_dims() const { return static_cast<int>(extent_.size()); }
  int extent(int d) const { return extent_[d]; }
  double step(int d) const { return step_[d]; }
  double origin(int d) const { return origin_[d]; }
  std::size_t node_count() const { return node_count_; }

  int coordinate_index(std::size_t node, int d) const {
    return static_cast<int>((node / stride_[d]) % static_cast<std::size_t>(extent_[d]));
  }
  // Neighbor along d. The caller is responsible for staying in range unless
  // the axis is periodic, in which case the index wraps.
  std::size_t shift(std::size_t node, int d, int offset) const;
  bool periodic(int d) const { return axes_[d / 2].periodic; }

  std::size_t node_at(std::span<const int> index) const;
  double real_coordinate(std::size_t node, int d) const {
    return origin_[d] + step_[d] * coordinate_index(node, d);
  }
  cplx coordinate(std::size_t node, std::size_t axis) const {
    return {real_coordinate(node, 2 * static_cast<int>(axis)), real_coordinate(node, 2 * static_cast<int>(axis) + 1)};
  }
  std::vector<cplx> coordinates(std::size_t node) const;

  // Distance (in nodes) to the nearest boundary along d; huge for periodic axes.
  int margin(std::size_t node, int d) const;

  // Area element of one complex axis, dRe * dIm.
  double cell_area(std::size_t axis) const { return step_[2 * axis] * step_[2 * axis + 1]; }

  bool same_grid(const CoordinateChart& other) const;

 private:
  std::vector<ComplexAxis> axes_;
  std::vector<int> extent_;
  std::vector<double> step_;
  std::vector<double> origin_;
  std::vector<std::size_t> stride_;
  std::size_t node_count_ = 0;
};

// First derivative along real direction d at a node, second order. Central
// in the interior, one-sided three-point at a non-periodic boundary.
template <class Value, class Fn>
Value real_derivative(const CoordinateChart& chart, std::size_t node, int d, Fn&& at) {
  const double h = chart.step(d);
  const int i = chart.coordinate_index(node, d);
  const int n = chart.extent(d);
  if (chart.periodic(d) || (i > 0 && i < n - 1)) {
    return Value((at(chart.shift(node, d, 1)) - at(chart.shift(node, d, -1))) / (2.0 * h));
  }
  if (i == 0) {
    return Value((-3.0 * at(node) + 4.0 * at(chart.shift(node, d, 1)) - at(chart.shift(node, d, 2))) / (2.0 * h));
  }
  return Value((3.0 * at(node) - 4.0 * at(chart.shift(node, d, -1)) + at(chart.shift(node, d, -2))) / (2.0 * h));
}

enum class Wirtinger { Holomorphic, Antiholomorphic };

// d/dz = (d/dRe - i d/dIm)/2, d/dz* = (d/dRe + i d/dIm)/2 on complex axis a.
template <class Value, class Fn>
Value wirtinger_at(const CoordinateChart& chart, std::size_t node, std::size_t a, Wirtinger kind, Fn&& at) {
  const Value dre = real_derivative<Value>(chart, node, 2 * static_cast<int>(a), at);
  const Value dim = real_derivative<Value>(chart, node, 2 * static_cast<int>(a) + 1, at);
  const cplx s = (kind == Wirtinger::Holomorphic) ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
  return Value(0.5 * (dre + s * dim));
}

struct ScalarField {
  CoordinateChart chart;
  std::vector<cplx> values;

  static ScalarField sample(const CoordinateChart& chart, const std::function<cplx(std::span<const cplx>)>& f);
  cplx operator[](std::size_t node) const { return values[node]; }
};

ScalarField wirtinger(const ScalarField& field, std::size_t axis, Wirtinger kind);

enum class MetricKind { H, S, Q };

struct MetricField {
  CoordinateChart chart;
  std::vector<HermitianMatrix> values;
  MetricKind which = MetricKind::H;

  // Samples f at every node. Each value must be Hermitian, and positive
  // definite above pd_floor.
  static MetricField sample(const CoordinateChart& chart, const std::function<CMatrix(std::span<const cplx>)>& f,
                            MetricKind which = MetricKind::H, const Tolerances& tol = kDefaultTolerances);

  Eigen::Index dim() const { return values.front().size(); }
};

// N kets at every node of a chart.
struct BasisField {
  CoordinateChart chart;
  std::vector<std::vector<CVector>> kets;

  static BasisField sample(const CoordinateChart& chart,
                           const std::function<std::vector<CVector>(std::span<const cplx>)>& f);
};

}  // namespace relstate
