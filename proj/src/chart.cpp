#include "relstate/chart.hpp"

#include <limits>
#include <sstream>

namespace relstate {

CoordinateChart::CoordinateChart(std::vector<ComplexAxis> axes) : axes_(std::move(axes)) {
  require(!axes_.empty(), ErrorKind::InvalidGrid, "chart needs at least one complex axis");
  node_count_ = 1;
  for (const auto& ax : axes_) {
    const struct {
      double lo, hi;
      int n;
    } dirs[2] = {{ax.re_min, ax.re_max, ax.re_count}, {ax.im_min, ax.im_max, ax.im_count}};
    for (const auto& dir : dirs) {
      if (dir.n < 5) {
        std::ostringstream msg;
        msg << "axis '" << ax.label << "' has " << dir.n << " samples; at least 5 are needed";
        fail(ErrorKind::InvalidGrid, msg.str());
      }
      const double step = (dir.hi - dir.lo) / (ax.periodic ? dir.n : dir.n - 1);
      if (!(step > 0.0) || !std::isfinite(step))
        fail(ErrorKind::InvalidGrid, "axis '" + ax.label + "' has non-positive spacing");
      extent_.push_back(dir.n);
      step_.push_back(step);
      origin_.push_back(dir.lo);
      stride_.push_back(node_count_);
      node_count_ *= static_cast<std::size_t>(dir.n);
    }
  }
}

std::vector<int> CoordinateChart::axes_with_role(AxisRole role) const {
  std::vector<int> out;
  for (std::size_t a = 0; a < axes_.size(); ++a)
    if (axes_[a].role == role) out.push_back(static_cast<int>(a));
  return out;
}

std::size_t CoordinateChart::shift(std::size_t node, int d, int offset) const {
  const int i = coordinate_index(node, d);
  int j = i + offset;
  if (periodic(d)) {
    j %= extent_[d];
    if (j < 0) j += extent_[d];
  } else if (j < 0 || j >= extent_[d]) {
    fail(ErrorKind::InvalidGrid, "stencil leaves the chart");
  }
  return node + static_cast<std::size_t>(j - i) * stride_[d];
}

std::size_t CoordinateChart::node_at(std::span<const int> index) const {
  require(static_cast<int>(index.size()) == real_dims(), ErrorKind::InvalidInput, "node index has wrong rank");
  std::size_t node = 0;
  for (int d = 0; d < real_dims(); ++d) {
    require(index[d] >= 0 && index[d] < extent_[d], ErrorKind::InvalidInput, "node index out of range");
    node += static_cast<std::size_t>(index[d]) * stride_[d];
  }
  return node;
}

std::vector<cplx> CoordinateChart::coordinates(std::size_t node) const {
  std::vector<cplx> out(axes_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) out[a] = coordinate(node, a);
  return out;
}

int CoordinateChart::margin(std::size_t node, int d) const {
  if (periodic(d)) return std::numeric_limits<int>::max() / 2;
  const int i = coordinate_index(node, d);
  return std::min(i, extent_[d] - 1 - i);
}

bool CoordinateChart::same_grid(const CoordinateChart& other) const {
  if (extent_ != other.extent_) return false;
  for (int d = 0; d < real_dims(); ++d) {
    const double tol = 1e-12 * std::max(1.0, std::abs(step_[d]));
    if (std::abs(step_[d] - other.step_[d]) > tol || std::abs(origin_[d] - other.origin_[d]) > tol) return false;
    if (periodic(d) != other.periodic(d)) return false;
  }
  return true;
}

ScalarField ScalarField::sample(const CoordinateChart& chart, const std::function<cplx(std::span<const cplx>)>& f) {
  ScalarField out{chart, std::vector<cplx>(chart.node_count())};
  for (std::size_t n = 0; n < chart.node_count(); ++n) out.values[n] = f(chart.coordinates(n));
  return out;
}

ScalarField wirtinger(const ScalarField& field, std::size_t axis, Wirtinger kind) {
  require(axis < field.chart.axis_count(), ErrorKind::InvalidInput, "axis out of range");
  ScalarField out{field.chart, std::vector<cplx>(field.values.size())};
  auto at = [&](std::size_t n) { return field.values[n]; };
  for (std::size_t n = 0; n < field.values.size(); ++n)
    out.values[n] = wirtinger_at<cplx>(field.chart, n, axis, kind, at);
  return out;
}

MetricField MetricField::sample(const CoordinateChart& chart, const std::function<CMatrix(std::span<const cplx>)>& f,
                                MetricKind which, const Tolerances& tol) {
  MetricField out{chart, {}, which};
  out.values.reserve(chart.node_count());
  for (std::size_t n = 0; n < chart.node_count(); ++n) {
    HermitianMatrix h = HermitianMatrix::from(f(chart.coordinates(n)), tol.hermiticity);
    if (!out.values.empty() && h.size() != out.values.front().size())
      fail(ErrorKind::InvalidInput, "metric field changes dimension across nodes");
    const double lo = h.min_eigenvalue();
    if (!(lo > tol.pd_floor)) {
      std::ostringstream msg;
      msg << "metric not positive definite at node " << n << " (min eigenvalue " << lo << ")";
      fail(ErrorKind::DegenerateMetric, msg.str());
    }
    out.values.push_back(std::move(h));
  }
  return out;
}

BasisField BasisField::sample(const CoordinateChart& chart,
                              const std::function<std::vector<CVector>(std::span<const cplx>)>& f) {
  BasisField out{chart, {}};
  out.kets.reserve(chart.node_count());
  for (std::size_t n = 0; n < chart.node_count(); ++n) {
    out.kets.push_back(f(chart.coordinates(n)));
    require(!out.kets.back().empty() && out.kets.back().size() == out.kets.front().size(), ErrorKind::InvalidInput,
            "basis field must carry the same nonzero number of kets at every node");
  }
  return out;
}

}  // namespace relstate
