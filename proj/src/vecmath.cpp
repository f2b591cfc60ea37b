#include "drsub/vecmath.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drsub/errors.hpp"

namespace drsub {

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

Point::Point(Vec coords) : coords_(std::move(coords)) {
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    double v = coords_[i];
    if (!std::isfinite(v) || v < -tol::kFeasibility || v > 1.0 + tol::kFeasibility) {
      throw ArgumentError("Point coordinate " + std::to_string(i) + " = " + std::to_string(v) +
                          " outside [0,1]");
    }
  }
}

Point Point::clamped(Vec coords) {
  for (double& v : coords) {
    if (std::isnan(v)) throw ArgumentError("Point::clamped: NaN coordinate");
    v = std::clamp(v, 0.0, 1.0);
  }
  return Point(std::move(coords));
}

Vec hadamard(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size(), "hadamard");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return out;
}

Vec psum(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size(), "psum");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i] * (1.0 - x[i]);
  return out;
}

Point hadamard(const Point& x, const Point& y) {
  return Point(hadamard(std::span<const double>(x), std::span<const double>(y)));
}

Point psum(const Point& x, const Point& y) {
  return Point(psum(std::span<const double>(x), std::span<const double>(y)));
}

Point psum_fold(std::span<const Point> points) {
  if (points.empty()) throw ArgumentError("psum_fold: empty list");
  Vec acc = points.front().coords();
  for (std::size_t k = 1; k < points.size(); ++k) acc = psum(acc, points[k]);
  return Point(std::move(acc));
}

double linf_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

Vec one_minus(std::span<const double> x) {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 - x[i];
  return out;
}

double dot(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double l2_norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double l2_distance(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size(), "l2_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

Vec lerp(std::span<const double> x, std::span<const double> y, double t) {
  check_same_size(x.size(), y.size(), "lerp");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (1.0 - t) * x[i] + t * y[i];
  return out;
}

}  // namespace drsub
