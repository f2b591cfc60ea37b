#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace drsub {

using Vec = std::vector<double>;

namespace tol {
inline constexpr double kFeasibility = 1e-9;
inline constexpr double kAlgebra = 1e-12;
inline constexpr double kMembership = 1e-8;
}  // namespace tol

/// A vector in [0,1]^n. Construction rejects coordinates outside
/// [-1e-9, 1 + 1e-9] or non-finite ones; clamping is only done by `clamped`.
class Point {
 public:
  Point() = default;
  explicit Point(Vec coords);
  Point(std::initializer_list<double> coords) : Point(Vec(coords)) {}

  static Point zeros(std::size_t n) { return Point(Vec(n, 0.0)); }
  static Point ones(std::size_t n) { return Point(Vec(n, 1.0)); }
  /// Projects each coordinate onto [0,1]; the only place clamping happens.
  static Point clamped(Vec coords);

  std::size_t size() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const noexcept { return coords_[i]; }
  const Vec& coords() const noexcept { return coords_; }
  operator std::span<const double>() const noexcept { return coords_; }

  bool operator==(const Point&) const = default;

 private:
  Vec coords_;
};

Point hadamard(const Point& x, const Point& y);
/// Coordinate-wise probabilistic sum x + y - x*y.
Point psum(const Point& x, const Point& y);
Point psum_fold(std::span<const Point> points);
double linf_norm(std::span<const double> x);

// Raw-vector helpers shared by the solvers. Lengths are checked.
Vec hadamard(std::span<const double> x, std::span<const double> y);
Vec psum(std::span<const double> x, std::span<const double> y);
Vec one_minus(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double l2_norm(std::span<const double> x);
double l2_distance(std::span<const double> x, std::span<const double> y);
/// (1 - t) * x + t * y
Vec lerp(std::span<const double> x, std::span<const double> y, double t);
void check_same_size(std::size_t a, std::size_t b, const char* what);

}  // namespace drsub
