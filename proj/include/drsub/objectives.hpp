#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "drsub/polytope.hpp"
#include "drsub/rng.hpp"
#include "drsub/vecmath.hpp"

namespace drsub {

/// Value/gradient oracle on [0,1]^n.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const noexcept = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual Vec gradient(std::span<const double> x) const = 0;
  /// Smoothness estimate. Only used for diagnostics.
  virtual double beta() const = 0;
  /// Upper bound on the value over the unit cube, for normalising online runs.
  virtual double value_upper() const = 0;
  virtual std::string family() const = 0;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// Row-major dense square matrix.
struct Matrix {
  std::size_t n = 0;
  Vec data;

  Matrix() = default;
  explicit Matrix(std::size_t size, double fill = 0.0) : n(size), data(size * size, fill) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

/// 1/2 x'Hx + h'x + c with H symmetric and entrywise non-positive.
class QuadraticObjective final : public Objective {
 public:
  /// `check_dr` = false skips the H <= 0 check so that negative controls can
  /// be built.
  QuadraticObjective(Matrix H, Vec h, double c, bool check_dr = true);

  std::size_t dim() const noexcept override { return h_.size(); }
  double value(std::span<const double> x) const override;
  Vec gradient(std::span<const double> x) const override;
  double beta() const override;  // Frobenius norm of H
  double value_upper() const override;
  std::string family() const override { return "quadratic"; }

  const Matrix& H() const noexcept { return H_; }
  const Vec& h() const noexcept { return h_; }
  double c() const noexcept { return c_; }

 private:
  Matrix H_;
  Vec h_;
  double c_;
};

struct Edge {
  int u = 0;
  int v = 0;
  double w = 1.0;
};

/// sum over ordered pairs i != j of w_ij (1 - q^{x_i}) q^{x_j}, q = 1 - p.
/// Undirected edges are symmetrised and duplicates summed.
class RevenueObjective final : public Objective {
 public:
  RevenueObjective(std::size_t n, std::span<const Edge> edges, double p);

  std::size_t dim() const noexcept override { return n_; }
  double value(std::span<const double> x) const override;
  Vec gradient(std::span<const double> x) const override;
  double beta() const override;
  double value_upper() const override { return total_weight_; }
  std::string family() const override { return "revenue"; }

  double p() const noexcept { return p_; }
  /// Adjacency in CSR form; every undirected edge appears in both rows.
  const std::vector<int>& offsets() const noexcept { return offsets_; }
  const std::vector<int>& neighbours() const noexcept { return nbr_; }
  const Vec& weights() const noexcept { return wt_; }
  std::size_t num_edges() const noexcept { return nbr_.size() / 2; }

 private:
  std::size_t n_;
  double p_;
  double log_q_;
  std::vector<int> offsets_;
  std::vector<int> nbr_;
  Vec wt_;
  double total_weight_ = 0.0;
};

/// Multilinear extension of S -> (1/n) sum_i max_{j in S} M_ij - sum_{j in S} d_j.
/// Column ties in a row are broken toward the larger index.
class LocationObjective final : public Objective {
 public:
  LocationObjective(Matrix M, Vec d);

  std::size_t dim() const noexcept override { return d_.size(); }
  double value(std::span<const double> x) const override;
  Vec gradient(std::span<const double> x) const override;
  double beta() const override;
  double value_upper() const override;
  std::string family() const override { return "location"; }

  /// Discrete set function on a 0/1 mask.
  double set_value(const std::vector<bool>& S) const;
  const Matrix& M() const noexcept { return M_; }
  const Vec& d() const noexcept { return d_; }

 private:
  Matrix M_;
  Vec d_;
  std::vector<std::vector<int>> order_;  // per row, columns from largest to smallest
};

// --- instance generators -------------------------------------------------------

enum class QpDistribution { kUniform, kExponential };
QpDistribution parse_qp_distribution(const std::string& s);
std::string to_string(QpDistribution d);

inline constexpr std::size_t kMaxEnumerationDim = 20;

/// u_j = min_i b_i / A_ij over rows with A_ij > 0.
Vec upper_bounds(const std::vector<Vec>& A, std::span<const double> b);

/// -min over the box [0,u] of 1/2 x'Hx + h'x, by visiting every vertex. Exact
/// when H has a non-positive diagonal.
double qp_offset(const Matrix& H, std::span<const double> h, std::span<const double> u);

/// A generated instance in rescaled coordinates x = u (.) x_orig, so that the
/// body lives in the unit cube. The original data is kept for reporting.
struct QpInstance {
  std::shared_ptr<const QuadraticObjective> objective;
  Decomposition decomposition;  // N = {0}, D = K
  Matrix H_orig;
  Vec h_orig;
  std::vector<Vec> A_orig;
  Vec u;
  double offset_M = 0.0;
};

QpInstance make_qp_instance(std::size_t n, std::size_t m_rows, QpDistribution dist,
                            std::uint64_t seed);

/// Random sites with Gaussian feature similarities, shared by `users` users
/// placed uniformly in the same rectangle. d_j = min(1, km / 200) / n keeps
/// F >= 0.
std::vector<std::shared_ptr<const LocationObjective>> make_location_stream(std::size_t n, int users, Rng& rng);
/// Single-user case of make_location_stream.
std::shared_ptr<const LocationObjective> make_location_instance(std::size_t n, Rng& rng);

/// Erdos-Renyi graph with unit weights.
std::vector<Edge> erdos_renyi(std::size_t n, double p_edge, Rng& rng);

// --- verification utilities ----------------------------------------------------

/// Max over coordinates of |analytic - central difference| / (1 + |numeric|).
double fd_gradient_check(const Objective& obj, std::span<const double> x, double step = 1e-5);

struct DrReport {
  int pairs = 0;
  int gradient_violations = 0;   // grad(y) > grad(x) + tol for x <= y
  int upper_violations = 0;      // <grad F(x), v> >= F(x+v) - F(x)
  int lower_violations = 0;      // <grad F(x), v> <= F(x) - F(x-v)
  int norm_bound_violations = 0; // F(x (+) y) >= (1 - |y|_inf) F(x)
  double worst = 0.0;            // largest violation seen, any kind
  int total() const noexcept {
    return gradient_violations + upper_violations + lower_violations + norm_bound_violations;
  }
};

DrReport dr_probe(const Objective& obj, int pairs, Rng& rng, double tol = 1e-8);

/// Both sides of the r-fold probabilistic-sum inequality: F(psum_i p_i x_i)
/// and the subset expectation sum_S prod p prod (1-p) F(psum_{i in S} x_i).
struct SubsetBound {
  double lhs = 0.0;
  double rhs = 0.0;
};
SubsetBound subset_bound(const Objective& obj, std::span<const Point> xs,
                         std::span<const double> p);

/// Largest ratio |grad(x) - grad(y)| / |x - y| over random pairs.
double sampled_lipschitz(const Objective& obj, int pairs, Rng& rng);

}  // namespace drsub
