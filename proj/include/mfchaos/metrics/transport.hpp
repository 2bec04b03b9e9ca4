#pragma once

// Wasserstein-2 between equal-weight point clouds: exact (optimal assignment),
// entropic (log-domain Sinkhorn), and the index-pairing upper bound.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfchaos/models/model.hpp"

namespace mfchaos {

// N points in R^D, each of mass 1/N. Row-major storage.
class PointCloud {
 public:
  PointCloud(std::size_t n, std::size_t dim, std::vector<double> points);
  static PointCloud line(std::vector<double> values);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }
  std::span<const double> data() const { return points_; }

 private:
  std::size_t n_;
  std::size_t dim_;
  std::vector<double> points_;
};

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double cost = 0.0;  // sum of the selected entries
};

// Exact minimum-cost perfect matching on a square cost matrix. Shortest
// augmenting paths with row/column potentials, O(n^3).
Assignment solve_assignment(const Matrix& cost);

// Squared Euclidean cost matrix between two clouds.
Matrix squared_distance_matrix(const PointCloud& a, const PointCloud& b);

double w2_exact(const PointCloud& a, const PointCloud& b);

// sqrt((1/N) sum_i |a_i - b_i|^2); an upper bound for w2_exact.
double w2_pairing_bound(const PointCloud& a, const PointCloud& b);

struct SinkhornOptions {
  double eps = 1e-2;
  std::size_t max_iter = 100000;
  double tol = 1e-4;          // L1 violation of the row marginal (total mass 1)
  bool eps_scaling = true;    // anneal eps from the cost scale down to eps
};

struct SinkhornResult {
  double w2 = 0.0;    // sqrt of the transport cost <P, C> of the entropic plan
  double cost = 0.0;  // <P, C>
  std::size_t iterations = 0;
  double residual = 0.0;
};

class SinkhornNotConverged : public std::runtime_error {
 public:
  SinkhornNotConverged(std::size_t iterations, double residual);
  std::size_t iterations;
  double residual;
};

// Entropic surrogate for W2. The plan cost decreases towards the exact value
// as eps -> 0.
SinkhornResult w2_sinkhorn(const PointCloud& a, const PointCloud& b, const SinkhornOptions& opts = {});

// (k / N) * full_sq: the squared W2 bound for a k-marginal of an exchangeable
// N-particle coupling.
double marginal_chaos_bound(double full_sq, std::size_t k, std::size_t N);

}  // namespace mfchaos
