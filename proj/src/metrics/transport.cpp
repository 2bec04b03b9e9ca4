#include "mfchaos/metrics/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mfchaos/simd/kernels.hpp"

namespace mfchaos {

PointCloud::PointCloud(std::size_t n, std::size_t dim, std::vector<double> points)
    : n_(n), dim_(dim), points_(std::move(points)) {
  if (n == 0 || dim == 0) throw std::invalid_argument("point cloud must be non-empty");
  if (points_.size() != n * dim) throw std::invalid_argument("point cloud storage does not match N x D");
  for (double v : points_) {
    if (!std::isfinite(v)) throw std::invalid_argument("point cloud has a non-finite entry");
  }
}

PointCloud PointCloud::line(std::vector<double> values) {
  const std::size_t n = values.size();
  return PointCloud(n, 1, std::move(values));
}

namespace {

void require_same_shape(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) {
    throw std::invalid_argument("clouds differ in size or dimension (" + std::to_string(a.size()) +
                                "x" + std::to_string(a.dim()) + " vs " + std::to_string(b.size()) +
                                "x" + std::to_string(b.dim()) + ")");
  }
}

}  // namespace

Assignment solve_assignment(const Matrix& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  if (cost.cols() != cost.rows()) throw std::invalid_argument("assignment needs a square cost matrix");
  Assignment out;
  if (n == 0) return out;
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.column_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.column_of_row[row_of_col[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) {
    out.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.column_of_row[i]));
  }
  return out;
}

Matrix squared_distance_matrix(const PointCloud& a, const PointCloud& b) {
  Matrix c(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          simd::squared_distance(a.point(i), b.point(j));
    }
  }
  return c;
}

double w2_exact(const PointCloud& a, const PointCloud& b) {
  require_same_shape(a, b);
  const Assignment best = solve_assignment(squared_distance_matrix(a, b));
  return std::sqrt(std::max(0.0, best.cost / static_cast<double>(a.size())));
}

double w2_pairing_bound(const PointCloud& a, const PointCloud& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += simd::squared_distance(a.point(i), b.point(i));
  return std::sqrt(acc / static_cast<double>(a.size()));
}

SinkhornNotConverged::SinkhornNotConverged(std::size_t iterations, double residual)
    : std::runtime_error("Sinkhorn did not converge after " + std::to_string(iterations) +
                         " iterations (marginal residual " + std::to_string(residual) + ")"),
      iterations(iterations),
      residual(residual) {}

SinkhornResult w2_sinkhorn(const PointCloud& a, const PointCloud& b, const SinkhornOptions& opts) {
  require_same_shape(a, b);
  if (!(opts.eps > 0.0)) throw std::invalid_argument("Sinkhorn eps must be positive");
  const std::size_t n = a.size();
  const Matrix cost = squared_distance_matrix(a, b);
  const Matrix cost_t = cost.transpose();
  // Row-major access: column j of cost_t (col-major) is row j of cost.
  const double log_w = -std::log(static_cast<double>(n));
  std::vector<double> f(n, 0.0), g(n, 0.0), z(n);

  auto lse = [&](std::span<const double> zz) {
    const double top = *std::max_element(zz.begin(), zz.end());
    return top + std::log(simd::sum_exp_shifted(zz, top));
  };
  // f_i = -eps LSE_j(log b_j + (g_j - C_ij)/eps), using columns of cost_t.
  auto update_f = [&](double eps) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* col = cost_t.data() + i * n;  // C(i, .)
      for (std::size_t j = 0; j < n; ++j) z[j] = log_w + (g[j] - col[j]) / eps;
      f[i] = -eps * lse(z);
    }
  };
  auto update_g = [&](double eps) {
    for (std::size_t j = 0; j < n; ++j) {
      const double* col = cost.data() + j * n;  // C(., j)
      for (std::size_t i = 0; i < n; ++i) z[i] = log_w + (f[i] - col[i]) / eps;
      g[j] = -eps * lse(z);
    }
  };
  // L1 distance of the row sums of the plan from 1/N.
  auto row_residual = [&](double eps) {
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* col = cost_t.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) z[j] = (f[i] + g[j] - col[j]) / eps;
      res += std::abs(std::exp(2.0 * log_w) * simd::sum_exp_shifted(z, 0.0) - std::exp(log_w));
    }
    return res;
  };

  SinkhornResult out;
  if (opts.eps_scaling) {
    double eps = std::max(opts.eps, cost.maxCoeff());
    while (eps > opts.eps) {
      for (int it = 0; it < 20; ++it) {
        update_f(eps);
        update_g(eps);
        out.iterations++;
      }
      eps = std::max(opts.eps, eps * 0.5);
    }
  }
  const double eps = opts.eps;
  double residual = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  // The residual costs as much as an iteration, so it is checked every 10.
  while (it < opts.max_iter) {
    update_f(eps);
    update_g(eps);
    ++it;
    if (it % 10 == 0 || it == opts.max_iter) {
      residual = row_residual(eps);
      if (residual < opts.tol) break;
    }
  }
  out.iterations += it;
  out.residual = residual;
  if (!(residual < opts.tol)) throw SinkhornNotConverged(out.iterations, residual);

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double c = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      total += std::exp(2.0 * log_w + (f[i] + g[j] - c) / eps) * c;
    }
  }
  out.cost = total;
  out.w2 = std::sqrt(std::max(0.0, total));
  return out;
}

double marginal_chaos_bound(double full_sq, std::size_t k, std::size_t N) {
  if (k == 0 || k > N) throw std::invalid_argument("marginal_chaos_bound needs 1 <= k <= N");
  return static_cast<double>(k) / static_cast<double>(N) * full_sq;
}

}  // namespace mfchaos
