#include "mfchaos/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfchaos {
namespace {

double spectral(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

std::size_t lag_index(double lag, double dt, std::size_t available) {
  if (lag == 0.0) return 0;
  if (!(dt > 0.0)) throw std::invalid_argument("lagged kernel evaluated on a segment without a grid");
  const double steps = lag / dt;
  const auto idx = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(idx)) > 1e-9 * std::max(1.0, steps)) {
    throw std::invalid_argument("kernel lag " + std::to_string(lag) +
                                " is not a multiple of the grid spacing " + std::to_string(dt));
  }
  if (idx > available) {
    throw std::invalid_argument("kernel lag " + std::to_string(lag) + " exceeds the segment horizon");
  }
  return idx;
}

double apply(const PairTerm& term, double y, double x) {
  const double z = term.coef_y * y + term.coef_x * x + term.offset;
  return term.weight * (term.form == PairTerm::Form::Tanh ? std::tanh(z) : z);
}

void require_shape(const char* what, std::size_t got, std::size_t want) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(want) +
                                " entries, got " + std::to_string(got));
  }
}

void check_finite(const char* what, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " is not finite at the origin");
  }
}

void check_kernel_shape(const PairKernel& k, std::size_t rows, std::size_t cols, std::size_t dim,
                        const char* what) {
  if (k.rows != rows || k.cols != cols) {
    throw std::invalid_argument(std::string(what) + ": structured kernel has shape " +
                                std::to_string(k.rows) + "x" + std::to_string(k.cols) +
                                ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (const auto& t : k.terms) {
    if (t.row >= rows || t.col >= cols || t.src_x >= dim || t.src_y >= dim) {
      throw std::invalid_argument(std::string(what) + ": term index out of range");
    }
  }
}

}  // namespace

double PairKernel::max_lag() const {
  double lag = 0.0;
  for (const auto& t : terms) lag = std::max({lag, t.lag_x, t.lag_y});
  return lag;
}

void PairKernel::evaluate(const SegmentView& xi, const SegmentView& eta,
                          std::span<double> out) const {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = constant.size() ? constant(r, c) : 0.0;
  for (const auto& t : terms) {
    const double y = eta.at(lag_index(t.lag_y, eta.dt(), eta.lags()))[t.src_y];
    const double x = xi.at(lag_index(t.lag_x, xi.dt(), xi.lags()))[t.src_x];
    out[t.row * cols + t.col] += apply(t, y, x);
  }
}

void PairKernel::evaluate(std::span<const double> x, std::span<const double> y,
                          std::span<double> out) const {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = constant.size() ? constant(r, c) : 0.0;
  for (const auto& t : terms) {
    if (t.lag_x != 0.0 || t.lag_y != 0.0) {
      throw std::invalid_argument("lagged kernel evaluated on plain points");
    }
    out[t.row * cols + t.col] += apply(t, y[t.src_y], x[t.src_x]);
  }
}

void MeanFieldModel::check() const {
  if (d == 0 || n == 0) throw std::invalid_argument("model dimensions must be positive");
  if (!drift.b0 || !drift.b1 || !diffusion.sigma_tilde) {
    throw std::invalid_argument("mean-field model has an unset kernel");
  }
  std::vector<double> x(d, 0.0), out(d), sig(d * n);
  drift.b0(0.0, x, out);
  check_finite("b0", out);
  drift.b1(0.0, x, x, out);
  check_finite("b1", out);
  diffusion.sigma_tilde(0.0, x, x, sig);
  check_finite("sigma_tilde", sig);
  if (drift.b0_affine) {
    require_shape("b0 linear part", static_cast<std::size_t>(drift.b0_affine->linear.size()), d * d);
  }
  if (drift.b1_structure) check_kernel_shape(*drift.b1_structure, d, 1, d, "b1");
  if (diffusion.structure) check_kernel_shape(*diffusion.structure, d, n, d, "sigma_tilde");
}

double DelayModel::grid_dt() const {
  return grid_lag == 0 ? 0.0 : r0 / static_cast<double>(grid_lag);
}

void DelayModel::check() const {
  if (d == 0 || n == 0) throw std::invalid_argument("model dimensions must be positive");
  if (r0 < 0.0) throw std::invalid_argument("delay horizon r0 must be nonnegative");
  if ((r0 > 0.0) != (grid_lag > 0)) {
    throw std::invalid_argument("grid_lag must be positive exactly when r0 > 0");
  }
  if (!b || !B_tilde || !sigma_tilde) throw std::invalid_argument("delay model has an unset kernel");
  if (B_structure) {
    check_kernel_shape(*B_structure, d, 1, d, "B_tilde");
    if (B_structure->max_lag() > r0 + 1e-12) throw std::invalid_argument("B_tilde lag exceeds r0");
  }
  if (sigma_structure) {
    check_kernel_shape(*sigma_structure, d, n, d, "sigma_tilde");
    if (sigma_structure->max_lag() > r0 + 1e-12) throw std::invalid_argument("sigma_tilde lag exceeds r0");
  }
}

double HamiltonianModel::grid_dt() const {
  return grid_lag == 0 ? 0.0 : r0 / static_cast<double>(grid_lag);
}

void HamiltonianModel::check() const {
  if (m == 0 || d == 0) throw std::invalid_argument("model dimensions must be positive");
  if (A.rows() != static_cast<Eigen::Index>(m) || A.cols() != static_cast<Eigen::Index>(m)) {
    throw std::invalid_argument("A must be m x m");
  }
  if (M.rows() != static_cast<Eigen::Index>(m) || M.cols() != static_cast<Eigen::Index>(d)) {
    throw std::invalid_argument("M must be m x d");
  }
  if (sigma.rows() != static_cast<Eigen::Index>(d) || sigma.cols() != static_cast<Eigen::Index>(d)) {
    throw std::invalid_argument("sigma must be d x d");
  }
  if (r0 < 0.0 || (r0 > 0.0) != (grid_lag > 0)) {
    throw std::invalid_argument("grid_lag must be positive exactly when r0 > 0");
  }
  if (!b || !B_tilde) throw std::invalid_argument("Hamiltonian model has an unset kernel");
  if (B_structure) {
    check_kernel_shape(*B_structure, d, 1, m + d, "B_tilde");
    if (B_structure->max_lag() > r0 + 1e-12) throw std::invalid_argument("B_tilde lag exceeds r0");
  }
}

PointMap affine_map(AffineMap map) {
  return [map = std::move(map)](double, std::span<const double> x, std::span<double> out) {
    Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::Map<Vector> ov(out.data(), static_cast<Eigen::Index>(out.size()));
    ov = map.linear * xv + map.offset;
  };
}

SegmentPairMap segment_map(PairKernel kernel) {
  return [kernel = std::move(kernel)](double, const SegmentView& xi, const SegmentView& eta,
                                      std::span<double> out) { kernel.evaluate(xi, eta, out); };
}

namespace {

PairMap point_pair_map(PairKernel kernel) {
  return [kernel = std::move(kernel)](double, std::span<const double> x, std::span<const double> y,
                                      std::span<double> out) { kernel.evaluate(x, y, out); };
}

}  // namespace

DriftSpec linear_drift(const Matrix& A0, const Vector& c0, const Matrix& B1, const Matrix& B2,
                       const Vector& c1) {
  const auto d = static_cast<std::size_t>(A0.rows());
  const auto di = A0.rows();
  if (A0.cols() != di || B1.rows() != di || B1.cols() != di || B2.rows() != di ||
      B2.cols() != di || c0.size() != di || c1.size() != di) {
    throw std::invalid_argument("linear drift: inconsistent dimensions");
  }
  DriftSpec spec;
  spec.family = "linear";
  spec.b0_affine = AffineMap{A0, c0};
  spec.b0 = affine_map(*spec.b0_affine);

  PairKernel k;
  k.rows = d;
  k.cols = 1;
  k.constant = c1;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto ri = static_cast<Eigen::Index>(r);
      const auto ji = static_cast<Eigen::Index>(j);
      if (B1(ri, ji) != 0.0) {
        k.terms.push_back({PairTerm::Form::Linear, B1(ri, ji), r, 0, 0.0, 0, 0.0, 1.0, j, 0.0, 0.0});
      }
      if (B2(ri, ji) != 0.0) {
        k.terms.push_back({PairTerm::Form::Linear, B2(ri, ji), r, 0, 1.0, j, 0.0, 0.0, 0, 0.0, 0.0});
      }
    }
  }
  spec.b1_structure = k;
  spec.b1 = point_pair_map(k);

  const Matrix sym = 0.5 * (A0 + A0.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  spec.K1 = std::max(0.0, -2.0 * es.eigenvalues().maxCoeff());
  spec.K2 = spectral(B1) + spectral(B2);
  spec.K_b = std::max({spectral(A0), spectral(B1), spectral(B2)});
  return spec;
}

DriftSpec attractive_quadratic_tanh(std::size_t d, double confinement, double coupling) {
  if (d == 0) throw std::invalid_argument("dimension must be positive");
  DriftSpec spec;
  spec.family = "attractive_quadratic_tanh";
  const auto di = static_cast<Eigen::Index>(d);
  spec.b0_affine = AffineMap{-confinement * Matrix::Identity(di, di), Vector::Zero(di)};
  spec.b0 = affine_map(*spec.b0_affine);

  PairKernel k;
  k.rows = d;
  k.cols = 1;
  k.constant = Matrix::Zero(di, 1);
  for (std::size_t r = 0; r < d; ++r) {
    k.terms.push_back({PairTerm::Form::Tanh, coupling, r, 0, 1.0, r, 0.0, -1.0, r, 0.0, 0.0});
  }
  spec.b1_structure = k;
  spec.b1 = point_pair_map(k);
  spec.K1 = std::max(0.0, 2.0 * confinement);
  spec.K2 = std::abs(coupling);
  spec.K_b = std::max(std::abs(confinement), std::abs(coupling));
  return spec;
}

DiffusionKernelSpec constant_sigma(const Matrix& sigma) {
  DiffusionKernelSpec spec;
  spec.family = "constant_sigma";
  PairKernel k;
  k.rows = static_cast<std::size_t>(sigma.rows());
  k.cols = static_cast<std::size_t>(sigma.cols());
  k.constant = sigma;
  spec.structure = k;
  spec.sigma_tilde = point_pair_map(k);
  spec.K_sigma = 0.0;
  spec.distribution_free = true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma * sigma.transpose());
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  spec.delta = lo > 0.0 ? std::max({1.0, hi, 1.0 / lo}) : std::numeric_limits<double>::infinity();
  return spec;
}

DiffusionKernelSpec kernel_sigma(std::size_t d, double base, double scale) {
  DiffusionKernelSpec spec;
  spec.family = "kernel_sigma";
  spec.structure = lagged_kernel_sigma(d, base, scale, 0.0, 0.0);
  spec.sigma_tilde = point_pair_map(*spec.structure);
  spec.K_sigma = std::abs(scale);
  spec.distribution_free = scale == 0.0;
  const double lo = std::abs(base) - std::abs(scale);
  const double hi = std::abs(base) + std::abs(scale);
  spec.delta = lo > 0.0 ? std::max({1.0, hi * hi, 1.0 / (lo * lo)})
                        : std::numeric_limits<double>::infinity();
  return spec;
}

PairKernel lagged_difference_kernel(std::size_t dim, std::size_t d, std::size_t out_offset,
                                    double weight, bool use_tanh, double lag_xi, double lag_eta) {
  if (out_offset + d > dim) throw std::invalid_argument("lagged kernel: coordinates out of range");
  PairKernel k;
  k.rows = d;
  k.cols = 1;
  k.constant = Matrix::Zero(static_cast<Eigen::Index>(d), 1);
  const auto form = use_tanh ? PairTerm::Form::Tanh : PairTerm::Form::Linear;
  for (std::size_t r = 0; r < d; ++r) {
    const std::size_t src = out_offset + r;
    k.terms.push_back({form, weight, r, 0, 1.0, src, lag_eta, -1.0, src, lag_xi, 0.0});
  }
  return k;
}

PairKernel lagged_kernel_sigma(std::size_t d, double base, double scale, double lag_xi,
                               double lag_eta) {
  const auto di = static_cast<Eigen::Index>(d);
  PairKernel k;
  k.rows = d;
  k.cols = d;
  k.constant = base * Matrix::Identity(di, di);
  if (scale != 0.0) {
    for (std::size_t r = 0; r < d; ++r) {
      k.terms.push_back({PairTerm::Form::Tanh, scale, r, r, 1.0, r, lag_eta, 1.0, r, lag_xi, 0.0});
    }
  }
  return k;
}

DelayModel make_delay_model(std::size_t d, std::size_t n, double r0, std::size_t grid_lag,
                            AffineMap b, double K_b, PairKernel B, double K_B, PairKernel sigma,
                            double K_sigma) {
  DelayModel model;
  model.d = d;
  model.n = n;
  model.r0 = r0;
  model.grid_lag = grid_lag;
  model.b_affine = b;
  model.b = affine_map(std::move(b));
  model.K_b = K_b;
  model.B_structure = B;
  model.B_tilde = segment_map(std::move(B));
  model.K_B = K_B;
  model.sigma_structure = sigma;
  model.sigma_tilde = segment_map(std::move(sigma));
  model.K_sigma = K_sigma;
  model.check();
  return model;
}

HamiltonianModel make_hamiltonian_model(const Matrix& A, const Matrix& M, double K_A, AffineMap b,
                                        double K1, double K2, PairKernel B, double K_B,
                                        const Matrix& sigma, double r0, std::size_t grid_lag) {
  HamiltonianModel model;
  model.m = static_cast<std::size_t>(A.rows());
  model.d = static_cast<std::size_t>(sigma.rows());
  model.A = A;
  model.M = M;
  model.K_A = K_A;
  model.b_affine = b;
  model.b = affine_map(std::move(b));
  model.K1 = K1;
  model.K2 = K2;
  model.B_structure = B;
  model.B_tilde = segment_map(std::move(B));
  model.K_B = K_B;
  model.sigma = sigma;
  model.r0 = r0;
  model.grid_lag = grid_lag;
  model.check();
  return model;
}

}  // namespace mfchaos
