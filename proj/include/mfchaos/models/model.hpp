#pragma once

// Declarative model specifications for the three model families: mean-field
// diffusions, path-dependent (delay) systems and kinetic Hamiltonian systems.
//
// Every kernel is available as a plain callable so that validators and the
// generic simulation path can evaluate it. Built-in families additionally carry
// a structured form (a sum of affine or tanh pair terms) that the particle
// engine evaluates with the vectorised kernels.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfchaos {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A discretised path over [-r0, 0]. at(l) is the point at time t - l * dt.
class SegmentView {
 public:
  SegmentView(std::span<const double* const> slices, std::size_t index, std::size_t dim, double dt)
      : slices_(slices), index_(index), dim_(dim), dt_(dt) {}

  std::size_t lags() const { return slices_.size() - 1; }
  std::size_t dim() const { return dim_; }
  double dt() const { return dt_; }
  std::span<const double> at(std::size_t lag) const {
    return {slices_[lag] + index_ * dim_, dim_};
  }
  std::span<const double> head() const { return at(0); }

 private:
  std::span<const double* const> slices_;
  std::size_t index_;
  std::size_t dim_;
  double dt_;
};

// Kernels take the time explicitly; all built-ins ignore it.
using PointMap = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
using PairMap = std::function<void(double t, std::span<const double> x, std::span<const double> y,
                                   std::span<double> out)>;
using SegmentPairMap = std::function<void(double t, const SegmentView& xi, const SegmentView& eta,
                                          std::span<double> out)>;

struct AffineMap {
  Matrix linear;
  Vector offset;
};

// One scalar contribution to entry (row, col) of a pair kernel:
//   weight * f(coef_y * eta[src_y](-lag_y) + coef_x * xi[src_x](-lag_x) + offset)
// with f the identity or tanh. Lags are in time units; zero for mean-field
// models.
struct PairTerm {
  enum class Form { Linear, Tanh };
  Form form = Form::Linear;
  double weight = 1.0;
  std::size_t row = 0;
  std::size_t col = 0;
  double coef_y = 1.0;
  std::size_t src_y = 0;
  double lag_y = 0.0;
  double coef_x = 0.0;
  std::size_t src_x = 0;
  double lag_x = 0.0;
  double offset = 0.0;
};

// constant + sum of terms, a rows x cols matrix (cols = 1 for drifts).
struct PairKernel {
  std::size_t rows = 0;
  std::size_t cols = 1;
  Matrix constant;
  std::vector<PairTerm> terms;

  double max_lag() const;
  // Evaluates on two segments sampled at spacing xi.dt(). Output row-major.
  void evaluate(const SegmentView& xi, const SegmentView& eta, std::span<double> out) const;
  // Same for plain points (all lags must be zero).
  void evaluate(std::span<const double> x, std::span<const double> y, std::span<double> out) const;
};

struct DriftSpec {
  std::string family = "custom";
  PointMap b0;
  PairMap b1;
  double K_b = 0.0;  // Lipschitz bound for b0 and b1
  double K1 = 0.0;   // dissipativity of b0: 2<b0(x)-b0(y), x-y> <= -K1 |x-y|^2
  double K2 = 0.0;   // interaction bound under the dissipative regime
  std::optional<AffineMap> b0_affine;
  std::optional<PairKernel> b1_structure;
};

struct DiffusionKernelSpec {
  std::string family = "custom";
  PairMap sigma_tilde;  // d x n, row-major
  double K_sigma = 0.0;
  double delta = std::numeric_limits<double>::infinity();
  bool distribution_free = false;
  std::optional<PairKernel> structure;
};

enum class Regime { FiniteTime, Dissipative };

struct MeanFieldModel {
  std::size_t d = 1;
  std::size_t n = 1;
  DriftSpec drift;
  DiffusionKernelSpec diffusion;
  Regime regime = Regime::FiniteTime;

  // Evaluates every kernel once at the origin and checks output shapes.
  void check() const;
};

struct DelayModel {
  std::size_t d = 1;
  std::size_t n = 1;
  double r0 = 0.0;
  std::size_t grid_lag = 0;  // r0 = grid_lag * dt

  PointMap b;
  double K_b = 0.0;  // 2<b(x)-b(y), x-y> <= -K_b |x-y|^2
  std::optional<AffineMap> b_affine;

  SegmentPairMap B_tilde;
  double K_B = 0.0;
  std::optional<PairKernel> B_structure;

  SegmentPairMap sigma_tilde;  // d x n
  double K_sigma = 0.0;        // squared Lipschitz constant in sup norm
  std::optional<PairKernel> sigma_structure;

  double grid_dt() const;
  void check() const;
};

struct HamiltonianModel {
  std::size_t m = 1;
  std::size_t d = 1;
  Matrix A;  // m x m
  Matrix M;  // m x d
  double K_A = 0.0;

  PointMap b;  // R^d -> R^d
  double K1 = 0.0;
  double K2 = 0.0;
  std::optional<AffineMap> b_affine;

  SegmentPairMap B_tilde;  // (m+d)-segments -> R^d
  double K_B = 0.0;
  std::optional<PairKernel> B_structure;

  Matrix sigma;  // d x d
  double r0 = 0.0;
  std::size_t grid_lag = 0;

  std::size_t state_dim() const { return m + d; }
  double grid_dt() const;
  void check() const;
};

// --- built-in kernel families --------------------------------------------

// b0(x) = A0 x + c0, b1(x, y) = B1 x + B2 y + c1.
DriftSpec linear_drift(const Matrix& A0, const Vector& c0, const Matrix& B1, const Matrix& B2,
                       const Vector& c1);

// b0(x) = -confinement * x, b1(x, y)_k = coupling * tanh(y_k - x_k).
DriftSpec attractive_quadratic_tanh(std::size_t d, double confinement, double coupling);

// sigma_tilde(x, y) = sigma.
DiffusionKernelSpec constant_sigma(const Matrix& sigma);

// sigma_tilde(x, y) = base * I + scale * diag(tanh(x_k + y_k)).
DiffusionKernelSpec kernel_sigma(std::size_t d, double base, double scale);

// Wraps a structured kernel as a segment callable.
SegmentPairMap segment_map(PairKernel kernel);

// Affine point map x -> linear x + offset.
PointMap affine_map(AffineMap map);

// Lagged interaction B(xi, eta)_k = weight * f(eta_k(-lag_eta) - xi_k(-lag_xi)),
// f = tanh or identity. Output row k reads coordinate out_offset + k of the
// dim-dimensional state, so a kinetic kernel can act on the momentum block.
PairKernel lagged_difference_kernel(std::size_t dim, std::size_t d, std::size_t out_offset,
                                    double weight, bool use_tanh, double lag_xi, double lag_eta);

// sigma(xi, eta) = base * I + scale * diag(tanh(xi_k(-lag_xi) + eta_k(-lag_eta))).
PairKernel lagged_kernel_sigma(std::size_t d, double base, double scale, double lag_xi,
                               double lag_eta);

// Delay model from structured parts; callables are derived from them.
DelayModel make_delay_model(std::size_t d, std::size_t n, double r0, std::size_t grid_lag,
                            AffineMap b, double K_b, PairKernel B, double K_B, PairKernel sigma,
                            double K_sigma);

// Kinetic model from structured parts. B acts on (m+d)-dimensional segments.
HamiltonianModel make_hamiltonian_model(const Matrix& A, const Matrix& M, double K_A, AffineMap b,
                                        double K1, double K2, PairKernel B, double K_B,
                                        const Matrix& sigma, double r0, std::size_t grid_lag);

}  // namespace mfchaos
