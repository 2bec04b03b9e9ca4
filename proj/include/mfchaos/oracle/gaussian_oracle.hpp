#pragma once

// Exact Gaussian laws for linear mean-field models
//   dX^i = (A0 X^i + c0 + (1/N) sum_m (B1 X^i + B2 X^m + c1)) dt + Sigma dW^i
// and for the corresponding McKean-Vlasov limit. The joint law of the N
// particles stays exchangeable Gaussian, so it is described by a common mean,
// a diagonal covariance block and a cross-particle block.
//
// Two independent routes are provided for the interacting law: the reduced
// block ODE (cheap, any N) and RK4 on the full (N d) x (N d) Lyapunov system.

#include <cstddef>
#include <vector>

#include "mfchaos/metrics/gaussian.hpp"
#include "mfchaos/models/model.hpp"

namespace mfchaos {

struct LinearModelSpec {
  Matrix A0;
  Vector c0;
  Matrix B1;
  Matrix B2;
  Vector c1;
  Matrix Sigma;  // d x n

  std::size_t d() const { return static_cast<std::size_t>(A0.rows()); }
  void check() const;
  // -2 lambda_max(sym(A0)), clipped at 0.
  double K1() const;
  // |B1| + |B2| in spectral norm.
  double K2() const;

  // Extracts the coefficients of a model built from the `linear` drift and
  // `constant_sigma` diffusion families. Throws otherwise.
  static LinearModelSpec from_model(const MeanFieldModel& model);
  MeanFieldModel to_model(Regime regime = Regime::FiniteTime) const;
};

struct ExchangeableGaussian {
  Vector mean;   // per-particle mean
  Matrix Sigma;  // Cov(X^i, X^i)
  Matrix C;      // Cov(X^i, X^j), i != j
  std::size_t N = 1;

  // Throws if Sigma - C or Sigma + (N-1) C has an eigenvalue below -tol.
  void check_psd(double tol = 1e-10) const;
  Matrix full_covariance() const;
  Vector full_mean() const;
};

struct TimedGaussian {
  double t;
  GaussianLaw law;
};

struct TimedExchangeable {
  double t;
  ExchangeableGaussian law;
};

struct FullGaussian {
  Vector mean;
  Matrix cov;
};

// Limit law: m' = (A0 + B1 + B2) m + c0 + c1, S' = P S + S P^T + Sigma Sigma^T
// with P = A0 + B1. Classical RK4; entries at every ODE step including t = 0.
std::vector<TimedGaussian> propagate_limit_moments(const LinearModelSpec& spec, const Vector& m0,
                                                   const Matrix& S0, double T, double dt_ode = 1e-3);

// Reduced block ODE for the N-particle law.
std::vector<TimedExchangeable> propagate_interacting_moments(const LinearModelSpec& spec,
                                                             std::size_t N,
                                                             const ExchangeableGaussian& init,
                                                             double T, double dt_ode = 1e-3);

// Full Lyapunov route; returns the law at time T only.
FullGaussian propagate_interacting_full(const LinearModelSpec& spec, std::size_t N,
                                        const ExchangeableGaussian& init, double T,
                                        double dt_ode = 1e-3);

// Law of the first k particles.
GaussianLaw k_marginal(const ExchangeableGaussian& joint, std::size_t k);

// k-fold product of a law.
GaussianLaw product_law(const GaussianLaw& law, std::size_t k);

struct ChaosPoint {
  std::size_t N = 0;
  std::size_t k = 0;
  double t = 0.0;
  double w2_sq = 0.0;
  double kl = 0.0;
};

// W2^2 and relative entropy between the k-marginal of the interacting system
// and the k-fold product of the limit law at time t, both started from
// N(m0, S0) i.i.d. (so the initial distance is zero).
std::vector<ChaosPoint> exact_chaos_curve(const LinearModelSpec& spec, const Vector& m0,
                                          const Matrix& S0, const std::vector<std::size_t>& Ns,
                                          std::size_t k, double t, double dt_ode = 1e-3);

// Mean after one Euler step of either system (the mean dynamics coincide).
Vector euler_mean_step(const LinearModelSpec& spec, const Vector& mean, double dt);

}  // namespace mfchaos
