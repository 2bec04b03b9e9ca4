#pragma once

// Threshold checks for the long-time regimes and random spot-checks of the
// declared regularity constants.
//
// Constants are declared by the model author. The validators compare declared
// constants against the thresholds exactly, and sample random point or
// segment pairs from a box to look for counterexamples to the declared
// inequalities. A spot-check can refute a declaration, never prove it.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "mfchaos/models/model.hpp"

namespace mfchaos {

struct SpotCheckOptions {
  std::size_t samples = 10000;
  double box = 3.0;  // coordinates drawn uniformly from [-box, box]
  std::uint64_t seed = 0x5eed;
  double rel_slack = 1e-8;
  double abs_slack = 1e-12;
  std::size_t measure_size = 8;  // atoms per sampled empirical measure (ellipticity)
};

struct SpotCheck {
  std::string name;
  bool pass = true;
  double worst_ratio = 0.0;  // max over samples of lhs / rhs (0 when rhs vanished)
  std::size_t samples = 0;
  std::size_t violations = 0;
};

struct DissipativeReport {
  double K1 = 0.0;
  double K2 = 0.0;
  bool threshold_pass = false;  // K1 > 8 K2
  double margin = 0.0;          // K1 - 8 K2
  double rate = 0.0;            // (K1 - 8 K2) / 2
  std::vector<SpotCheck> checks;
  bool pass() const;
};

struct DelayReport {
  double sup = 0.0;            // sup_{v in [0, K_b]} v e^{-v r0}
  double threshold_lhs = 0.0;  // 72 K_sigma + 8 K_B
  bool threshold_pass = false;
  double lambda = 0.0;        // (sup - (72 K_sigma + 8 K_B)) / 2
  double lambda_tilde = 0.0;  // sup - (36 K_sigma + 8 K_B)
  double decay_rate = 0.0;    // e^{K_b r0} * lambda
  std::vector<SpotCheck> checks;
  bool pass() const;
};

struct HamiltonianReport {
  double sup = 0.0;            // sup over [0, min(K1, K_A)]
  double threshold_lhs = 0.0;  // 4 K_B + 2 |M|
  bool threshold_pass = false;
  double lambda = 0.0;
  double M_norm = 0.0;
  std::size_t rank = 0;
  bool rank_pass = false;
  double sigma_min_singular = 0.0;
  bool sigma_invertible = false;
  std::vector<SpotCheck> checks;
  bool pass() const;
};

struct FiniteTimeReport {
  std::vector<SpotCheck> checks;
  bool pass() const;
};

// max over v in [0, K] of v e^{-v r0}, in closed form.
double sup_rate(double K, double r0);

// Rank of the controllability matrix [M, AM, ..., A^{m-1} M].
std::size_t kalman_rank(const Matrix& A, const Matrix& M);

// Largest singular value by power iteration on M^T M.
double spectral_norm(const Matrix& M, double rel_tol = 1e-10, std::size_t max_iter = 100000);

DissipativeReport validate_dissipative(const MeanFieldModel& model, const SpotCheckOptions& opts = {});
FiniteTimeReport validate_finite_time(const MeanFieldModel& model, const SpotCheckOptions& opts = {});
DelayReport validate_delay(const DelayModel& model, const SpotCheckOptions& opts = {});
HamiltonianReport validate_hamiltonian(const HamiltonianModel& model, const SpotCheckOptions& opts = {});

// Threshold-only variants for declared constants (no kernels needed).
DissipativeReport dissipative_threshold(double K1, double K2);
DelayReport delay_threshold(double K_b, double r0, double K_sigma, double K_B);
HamiltonianReport hamiltonian_threshold(double K1, double K_A, double r0, double K_B,
                                        const Matrix& A, const Matrix& M, const Matrix& sigma);

void to_json(nlohmann::json& j, const SpotCheck& c);
void to_json(nlohmann::json& j, const DissipativeReport& r);
void to_json(nlohmann::json& j, const DelayReport& r);
void to_json(nlohmann::json& j, const HamiltonianReport& r);
void to_json(nlohmann::json& j, const FiniteTimeReport& r);

}  // namespace mfchaos
