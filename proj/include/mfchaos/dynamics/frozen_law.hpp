#pragma once

// Stand-ins for the law of the limit equation, precomputed on the time grid
// and shared by every replica that uses them.
//
//  * GaussianFrozenLaw: for models whose law dependence is affine only the
//    mean enters, and it follows the same Euler recursion as the particles.
//  * ReferenceFrozenLaw: an interacting run of M particles with its own
//    independent noise. Tabulated mode keeps per-step tanh tables and column
//    means; the reference itself is advanced against its own tables, so each
//    step costs O(M x table size) instead of O(M^2). Direct mode stores every
//    state and sums exactly, which custom kernels require.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mfchaos/dynamics/system.hpp"
#include "mfchaos/rng/philox.hpp"

namespace mfchaos {

class FrozenLaw {
 public:
  virtual ~FrozenLaw() = default;
  virtual std::string backend() const = 0;

  const ParticleSystem& system() const { return *system_; }
  double dt() const { return system_->dt(); }
  // Measures exist for grid steps 0..steps(), i.e. every time in [0, T].
  std::size_t steps() const { return steps_; }

  // Throws std::out_of_range outside the horizon.
  std::shared_ptr<const Measure> at(std::size_t step) const;
  // Throws when `system` has a different layout or needs more steps.
  void require_compatible(const ParticleSystem& system, std::size_t steps_needed) const;

 protected:
  FrozenLaw(std::shared_ptr<const ParticleSystem> system, std::size_t steps)
      : system_(std::move(system)), steps_(steps) {}
  virtual std::shared_ptr<const Measure> measure(std::size_t step) const = 0;

  std::shared_ptr<const ParticleSystem> system_;
  std::size_t steps_;
};

// Number of grid steps in [0, T]; throws unless T is a multiple of dt.
std::size_t step_count(double T, double dt);

class GaussianFrozenLaw final : public FrozenLaw {
 public:
  // The initial history is the constant extension of `mean0`.
  GaussianFrozenLaw(std::shared_ptr<const ParticleSystem> system, const Vector& mean0, double T);
  std::string backend() const override { return "gaussian"; }
  // Mean state at grid step s.
  const Vector& mean(std::size_t step) const { return means_.at(step); }

 private:
  std::shared_ptr<const Measure> measure(std::size_t step) const override;
  std::vector<Vector> means_;
  std::vector<std::shared_ptr<const Measure>> measures_;
};

class ReferenceFrozenLaw final : public FrozenLaw {
 public:
  enum class Mode { Tabulated, Direct };
  ReferenceFrozenLaw(std::shared_ptr<const ParticleSystem> system, SegmentEnsemble initial,
                     const rng::NoisePlan& plan, double T, Mode mode = Mode::Tabulated,
                     double table_spacing = 0.02, ThreadPool* pool = nullptr);
  std::string backend() const override;
  Mode mode() const { return mode_; }
  std::size_t particles() const { return M_; }
  // Column means of the reference at grid step s.
  double column_mean(std::size_t step, std::size_t column) const;

 private:
  std::shared_ptr<const Measure> measure(std::size_t step) const override;
  Mode mode_;
  std::size_t M_;
  std::vector<std::shared_ptr<const Measure>> tables_;  // tabulated mode
  std::vector<double> history_;                         // direct mode, (L + steps + 1) blocks
};

// N i.i.d. draws from N(mean, cov); particle i uses counter stream i of seed.
Ensemble sample_gaussian(const Vector& mean, const Matrix& cov, std::size_t N, std::uint64_t seed);

}  // namespace mfchaos
