#pragma once

// Single Euler-Maruyama steps for each model family and the synchronous
// coupling of an interacting system with limit copies.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mfchaos/dynamics/frozen_law.hpp"
#include "mfchaos/dynamics/system.hpp"
#include "mfchaos/rng/philox.hpp"

namespace mfchaos {

struct Fields {
  Vector drift;
  Matrix diffusion;  // d x n
};

// Drift and diffusion of particle i against the empirical measure of the
// whole ensemble (self term included), evaluated straight from the model's
// callables. Throws BlowUp on a non-finite result.
Fields interaction_fields(const Ensemble& ens, const MeanFieldModel& model, std::size_t i);

// One step of the interacting system; increments are N x n.
void em_step_interacting(Ensemble& ens, const MeanFieldModel& model, double dt,
                         std::span<const double> increments);
// One step of the limit copies against a frozen law built for the same model
// and dt. The ensemble time selects the frozen-law step.
void em_step_limit(Ensemble& ens, const MeanFieldModel& model, const FrozenLaw& frozen, double dt,
                   std::span<const double> increments);
// Delay and kinetic steps: interacting when frozen is null, limit otherwise.
void em_step_delay(SegmentEnsemble& ens, const DelayModel& model, std::span<const double> increments,
                   const FrozenLaw* frozen = nullptr);
void em_step_hamiltonian(SegmentEnsemble& ens, const HamiltonianModel& model,
                         std::span<const double> increments, const FrozenLaw* frozen = nullptr);

struct CoupledOptions {
  double T = 1.0;
  // Grid times at which per-particle gaps are stored.
  std::vector<double> record_times;
  // Also store squared segment sup-norm gaps at record times.
  bool segment_gaps = false;
  std::vector<double> snapshot_times;
  ThreadPool* pool = nullptr;
};

struct GapRecord {
  double t = 0.0;
  std::vector<double> gap;          // |X^{i,N}_t - X^i_t|^2 per particle
  std::vector<double> segment_gap;  // grid sup over the segment of the same
};

struct Snapshot {
  double t = 0.0;
  Ensemble interacting;
  Ensemble limit;
};

struct CoupledRun {
  SegmentEnsemble interacting;
  SegmentEnsemble limit;
  std::vector<double> sup_gap;  // per particle, max over grid times in [0, T]
  std::vector<GapRecord> records;
  std::vector<Snapshot> snapshots;

  // Averages over particles 0..k-1.
  double mean_sup_gap(std::size_t k) const;
  double mean_gap(std::size_t record, std::size_t k, bool segment = false) const;
};

// Advances both systems with the same increments, particle i <-> i. The
// interacting side sees its own empirical measure, the limit side the frozen
// law.
CoupledRun run_coupled(const ParticleSystem& system, SegmentEnsemble interacting,
                       SegmentEnsemble limit, const rng::NoisePlan& plan, const FrozenLaw& frozen,
                       const CoupledOptions& options);

}  // namespace mfchaos
