#pragma once

// Scripted scans: N-scaling of the coupling gap, long-time contraction and
// plateau, and the law-of-large-numbers gap.
//
// Every replica owns its seeds (derived from the scan seed, N and the replica
// index), so results do not depend on the thread count. Aggregation runs in
// (N, replica) order after all replicas finish.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mfchaos/dynamics/coupled.hpp"
#include "mfchaos/experiments/fit.hpp"
#include "mfchaos/metrics/gaussian.hpp"
#include "mfchaos/models/model.hpp"
#include "mfchaos/util/parallel.hpp"

namespace mfchaos {

enum class ModelFamily { MeanField, Delay, Hamiltonian };

// A model plus the i.i.d. Gaussian initial law of each particle. Delay and
// kinetic initial segments are constant paths at the sampled point.
struct ModelBundle {
  std::variant<MeanFieldModel, DelayModel, HamiltonianModel> model;
  Vector init_mean;
  Matrix init_cov;

  ModelFamily family() const;
  std::size_t state_dim() const;
  std::shared_ptr<const ParticleSystem> compile(double dt) const;
  // Contraction rate the long-time theorems guarantee for the squared gap;
  // NaN when the model carries no long-time guarantee.
  double theoretical_rate() const;
};

enum class InitialCoupling { Matched, Independent, Offset };
enum class Backend { Auto, Gaussian, ReferenceTabulated, ReferenceDirect };
enum class Statistic { SupGap, GapAt, SegmentGapAt };

const char* to_string(InitialCoupling c);
const char* to_string(Backend b);
const char* to_string(Statistic s);

struct ScanConfig {
  std::vector<std::size_t> N;
  std::size_t k = 1;  // particles averaged; 0 means all N
  double T = 1.0;
  double dt = 1e-2;
  std::vector<double> record_times;
  std::size_t replicas = 2;
  std::uint64_t seed = 1;
  Backend backend = Backend::Auto;
  std::size_t reference_size = 0;  // 0 means 10 * max N
  double table_spacing = 0.02;
  InitialCoupling coupling = InitialCoupling::Matched;
  double offset = 1.0;  // added to every coordinate of the limit initial state
  Statistic statistic = Statistic::SupGap;
  double statistic_time = 0.0;  // for GapAt / SegmentGapAt; must be a record time

  // Throws std::invalid_argument on an unusable configuration.
  void check() const;
};

// Frozen law for `bundle` over [0, config.T] with the configured backend.
std::shared_ptr<const FrozenLaw> build_frozen_law(const ModelBundle& bundle,
                                                  std::shared_ptr<const ParticleSystem> system,
                                                  const ScanConfig& config, ThreadPool* pool);

// A replica diverged. Carries the scan coordinates of the failure.
class ScanBlowUp : public std::runtime_error {
 public:
  ScanBlowUp(std::size_t N, std::size_t replica, std::size_t step, std::size_t particle, const std::string& detail);
  std::size_t N;
  std::size_t replica;
  std::size_t step;
  std::size_t particle;
};

// Replica seeds.
std::uint64_t replica_seed(std::uint64_t seed, std::size_t N, std::size_t replica);

// One synchronous-coupling replica. The initial pair follows config.coupling.
CoupledRun run_replica(const ParticleSystem& system, const ModelBundle& bundle, const FrozenLaw& frozen,
                       const ScanConfig& config, InitialCoupling coupling, std::size_t N,
                       std::size_t replica, const std::vector<double>& record_times);

struct NScanRow {
  std::size_t N = 0;
  McEstimate stat;
  std::vector<McEstimate> gap_at;  // per record time, point gap
  std::vector<McEstimate> segment_gap_at;
};

struct NScanResult {
  std::vector<NScanRow> rows;
  std::vector<double> record_times;
  FitResult fit;  // log stat vs log N
  std::string backend;
};

NScanResult rate_scan_N(const ModelBundle& bundle, const ScanConfig& config, ThreadPool* pool = nullptr);

struct GapSeries {
  std::vector<double> t;
  std::vector<McEstimate> gap;
  std::vector<double> means() const;
};

struct LongtimeRow {
  std::size_t N = 0;
  GapSeries transient;  // independent or offset initials
  GapSeries matched;    // companion run isolating the plateau
  DecayFit decay;
  double plateau_times_N = 0.0;  // sup over the plateau window of matched gap * N
};

struct LongtimeResult {
  std::vector<LongtimeRow> rows;
  double theoretical_rate = 0.0;
  double fitted_rate = 0.0;  // smallest per-N fitted rate
  bool rate_pass = false;    // fitted_rate >= theoretical_rate
  double plateau_ratio = 0.0;  // max / min of plateau_times_N over N
  // "bounded" (ratio <= 2), "unbounded", or "inconclusive" (a plateau was not
  // reached or a fit had too few points).
  std::string verdict;
  std::string backend;
};

LongtimeResult longtime_scan(const ModelBundle& bundle, const ScanConfig& config, ThreadPool* pool = nullptr);

struct LlnSpec {
  std::string name;
  PairFunction h;
  ScalarSampler sampler;
  ConditionalMean conditional_mean;
};

// "bernoulli": h(v, w) = w, Z ~ Bernoulli(1/2).
// "constant": h = 1, Z ~ N(0, 1).
// "product_normal": h(v, w) = v w, Z ~ N(0, 1).
LlnSpec lln_builtin(const std::string& name);

struct LlnRow {
  std::size_t N = 0;
  McEstimate estimate;
  double scaled = 0.0;  // N * estimate
};

struct LlnResult {
  std::vector<LlnRow> rows;
  double flatness = 1.0;  // max / min of N * estimate (1 when all vanish)
};

LlnResult lln_scan(const LlnSpec& spec, const std::vector<std::size_t>& Ns, std::size_t trials,
                   std::uint64_t seed, ThreadPool* pool = nullptr);

}  // namespace mfchaos
