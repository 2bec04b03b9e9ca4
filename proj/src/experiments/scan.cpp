#include "mfchaos/experiments/scan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfchaos/models/validators.hpp"
#include "mfchaos/rng/philox.hpp"

namespace mfchaos {
namespace {

// Tags for derived seeds.
constexpr std::uint64_t kInteractingInit = 1;
constexpr std::uint64_t kLimitInit = 2;
constexpr std::uint64_t kNoise = 3;
constexpr std::uint64_t kReferenceInit = 0x7265660001ull;
constexpr std::uint64_t kReferenceNoise = 0x7265660002ull;

void for_each_index(ThreadPool* pool, std::size_t n, const std::function<void(std::size_t)>& body) {
  if (pool && pool->size() > 1) {
    pool->parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) body(i);
    });
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

std::size_t max_N(const ScanConfig& c) { return *std::max_element(c.N.begin(), c.N.end()); }

std::size_t effective_k(const ScanConfig& c, std::size_t N) { return c.k == 0 ? N : std::min(c.k, N); }

// Record-time index of t; the times were validated against the grid.
std::size_t record_index(const std::vector<double>& times, double t, double dt) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= 1e-9 * dt) return i;
  }
  throw std::invalid_argument("statistic_time must be one of the record times");
}

std::vector<double> default_grid_times(double T, double dt, std::size_t points) {
  const std::size_t steps = step_count(T, dt);
  const std::size_t stride = std::max<std::size_t>(1, steps / points);
  std::vector<double> out;
  for (std::size_t s = 0; s <= steps; s += stride) out.push_back(static_cast<double>(s) * dt);
  if (std::abs(out.back() - T) > 1e-9 * dt) out.push_back(T);
  return out;
}

[[noreturn]] void rethrow_blowup(const BlowUp& e, std::size_t N, std::size_t replica) {
  throw ScanBlowUp(N, replica, e.step, e.particle, e.what());
}

}  // namespace

ScanBlowUp::ScanBlowUp(std::size_t N_, std::size_t replica_, std::size_t step_, std::size_t particle_,
                       const std::string& detail)
    : std::runtime_error("blow-up at N = " + std::to_string(N_) + ", replica " + std::to_string(replica_) +
                         ", step " + std::to_string(step_) + ": " + detail),
      N(N_),
      replica(replica_),
      step(step_),
      particle(particle_) {}

ModelFamily ModelBundle::family() const { return static_cast<ModelFamily>(model.index()); }

std::size_t ModelBundle::state_dim() const {
  switch (family()) {
    case ModelFamily::MeanField: return std::get<MeanFieldModel>(model).d;
    case ModelFamily::Delay: return std::get<DelayModel>(model).d;
    case ModelFamily::Hamiltonian: return std::get<HamiltonianModel>(model).state_dim();
  }
  return 0;
}

std::shared_ptr<const ParticleSystem> ModelBundle::compile(double dt) const {
  return std::visit([dt](const auto& m) { return ParticleSystem::compile(m, dt); }, model);
}

double ModelBundle::theoretical_rate() const {
  switch (family()) {
    case ModelFamily::MeanField: {
      const auto& m = std::get<MeanFieldModel>(model);
      if (m.regime != Regime::Dissipative) return std::numeric_limits<double>::quiet_NaN();
      return dissipative_threshold(m.drift.K1, m.drift.K2).rate;
    }
    case ModelFamily::Delay: {
      const auto& m = std::get<DelayModel>(model);
      return delay_threshold(m.K_b, m.r0, m.K_sigma, m.K_B).decay_rate;
    }
    case ModelFamily::Hamiltonian: {
      const auto& m = std::get<HamiltonianModel>(model);
      const auto r = hamiltonian_threshold(m.K1, m.K_A, m.r0, m.K_B, m.A, m.M, m.sigma);
      return std::exp(std::min(m.K1, m.K_A) * m.r0) * r.lambda;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

const char* to_string(InitialCoupling c) {
  switch (c) {
    case InitialCoupling::Matched: return "matched";
    case InitialCoupling::Independent: return "independent";
    case InitialCoupling::Offset: return "offset";
  }
  return "?";
}

const char* to_string(Backend b) {
  switch (b) {
    case Backend::Auto: return "auto";
    case Backend::Gaussian: return "gaussian";
    case Backend::ReferenceTabulated: return "reference_tabulated";
    case Backend::ReferenceDirect: return "reference_direct";
  }
  return "?";
}

const char* to_string(Statistic s) {
  switch (s) {
    case Statistic::SupGap: return "sup_gap";
    case Statistic::GapAt: return "gap_at";
    case Statistic::SegmentGapAt: return "segment_gap_at";
  }
  return "?";
}

void ScanConfig::check() const {
  if (N.empty()) throw std::invalid_argument("N grid is empty");
  for (std::size_t i = 0; i < N.size(); ++i) {
    if (N[i] == 0) throw std::invalid_argument("N grid entries must be positive");
    if (i > 0 && N[i] <= N[i - 1]) throw std::invalid_argument("N grid must be strictly increasing");
  }
  if (replicas < 2) throw std::invalid_argument("replicas must be at least 2");
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("T and dt must be positive");
  step_count(T, dt);
  for (double t : record_times) {
    if (t < 0.0 || t > T + 1e-9 * dt) throw std::invalid_argument("record times must lie in [0, T]");
  }
  if (statistic != Statistic::SupGap) record_index(record_times, statistic_time, dt);
  if (!(table_spacing > 0.0)) throw std::invalid_argument("table_spacing must be positive");
  if (!std::isfinite(offset)) throw std::invalid_argument("offset must be finite");
}

std::shared_ptr<const FrozenLaw> build_frozen_law(const ModelBundle& bundle,
                                                  std::shared_ptr<const ParticleSystem> system,
                                                  const ScanConfig& config, ThreadPool* pool) {
  Backend b = config.backend;
  if (b == Backend::Auto) {
    if (system->local_is_affine() && system->law_enters_linearly()) {
      b = Backend::Gaussian;
    } else {
      b = system->has_generic_kernels() ? Backend::ReferenceDirect : Backend::ReferenceTabulated;
    }
  }
  if (b == Backend::Gaussian) return std::make_shared<GaussianFrozenLaw>(system, bundle.init_mean, config.T);
  const std::size_t M = config.reference_size ? config.reference_size : 10 * max_N(config);
  const auto init = sample_gaussian(bundle.init_mean, bundle.init_cov, M, rng::derive_seed(config.seed, kReferenceInit));
  const auto mode = b == Backend::ReferenceDirect ? ReferenceFrozenLaw::Mode::Direct : ReferenceFrozenLaw::Mode::Tabulated;
  return std::make_shared<ReferenceFrozenLaw>(system, system->make_ensemble(init),
                                              rng::NoisePlan(rng::derive_seed(config.seed, kReferenceNoise)),
                                              config.T, mode, config.table_spacing, pool);
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t N, std::size_t replica) {
  return rng::derive_seed(rng::derive_seed(seed, N), replica);
}

CoupledRun run_replica(const ParticleSystem& system, const ModelBundle& bundle, const FrozenLaw& frozen,
                       const ScanConfig& config, InitialCoupling coupling, std::size_t N, std::size_t replica,
                       const std::vector<double>& record_times) {
  const std::uint64_t rs = replica_seed(config.seed, N, replica);
  const Ensemble a = sample_gaussian(bundle.init_mean, bundle.init_cov, N, rng::derive_seed(rs, kInteractingInit));
  Ensemble b = coupling == InitialCoupling::Independent
                   ? sample_gaussian(bundle.init_mean, bundle.init_cov, N, rng::derive_seed(rs, kLimitInit))
                   : a;
  if (coupling == InitialCoupling::Offset) {
    for (double& v : b.states) v += config.offset;
  }
  CoupledOptions opt;
  opt.T = config.T;
  opt.record_times = record_times;
  opt.segment_gaps = system.lags() > 0;
  try {
    return run_coupled(system, system.make_ensemble(a), system.make_ensemble(b),
                       rng::NoisePlan(rng::derive_seed(rs, kNoise)), frozen, opt);
  } catch (const BlowUp& e) {
    rethrow_blowup(e, N, replica);
  }
}

NScanResult rate_scan_N(const ModelBundle& bundle, const ScanConfig& config, ThreadPool* pool) {
  config.check();
  const auto system = bundle.compile(config.dt);
  const auto frozen = build_frozen_law(bundle, system, config, pool);
  const std::size_t R = config.replicas, G = config.N.size();
  const auto& times = config.record_times;
  const std::size_t stat_record =
      config.statistic == Statistic::SupGap ? 0 : record_index(times, config.statistic_time, config.dt);
  const bool segments = system->lags() > 0;
  if (config.statistic == Statistic::SegmentGapAt && !segments) {
    throw std::invalid_argument("segment_gap_at needs a model with a delay horizon");
  }

  struct Out {
    double stat = 0.0;
    std::vector<double> gap, seg;
  };
  std::vector<Out> out(G * R);
  for_each_index(pool, G * R, [&](std::size_t task) {
    const std::size_t N = config.N[task / R], r = task % R;
    const auto run = run_replica(*system, bundle, *frozen, config, config.coupling, N, r, times);
    const std::size_t k = effective_k(config, N);
    Out& o = out[task];
    for (std::size_t j = 0; j < times.size(); ++j) {
      o.gap.push_back(run.mean_gap(j, k));
      if (segments) o.seg.push_back(run.mean_gap(j, k, true));
    }
    switch (config.statistic) {
      case Statistic::SupGap: o.stat = run.mean_sup_gap(k); break;
      case Statistic::GapAt: o.stat = o.gap[stat_record]; break;
      case Statistic::SegmentGapAt: o.stat = o.seg[stat_record]; break;
    }
  });

  NScanResult res;
  res.record_times = times;
  res.backend = frozen->backend();
  std::vector<double> xs, ys;
  for (std::size_t g = 0; g < G; ++g) {
    NScanRow row;
    row.N = config.N[g];
    std::vector<double> v(R);
    for (std::size_t r = 0; r < R; ++r) v[r] = out[g * R + r].stat;
    row.stat = summarize(v);
    for (std::size_t j = 0; j < times.size(); ++j) {
      for (std::size_t r = 0; r < R; ++r) v[r] = out[g * R + r].gap[j];
      row.gap_at.push_back(summarize(v));
      if (segments) {
        for (std::size_t r = 0; r < R; ++r) v[r] = out[g * R + r].seg[j];
        row.segment_gap_at.push_back(summarize(v));
      }
    }
    xs.push_back(static_cast<double>(row.N));
    ys.push_back(row.stat.mean);
    res.rows.push_back(std::move(row));
  }
  if (G >= 2) res.fit = fit_power_law(xs, ys);
  return res;
}

std::vector<double> GapSeries::means() const {
  std::vector<double> m;
  for (const auto& g : gap) m.push_back(g.mean);
  return m;
}

LongtimeResult longtime_scan(const ModelBundle& bundle, const ScanConfig& config, ThreadPool* pool) {
  config.check();
  if (config.coupling == InitialCoupling::Matched) {
    throw std::invalid_argument("the long-time scan needs independent or offset initials");
  }
  const auto system = bundle.compile(config.dt);
  const auto frozen = build_frozen_law(bundle, system, config, pool);
  const auto times = config.record_times.empty() ? default_grid_times(config.T, config.dt, 200) : config.record_times;
  const std::size_t R = config.replicas, G = config.N.size(), P = times.size();

  // Task layout: (N, replica, companion) with companion 0 = transient run.
  std::vector<std::vector<double>> gaps(G * R * 2);
  for_each_index(pool, G * R * 2, [&](std::size_t task) {
    const std::size_t N = config.N[task / (2 * R)], r = (task / 2) % R;
    const auto coupling = task % 2 == 0 ? config.coupling : InitialCoupling::Matched;
    const auto run = run_replica(*system, bundle, *frozen, config, coupling, N, r, times);
    const std::size_t k = effective_k(config, N);
    for (std::size_t j = 0; j < P; ++j) gaps[task].push_back(run.mean_gap(j, k));
  });

  LongtimeResult res;
  res.backend = frozen->backend();
  res.theoretical_rate = bundle.theoretical_rate();
  res.fitted_rate = std::numeric_limits<double>::infinity();
  bool conclusive = true;
  const double cut = times.back() - 0.2 * (times.back() - times.front());
  std::vector<double> v(R);
  for (std::size_t g = 0; g < G; ++g) {
    LongtimeRow row;
    row.N = config.N[g];
    for (int companion = 0; companion < 2; ++companion) {
      GapSeries& series = companion == 0 ? row.transient : row.matched;
      series.t = times;
      for (std::size_t j = 0; j < P; ++j) {
        for (std::size_t r = 0; r < R; ++r) v[r] = gaps[(g * R + r) * 2 + companion][j];
        series.gap.push_back(summarize(v));
      }
    }
    row.decay = fit_decay_to_plateau(times, row.transient.means());
    conclusive = conclusive && row.decay.ok && row.decay.plateau_reached;
    if (row.decay.ok) res.fitted_rate = std::min(res.fitted_rate, row.decay.rate);
    for (std::size_t j = 0; j < P; ++j) {
      if (times[j] >= cut) {
        row.plateau_times_N = std::max(row.plateau_times_N, row.matched.gap[j].mean * static_cast<double>(row.N));
      }
    }
    res.rows.push_back(std::move(row));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& row : res.rows) {
    lo = std::min(lo, row.plateau_times_N);
    hi = std::max(hi, row.plateau_times_N);
  }
  res.plateau_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!std::isfinite(res.fitted_rate)) res.fitted_rate = std::numeric_limits<double>::quiet_NaN();
  res.rate_pass = std::isfinite(res.fitted_rate) && std::isfinite(res.theoretical_rate) &&
                  res.fitted_rate >= res.theoretical_rate;
  if (!conclusive) {
    res.verdict = "inconclusive";
  } else {
    res.verdict = res.plateau_ratio <= 2.0 ? "bounded" : "unbounded";
  }
  return res;
}

LlnSpec lln_builtin(const std::string& name) {
  if (name == "bernoulli") {
    return {name, [](double, double w) { return w; }, bernoulli_sampler(0.5), [](double) { return 0.5; }};
  }
  if (name == "constant") {
    return {name, [](double, double) { return 1.0; }, standard_normal_sampler(), [](double) { return 1.0; }};
  }
  if (name == "product_normal") {
    return {name, [](double v, double w) { return v * w; }, standard_normal_sampler(), [](double) { return 0.0; }};
  }
  throw std::invalid_argument("unknown LLN example '" + name + "' (bernoulli, constant, product_normal)");
}

LlnResult lln_scan(const LlnSpec& spec, const std::vector<std::size_t>& Ns, std::size_t trials, std::uint64_t seed,
                   ThreadPool* pool) {
  if (Ns.empty()) throw std::invalid_argument("N grid is empty");
  LlnResult res;
  res.rows.resize(Ns.size());
  for_each_index(pool, Ns.size(), [&](std::size_t g) {
    const std::size_t N = Ns[g];
    const auto est = lln_gap(spec.h, spec.sampler, spec.conditional_mean, N, trials, rng::derive_seed(seed, N));
    res.rows[g] = {N, est, static_cast<double>(N) * est.mean};
  });
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : res.rows) {
    lo = std::min(lo, r.scaled);
    hi = std::max(hi, r.scaled);
  }
  res.flatness = hi == 0.0 ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
  return res;
}

}  // namespace mfchaos
