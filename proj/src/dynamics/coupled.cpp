#include "mfchaos/dynamics/coupled.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfchaos {
namespace {

std::size_t step_of(double t, double dt) {
  const double s = t / dt;
  const auto k = static_cast<std::size_t>(std::llround(s));
  if (s < -1e-9 || std::abs(s - static_cast<double>(k)) > 1e-9 * std::max(1.0, s)) {
    throw std::invalid_argument("frozen law time mismatch: t = " + std::to_string(t) +
                                " is not on the dt grid");
  }
  return k;
}

std::vector<std::size_t> grid_steps(const std::vector<double>& times, double dt, std::size_t steps) {
  std::vector<std::size_t> out;
  for (double t : times) {
    const std::size_t s = step_of(t, dt);
    if (s > steps) throw std::invalid_argument("record time " + std::to_string(t) + " lies beyond T");
    out.push_back(s);
  }
  return out;
}

void step_segment(const ParticleSystem& sys, SegmentEnsemble& ens, std::span<const double> increments,
                  const FrozenLaw* frozen) {
  const std::size_t step = step_of(ens.t(), sys.dt());
  if (frozen) {
    frozen->require_compatible(sys, step);
    sys.advance(ens, *frozen->at(step), increments, step);
  } else {
    const EmpiricalMeasure emp(sys, ens.segments());
    sys.advance(ens, emp, increments, step);
  }
}

void step_points(const ParticleSystem& sys, Ensemble& ens, std::span<const double> increments,
                 const FrozenLaw* frozen) {
  SegmentEnsemble seg = sys.make_ensemble(ens);
  step_segment(sys, seg, increments, frozen);
  ens = seg.head_ensemble();
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

Fields interaction_fields(const Ensemble& ens, const MeanFieldModel& model, std::size_t i) {
  if (i >= ens.N) throw std::out_of_range("particle index out of range");
  const auto d = static_cast<Eigen::Index>(model.d);
  const auto n = static_cast<Eigen::Index>(model.n);
  Fields f{Vector::Zero(d), Matrix::Zero(d, n)};
  std::vector<double> b(model.d), s(model.d * model.n);
  for (std::size_t m = 0; m < ens.N; ++m) {
    model.drift.b1(ens.t, ens.row(i), ens.row(m), b);
    model.diffusion.sigma_tilde(ens.t, ens.row(i), ens.row(m), s);
    for (Eigen::Index r = 0; r < d; ++r) {
      f.drift(r) += b[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < n; ++c) f.diffusion(r, c) += s[static_cast<std::size_t>(r * n + c)];
    }
  }
  const double inv = 1.0 / static_cast<double>(ens.N);
  f.drift *= inv;
  f.diffusion *= inv;
  model.drift.b0(ens.t, ens.row(i), b);
  for (Eigen::Index r = 0; r < d; ++r) f.drift(r) += b[static_cast<std::size_t>(r)];
  if (!f.drift.allFinite() || !f.diffusion.allFinite()) throw BlowUp(i, 0, ens.t, "interaction fields");
  return f;
}

void em_step_interacting(Ensemble& ens, const MeanFieldModel& model, double dt,
                         std::span<const double> increments) {
  const auto sys = ParticleSystem::compile(model, dt);
  step_points(*sys, ens, increments, nullptr);
}

void em_step_limit(Ensemble& ens, const MeanFieldModel& model, const FrozenLaw& frozen, double dt,
                   std::span<const double> increments) {
  const auto sys = ParticleSystem::compile(model, dt);
  step_points(*sys, ens, increments, &frozen);
}

void em_step_delay(SegmentEnsemble& ens, const DelayModel& model, std::span<const double> increments,
                   const FrozenLaw* frozen) {
  if (!ens.initialized()) throw std::logic_error("delay step on an uninitialized history");
  const auto sys = ParticleSystem::compile(model, ens.dt());
  step_segment(*sys, ens, increments, frozen);
}

void em_step_hamiltonian(SegmentEnsemble& ens, const HamiltonianModel& model,
                         std::span<const double> increments, const FrozenLaw* frozen) {
  if (!ens.initialized()) throw std::logic_error("kinetic step on an uninitialized history");
  const auto sys = ParticleSystem::compile(model, ens.dt());
  step_segment(*sys, ens, increments, frozen);
}

double CoupledRun::mean_sup_gap(std::size_t k) const {
  if (k == 0 || k > sup_gap.size()) throw std::invalid_argument("k must be in 1..N");
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += sup_gap[i];
  return s / static_cast<double>(k);
}

double CoupledRun::mean_gap(std::size_t record, std::size_t k, bool segment) const {
  const auto& v = segment ? records.at(record).segment_gap : records.at(record).gap;
  if (k == 0 || k > v.size()) throw std::invalid_argument("k must be in 1..N (segment gaps recorded?)");
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s / static_cast<double>(k);
}

CoupledRun run_coupled(const ParticleSystem& system, SegmentEnsemble interacting,
                       SegmentEnsemble limit, const rng::NoisePlan& plan, const FrozenLaw& frozen,
                       const CoupledOptions& options) {
  const double dt = system.dt();
  const std::size_t N = interacting.size();
  if (limit.size() != N) throw std::invalid_argument("coupled systems need equal N");
  if (!interacting.initialized() || !limit.initialized()) {
    throw std::logic_error("coupled run started from an uninitialized history");
  }
  const std::size_t steps = step_count(options.T, dt);
  frozen.require_compatible(system, steps);
  const auto record_steps = grid_steps(options.record_times, dt, steps);
  const auto snapshot_steps = grid_steps(options.snapshot_times, dt, steps);

  CoupledRun run{std::move(interacting), std::move(limit), std::vector<double>(N, 0.0), {}, {}};
  const std::size_t L = system.lags();

  auto observe = [&](std::size_t s) {
    for (std::size_t i = 0; i < N; ++i) {
      run.sup_gap[i] = std::max(run.sup_gap[i], sq_dist(run.interacting.head(i), run.limit.head(i)));
    }
    for (std::size_t r = 0; r < record_steps.size(); ++r) {
      if (record_steps[r] != s) continue;
      GapRecord rec;
      rec.t = run.interacting.t();
      rec.gap.resize(N);
      for (std::size_t i = 0; i < N; ++i) rec.gap[i] = sq_dist(run.interacting.head(i), run.limit.head(i));
      if (options.segment_gaps) {
        rec.segment_gap.assign(N, 0.0);
        for (std::size_t i = 0; i < N; ++i)
          for (std::size_t l = 0; l <= L; ++l)
            rec.segment_gap[i] = std::max(rec.segment_gap[i],
                                          sq_dist(run.interacting.at(i, l), run.limit.at(i, l)));
      }
      run.records.push_back(std::move(rec));
    }
    for (std::size_t k : snapshot_steps) {
      if (k == s) run.snapshots.push_back({run.interacting.t(), run.interacting.head_ensemble(), run.limit.head_ensemble()});
    }
  };

  observe(0);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto inc = plan.increments(N, system.noise_dim(), s, dt);
    {
      const EmpiricalMeasure emp(system, run.interacting.segments());
      try {
        system.advance(run.interacting, emp, inc, s, options.pool);
      } catch (const BlowUp& e) {
        throw BlowUp(e.particle, e.step, e.t, "interacting system");
      }
    }
    try {
      system.advance(run.limit, *frozen.at(s), inc, s, options.pool);
    } catch (const BlowUp& e) {
      throw BlowUp(e.particle, e.step, e.t, "limit system");
    }
    observe(s + 1);
  }
  return run;
}

}  // namespace mfchaos
