#include "mfchaos/dynamics/frozen_law.hpp"

#include <cmath>
#include <stdexcept>

namespace mfchaos {
namespace {

// Column means taken from a stored vector; tanh averages are not available.
class MeanOnlyMeasure final : public Measure {
 public:
  explicit MeanOnlyMeasure(std::vector<double> means) : means_(std::move(means)) {}
  double column_mean(std::size_t c) const override { return means_[c]; }
  double tanh_mean(std::size_t, double) const override {
    throw std::logic_error("the Gaussian frozen law only supports affine interaction terms");
  }

 private:
  std::vector<double> means_;
};

// Exact empirical measure over segments stored in a flat history.
class StoredMeasure final : public Measure {
 public:
  StoredMeasure(const ParticleSystem& system, std::vector<const double*> slices, std::size_t count)
      : slices_(std::move(slices)),
        emp_(system, SegmentSet{std::span<const double* const>(slices_), count, system.dim(),
                                system.dt()}) {}
  double column_mean(std::size_t c) const override { return emp_.column_mean(c); }
  double tanh_mean(std::size_t j, double shift) const override { return emp_.tanh_mean(j, shift); }
  const SegmentSet* segments() const override { return emp_.segments(); }

 private:
  std::vector<const double*> slices_;
  EmpiricalMeasure emp_;
};

const ParticleSystem& require_system(const std::shared_ptr<const ParticleSystem>& s) {
  if (!s) throw std::invalid_argument("frozen law needs a compiled model");
  return *s;
}

std::vector<double> zero_noise(std::size_t count, std::size_t n) { return std::vector<double>(count * n, 0.0); }

}  // namespace

std::size_t step_count(double T, double dt) {
  if (!(dt > 0.0) || !(T >= 0.0)) throw std::invalid_argument("need T >= 0 and dt > 0");
  const double steps = T / dt;
  const auto n = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(n)) > 1e-9 * std::max(1.0, steps)) {
    throw std::invalid_argument("horizon " + std::to_string(T) + " is not a multiple of dt = " +
                                std::to_string(dt));
  }
  return n;
}

std::shared_ptr<const Measure> FrozenLaw::at(std::size_t step) const {
  if (step > steps_) {
    throw std::out_of_range("frozen law time mismatch: step " + std::to_string(step) +
                            " requested, law covers steps 0.." + std::to_string(steps_));
  }
  return measure(step);
}

void FrozenLaw::require_compatible(const ParticleSystem& system, std::size_t steps_needed) const {
  if (system.layout() != system_->layout()) {
    throw std::invalid_argument("frozen law was built for a different model or time step");
  }
  if (steps_needed > steps_) {
    throw std::out_of_range("frozen law time mismatch: covers " + std::to_string(steps_) +
                            " steps, run needs " + std::to_string(steps_needed));
  }
}

GaussianFrozenLaw::GaussianFrozenLaw(std::shared_ptr<const ParticleSystem> system,
                                     const Vector& mean0, double T)
    : FrozenLaw(system, step_count(T, require_system(system).dt())) {
  const ParticleSystem& sys = *system_;
  if (!sys.local_is_affine() || !sys.law_enters_linearly()) {
    throw std::invalid_argument(
        "the Gaussian frozen law needs an affine local drift and affine interaction terms");
  }
  if (static_cast<std::size_t>(mean0.size()) != sys.dim()) {
    throw std::invalid_argument("initial mean has the wrong dimension");
  }
  // For affine kernels E field(X) = field(E X), so the mean path is a single
  // noiseless particle interacting with itself.
  Ensemble start(1, sys.dim());
  for (std::size_t k = 0; k < sys.dim(); ++k) start.states[k] = mean0(static_cast<Eigen::Index>(k));
  SegmentEnsemble path = sys.make_ensemble(start);
  const auto noise = zero_noise(1, sys.noise_dim());
  for (std::size_t s = 0; s <= steps_; ++s) {
    const EmpiricalMeasure emp(sys, path.segments());
    std::vector<double> cm(sys.columns().size());
    for (std::size_t c = 0; c < cm.size(); ++c) cm[c] = emp.column_mean(c);
    measures_.push_back(std::make_shared<MeanOnlyMeasure>(std::move(cm)));
    const auto head = path.head(0);
    means_.emplace_back(Eigen::Map<const Vector>(head.data(), static_cast<Eigen::Index>(head.size())));
    if (s < steps_) sys.advance(path, emp, noise, s);
  }
}

std::shared_ptr<const Measure> GaussianFrozenLaw::measure(std::size_t step) const { return measures_[step]; }

ReferenceFrozenLaw::ReferenceFrozenLaw(std::shared_ptr<const ParticleSystem> system,
                                       SegmentEnsemble initial, const rng::NoisePlan& plan, double T,
                                       Mode mode, double table_spacing, ThreadPool* pool)
    : FrozenLaw(system, step_count(T, require_system(system).dt())),
      mode_(mode),
      M_(initial.size()) {
  const ParticleSystem& sys = *system_;
  if (initial.dim() != sys.dim() || initial.lags() != sys.lags()) {
    throw std::invalid_argument("reference ensemble shape does not match the model");
  }
  if (mode == Mode::Tabulated && sys.has_generic_kernels()) {
    throw std::invalid_argument("custom kernels need the direct reference mode");
  }
  const std::size_t block = M_ * sys.dim();
  const std::size_t L = sys.lags();
  if (mode == Mode::Direct) {
    history_.resize((L + steps_ + 1) * block);
    // Oldest lag first.
    for (std::size_t l = 0; l <= L; ++l) {
      const double* src = initial.segments().slices[L - l];
      std::copy(src, src + block, history_.begin() + static_cast<std::ptrdiff_t>(l * block));
    }
  }
  for (std::size_t s = 0; s <= steps_; ++s) {
    const EmpiricalMeasure emp(sys, initial.segments());
    std::shared_ptr<const Measure> law;
    if (mode == Mode::Tabulated) {
      auto tab = std::make_shared<TabulatedMeasure>(sys, emp, table_spacing);
      tables_.push_back(tab);
      law = tab;
    }
    if (s == steps_) break;
    const auto inc = plan.increments(M_, sys.noise_dim(), s, sys.dt());
    try {
      sys.advance(initial, law ? *law : static_cast<const Measure&>(emp), inc, s, pool);
    } catch (const BlowUp& e) {
      throw BlowUp(e.particle, e.step, e.t, "reference ensemble");
    }
    if (mode == Mode::Direct) {
      const double* head = initial.segments().slices[0];
      std::copy(head, head + block, history_.begin() + static_cast<std::ptrdiff_t>((L + s + 1) * block));
    }
  }
}

std::string ReferenceFrozenLaw::backend() const {
  return mode_ == Mode::Tabulated ? "reference_tabulated" : "reference_direct";
}

std::shared_ptr<const Measure> ReferenceFrozenLaw::measure(std::size_t step) const {
  if (mode_ == Mode::Tabulated) return tables_[step];
  const ParticleSystem& sys = *system_;
  const std::size_t L = sys.lags();
  const std::size_t block = M_ * sys.dim();
  std::vector<const double*> slices(L + 1);
  for (std::size_t l = 0; l <= L; ++l) slices[l] = history_.data() + (step + L - l) * block;
  return std::make_shared<StoredMeasure>(sys, std::move(slices), M_);
}

double ReferenceFrozenLaw::column_mean(std::size_t step, std::size_t column) const {
  return at(step)->column_mean(column);
}

Ensemble sample_gaussian(const Vector& mean, const Matrix& cov, std::size_t N, std::uint64_t seed) {
  const auto D = mean.size();
  if (cov.rows() != D || cov.cols() != D) throw std::invalid_argument("initial covariance has the wrong shape");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-10) throw std::invalid_argument("initial covariance is not PSD");
  const Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Ensemble out(N, static_cast<std::size_t>(D));
  Vector z(D);
  for (std::size_t i = 0; i < N; ++i) {
    const rng::CounterStream stream(seed, i);
    for (Eigen::Index k = 0; k < D; k += 2) {
      const auto pair = stream.normals(static_cast<std::uint64_t>(k / 2));
      z(k) = pair[0];
      if (k + 1 < D) z(k + 1) = pair[1];
    }
    const Vector x = mean + root * z;
    for (Eigen::Index k = 0; k < D; ++k) out.states[i * static_cast<std::size_t>(D) + static_cast<std::size_t>(k)] = x(k);
  }
  return out;
}

}  // namespace mfchaos
