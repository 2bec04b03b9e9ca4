#include "mfchaos/dynamics/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace mfchaos {

BlowUp::BlowUp(std::size_t particle, std::size_t step, double t, const std::string& where)
    : std::runtime_error("non-finite state for particle " + std::to_string(particle) + " at step " +
                         std::to_string(step) + " (t = " + std::to_string(t) + ")" +
                         (where.empty() ? "" : " in " + where)),
      particle(particle),
      step(step),
      t(t) {}

Ensemble::Ensemble(std::size_t n, std::size_t d, double time)
    : N(n), dim(d), t(time), states(n * d, 0.0) {}

void Ensemble::check_finite(std::size_t step) const {
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (!std::isfinite(states[k])) throw BlowUp(k / dim, step, t);
  }
}

SegmentEnsemble::SegmentEnsemble(std::size_t N, std::size_t dim, std::size_t lags, double dt,
                                 double t0)
    : N_(N), dim_(dim), lags_(lags), dt_(dt), t_(t0), storage_((lags + 2) * N * dim, 0.0) {
  if (N == 0 || dim == 0) throw std::invalid_argument("ensemble must have particles and dimensions");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  refresh_pointers();
}

SegmentEnsemble::SegmentEnsemble(const SegmentEnsemble& other)
    : N_(other.N_),
      dim_(other.dim_),
      lags_(other.lags_),
      dt_(other.dt_),
      t_(other.t_),
      head_(other.head_),
      initialized_(other.initialized_),
      storage_(other.storage_) {
  refresh_pointers();
}

SegmentEnsemble& SegmentEnsemble::operator=(const SegmentEnsemble& other) {
  if (this != &other) {
    SegmentEnsemble copy(other);
    *this = std::move(copy);
  }
  return *this;
}

SegmentEnsemble SegmentEnsemble::from_points(const Ensemble& points, std::size_t lags, double dt) {
  if (points.states.size() != points.N * points.dim) {
    throw std::invalid_argument("ensemble storage does not match N x dim");
  }
  SegmentEnsemble seg(points.N, points.dim, lags, dt, points.t);
  seg.set_history([&](std::size_t i, double, std::span<double> out) {
    const auto r = points.row(i);
    std::copy(r.begin(), r.end(), out.begin());
  });
  return seg;
}

void SegmentEnsemble::set_history(const HistoryFn& history) {
  for (std::size_t lag = 0; lag <= lags_; ++lag) {
    double* block = const_cast<double*>(pointers_[lag]);
    const double s = -static_cast<double>(lag) * dt_;
    for (std::size_t i = 0; i < N_; ++i) {
      std::span<double> out(block + i * dim_, dim_);
      history(i, s, out);
      for (double v : out) {
        if (!std::isfinite(v)) throw BlowUp(i, 0, t_ + s, "initial history");
      }
    }
  }
  initialized_ = true;
}

std::span<const double> SegmentEnsemble::at(std::size_t i, std::size_t lag) const {
  return {pointers_[lag] + i * dim_, dim_};
}

SegmentView SegmentEnsemble::view(std::size_t i) const {
  return SegmentView(std::span<const double* const>(pointers_), i, dim_, dt_);
}

SegmentSet SegmentEnsemble::segments() const {
  if (!initialized_) throw std::logic_error("segment ensemble used before its history was set");
  return SegmentSet{std::span<const double* const>(pointers_), N_, dim_, dt_};
}

Ensemble SegmentEnsemble::head_ensemble() const {
  Ensemble e(N_, dim_, t_);
  std::copy(pointers_[0], pointers_[0] + N_ * dim_, e.states.begin());
  return e;
}

std::span<double> SegmentEnsemble::spare() {
  const std::size_t slots = lags_ + 2;
  return {slot((head_ + 1) % slots), N_ * dim_};
}

void SegmentEnsemble::commit() {
  head_ = (head_ + 1) % (lags_ + 2);
  t_ += dt_;
  refresh_pointers();
}

void SegmentEnsemble::refresh_pointers() {
  const std::size_t slots = lags_ + 2;
  pointers_.resize(lags_ + 1);
  // Lag l lives l slots behind the head.
  for (std::size_t l = 0; l <= lags_; ++l) pointers_[l] = slot((head_ + slots - l) % slots);
}

double segment_sup_norm(const SegmentView& segment) {
  double best = 0.0;
  for (std::size_t l = 0; l <= segment.lags(); ++l) {
    double sq = 0.0;
    for (double v : segment.at(l)) sq += v * v;
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

}  // namespace mfchaos
