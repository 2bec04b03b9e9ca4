#pragma once

// Particle states. Every ensemble is stored as a segment ensemble: a ring of
// L + 1 grid slices (lag 0 = current state) plus one spare slice that receives
// the next state, so a step never overwrites data it still reads. Mean-field
// models simply use L = 0.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfchaos/models/model.hpp"

namespace mfchaos {

// A non-finite state. Carries the offending particle and step.
class BlowUp : public std::runtime_error {
 public:
  BlowUp(std::size_t particle, std::size_t step, double t, const std::string& where = {});
  std::size_t particle;
  std::size_t step;
  double t;
};

// N x dim row-major states at time t.
struct Ensemble {
  std::size_t N = 0;
  std::size_t dim = 0;
  double t = 0.0;
  std::vector<double> states;

  Ensemble() = default;
  Ensemble(std::size_t n, std::size_t d, double time = 0.0);
  std::span<double> row(std::size_t i) { return {states.data() + i * dim, dim}; }
  std::span<const double> row(std::size_t i) const { return {states.data() + i * dim, dim}; }
  // Throws BlowUp on the first non-finite entry.
  void check_finite(std::size_t step) const;
};

// Read-only view of N segments: slices[l] points at the N x dim block for lag l.
struct SegmentSet {
  std::span<const double* const> slices;
  std::size_t count = 0;
  std::size_t dim = 0;
  double dt = 0.0;

  SegmentView view(std::size_t i) const { return SegmentView(slices, i, dim, dt); }
};

// history(i, s, out) with s in [-r0, 0].
using HistoryFn = std::function<void(std::size_t i, double s, std::span<double> out)>;

class SegmentEnsemble {
 public:
  SegmentEnsemble() = default;
  // Starts uninitialised; call set_history or use from_points.
  SegmentEnsemble(std::size_t N, std::size_t dim, std::size_t lags, double dt, double t0 = 0.0);
  // Constant-in-time extension of the given points over [-L dt, 0].
  static SegmentEnsemble from_points(const Ensemble& points, std::size_t lags, double dt);

  // The lag table points into storage_, so copies must rebuild it.
  SegmentEnsemble(const SegmentEnsemble& other);
  SegmentEnsemble& operator=(const SegmentEnsemble& other);
  SegmentEnsemble(SegmentEnsemble&&) noexcept = default;
  SegmentEnsemble& operator=(SegmentEnsemble&&) noexcept = default;

  void set_history(const HistoryFn& history);
  bool initialized() const { return initialized_; }

  std::size_t size() const { return N_; }
  std::size_t dim() const { return dim_; }
  std::size_t lags() const { return lags_; }
  double dt() const { return dt_; }
  double t() const { return t_; }

  std::span<const double> at(std::size_t i, std::size_t lag) const;
  std::span<const double> head(std::size_t i) const { return at(i, 0); }
  SegmentView view(std::size_t i) const;
  SegmentSet segments() const;
  Ensemble head_ensemble() const;

  // Block that will become the next head. Valid until commit().
  std::span<double> spare();
  // Rotates the ring so the spare block becomes lag 0 and advances t by dt.
  void commit();

 private:
  double* slot(std::size_t k) { return storage_.data() + k * N_ * dim_; }
  const double* slot(std::size_t k) const { return storage_.data() + k * N_ * dim_; }
  void refresh_pointers();

  std::size_t N_ = 0;
  std::size_t dim_ = 0;
  std::size_t lags_ = 0;
  double dt_ = 0.0;
  double t_ = 0.0;
  std::size_t head_ = 0;  // slot holding lag 0
  bool initialized_ = false;
  std::vector<double> storage_;  // (lags + 2) slots
  std::vector<const double*> pointers_;  // lag order, lags + 1 entries
};

// Grid sup of the Euclidean norm over the L + 1 points of one segment.
double segment_sup_norm(const SegmentView& segment);

}  // namespace mfchaos
