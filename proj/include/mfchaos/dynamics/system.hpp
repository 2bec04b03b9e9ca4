#pragma once

// A model compiled for the particle engine. The three model families are
// mapped onto one form on a D-dimensional state with L grid lags:
//
//   dX = [local(X(t)) + <K_drift(X_t, .), law>] dt + <K_sigma(X_t, .), law> dW
//
// where <K, law> averages a pair kernel over the second argument. Kernels with
// a structured form are broken into scalar terms; affine terms only need
// column means of the law and tanh terms a one-dimensional tanh sum, which is
// what lets frozen laws be tabulated. Kernels without structure fall back to
// generic callables evaluated on raw segments.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfchaos/dynamics/ensemble.hpp"
#include "mfchaos/models/model.hpp"
#include "mfchaos/simd/kernels.hpp"
#include "mfchaos/util/parallel.hpp"

namespace mfchaos {

// A coordinate of the law side read at a grid lag.
struct Column {
  std::size_t src = 0;
  std::size_t lag = 0;
  bool operator==(const Column&) const = default;
};

// Scalar term writing into field[target]; target < D for drift entries and
// D + r * n + c for diffusion entry (r, c).
struct CompiledTerm {
  PairTerm::Form form = PairTerm::Form::Linear;
  double weight = 1.0;
  std::size_t target = 0;
  double coef_y = 0.0;
  std::size_t column = 0;  // index into ParticleSystem::columns()
  double coef_x = 0.0;
  Column own;              // coordinate of the particle itself
  double offset = 0.0;
  std::size_t tanh_slot = 0;  // index among tanh terms (tanh terms only)
};

// The measure a particle interacts with at one grid step.
class Measure {
 public:
  virtual ~Measure() = default;
  // Average of column c (see ParticleSystem::columns()).
  virtual double column_mean(std::size_t c) const = 0;
  // Average of tanh(coef_y * y + shift) over the law, y the column of tanh term j.
  virtual double tanh_mean(std::size_t j, double shift) const = 0;
  // Raw segments for generic kernels; nullptr when the measure has none.
  virtual const SegmentSet* segments() const { return nullptr; }
};

class ParticleSystem {
 public:
  static std::shared_ptr<const ParticleSystem> compile(const MeanFieldModel& model, double dt);
  static std::shared_ptr<const ParticleSystem> compile(const DelayModel& model, double dt);
  static std::shared_ptr<const ParticleSystem> compile(const HamiltonianModel& model, double dt);

  std::size_t dim() const { return D_; }
  std::size_t noise_dim() const { return n_; }
  std::size_t lags() const { return L_; }
  double dt() const { return dt_; }
  std::size_t field_size() const { return D_ + D_ * n_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<CompiledTerm>& terms() const { return terms_; }
  // Tanh terms in slot order.
  const std::vector<std::size_t>& tanh_terms() const { return tanh_terms_; }
  bool has_generic_kernels() const { return static_cast<bool>(drift_generic_) || static_cast<bool>(diffusion_generic_); }
  bool local_is_affine() const { return local_affine_.has_value(); }
  // True when every law-dependent term is affine (column means suffice).
  bool law_enters_linearly() const;
  // Identifies the column and term layout, so frozen laws built for one
  // compilation can be checked against another.
  const std::string& layout() const { return layout_; }

  // Drift (first D entries) and row-major D x n diffusion of particle i of
  // `own` against `law`, at time t.
  void field(const SegmentSet& own, std::size_t i, const Measure& law, double t,
             std::span<double> out, std::span<double> scratch) const;

  // One Euler-Maruyama step of every particle against `law` (the ensemble
  // itself for the interacting system). increments is N x n row-major.
  // Throws BlowUp naming the first non-finite particle.
  void advance(SegmentEnsemble& ens, const Measure& law, std::span<const double> increments,
               std::size_t step, ThreadPool* pool = nullptr) const;

  SegmentEnsemble make_ensemble(const Ensemble& points) const;

 private:
  ParticleSystem() = default;
  std::size_t column_index(Column c);
  void add_kernel(const PairKernel& k, std::size_t row_offset, std::size_t target_base,
                  std::size_t cols);
  void finish();

  std::size_t D_ = 0;
  std::size_t n_ = 0;
  std::size_t L_ = 0;
  double dt_ = 0.0;
  std::optional<AffineMap> local_affine_;
  PointMap local_;
  Vector constant_;  // field_size entries
  std::vector<Column> columns_;
  std::vector<CompiledTerm> terms_;
  std::vector<std::size_t> tanh_terms_;
  SegmentPairMap drift_generic_;      // output D
  SegmentPairMap diffusion_generic_;  // output D * n
  std::string layout_;
};

// The empirical measure of a set of segments, with exact averages.
class EmpiricalMeasure final : public Measure {
 public:
  EmpiricalMeasure(const ParticleSystem& system, const SegmentSet& segments);
  double column_mean(std::size_t c) const override { return means_[c]; }
  double tanh_mean(std::size_t j, double shift) const override;
  const SegmentSet* segments() const override { return &segments_; }

  // Column values, one per particle.
  std::span<const double> column(std::size_t c) const { return values_[c]; }
  // Range of coef_x * own + offset over the particles for tanh term j.
  std::pair<double, double> shift_range(std::size_t j) const;
  // Sums of tanh(coef_y * y + shift) and of its shift-derivative, unnormalised.
  simd::TanhSums tanh_sums(std::size_t j, double shift) const;

 private:
  const ParticleSystem* system_;
  SegmentSet segments_;
  std::vector<std::vector<double>> values_;
  std::vector<double> means_;
  // Per tanh term, exp(2 coef_y y) of every particle, or empty when some
  // exponent is too large to keep the product with exp(2 shift) finite.
  std::vector<std::vector<double>> exp_;
};

// Piecewise cubic Hermite tables of the tanh averages of an empirical
// measure, on a uniform grid of spacing h over the padded shift range.
// Queries outside the table throw. Column means are kept exactly.
class TabulatedMeasure final : public Measure {
 public:
  TabulatedMeasure(const ParticleSystem& system, const EmpiricalMeasure& source, double h = 0.02);
  double column_mean(std::size_t c) const override { return means_[c]; }
  double tanh_mean(std::size_t j, double shift) const override;

  struct Table {
    double u0 = 0.0;
    double h = 0.0;
    std::vector<double> value;
    std::vector<double> slope;
  };
  const Table& table(std::size_t j) const { return tables_[j]; }

 private:
  std::vector<double> means_;
  std::vector<Table> tables_;
};

}  // namespace mfchaos
