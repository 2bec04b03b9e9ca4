#include "mfchaos/dynamics/system.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mfchaos/simd/kernels.hpp"

namespace mfchaos {
namespace {

// Bound on |2 a y| and |2 b| for the exponential form of the tanh sums; the
// product of two such exponentials stays finite.
constexpr double kMaxExponent = 300.0;


std::size_t grid_steps(double lag, double dt, std::size_t horizon, const char* what) {
  if (lag == 0.0) return 0;
  const double steps = lag / dt;
  const auto idx = static_cast<std::size_t>(std::llround(steps));
  if (std::abs(steps - static_cast<double>(idx)) > 1e-9 * std::max(1.0, steps)) {
    throw std::invalid_argument(std::string(what) + ": lag " + std::to_string(lag) +
                                " is not a multiple of dt = " + std::to_string(dt));
  }
  if (idx > horizon) {
    throw std::invalid_argument(std::string(what) + ": lag " + std::to_string(lag) +
                                " exceeds the delay horizon");
  }
  return idx;
}

std::size_t horizon_steps(double r0, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (r0 < 0.0) throw std::invalid_argument("delay horizon must be nonnegative");
  return grid_steps(r0, dt, static_cast<std::size_t>(-1), "delay horizon");
}

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

std::size_t ParticleSystem::column_index(Column c) {
  for (std::size_t k = 0; k < columns_.size(); ++k)
    if (columns_[k] == c) return k;
  columns_.push_back(c);
  return columns_.size() - 1;
}

void ParticleSystem::add_kernel(const PairKernel& k, std::size_t row_offset,
                                std::size_t target_base, std::size_t cols) {
  for (std::size_t r = 0; r < k.rows; ++r)
    for (std::size_t c = 0; c < k.cols; ++c)
      if (k.constant.size()) {
        constant_(static_cast<Eigen::Index>(target_base + (row_offset + r) * cols + c)) +=
            k.constant(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
  for (const auto& t : k.terms) {
    CompiledTerm ct;
    ct.form = t.form;
    ct.weight = t.weight;
    ct.target = target_base + (row_offset + t.row) * cols + t.col;
    ct.coef_y = t.coef_y;
    ct.column = column_index({t.src_y, grid_steps(t.lag_y, dt_, L_, "kernel")});
    ct.coef_x = t.coef_x;
    ct.own = {t.src_x, grid_steps(t.lag_x, dt_, L_, "kernel")};
    ct.offset = t.offset;
    terms_.push_back(ct);
  }
}

void ParticleSystem::finish() {
  tanh_terms_.clear();
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    if (terms_[k].form == PairTerm::Form::Tanh) {
      terms_[k].tanh_slot = tanh_terms_.size();
      tanh_terms_.push_back(k);
    }
  }
  layout_ = "D=" + std::to_string(D_) + ";n=" + std::to_string(n_) + ";L=" + std::to_string(L_) +
            ";dt=" + hex(dt_) + ";cols=";
  for (const auto& c : columns_) layout_ += std::to_string(c.src) + "@" + std::to_string(c.lag) + ",";
  layout_ += ";terms=";
  for (const auto& t : terms_) {
    layout_ += (t.form == PairTerm::Form::Tanh ? "T" : "A") + std::to_string(t.column) + ":" +
               hex(t.coef_y) + ",";
  }
  layout_ += drift_generic_ ? ";gd" : "";
  layout_ += diffusion_generic_ ? ";gs" : "";
}

bool ParticleSystem::law_enters_linearly() const { return tanh_terms_.empty() && !has_generic_kernels(); }

std::shared_ptr<const ParticleSystem> ParticleSystem::compile(const MeanFieldModel& model, double dt) {
  model.check();
  std::shared_ptr<ParticleSystem> s(new ParticleSystem());
  s->D_ = model.d;
  s->n_ = model.n;
  s->L_ = horizon_steps(0.0, dt);
  s->dt_ = dt;
  s->constant_ = Vector::Zero(static_cast<Eigen::Index>(s->field_size()));
  s->local_affine_ = model.drift.b0_affine;
  s->local_ = model.drift.b0;
  if (model.drift.b1_structure) {
    s->add_kernel(*model.drift.b1_structure, 0, 0, 1);
  } else {
    s->drift_generic_ = [b1 = model.drift.b1](double t, const SegmentView& xi, const SegmentView& eta,
                                              std::span<double> out) { b1(t, xi.head(), eta.head(), out); };
  }
  if (model.diffusion.structure) {
    s->add_kernel(*model.diffusion.structure, 0, s->D_, s->n_);
  } else {
    s->diffusion_generic_ = [sg = model.diffusion.sigma_tilde](double t, const SegmentView& xi,
                                                               const SegmentView& eta,
                                                               std::span<double> out) {
      sg(t, xi.head(), eta.head(), out);
    };
  }
  s->finish();
  return s;
}

std::shared_ptr<const ParticleSystem> ParticleSystem::compile(const DelayModel& model, double dt) {
  model.check();
  std::shared_ptr<ParticleSystem> s(new ParticleSystem());
  s->D_ = model.d;
  s->n_ = model.n;
  s->L_ = horizon_steps(model.r0, dt);
  s->dt_ = dt;
  s->constant_ = Vector::Zero(static_cast<Eigen::Index>(s->field_size()));
  s->local_affine_ = model.b_affine;
  s->local_ = model.b;
  if (model.B_structure) {
    s->add_kernel(*model.B_structure, 0, 0, 1);
  } else {
    s->drift_generic_ = model.B_tilde;
  }
  if (model.sigma_structure) {
    s->add_kernel(*model.sigma_structure, 0, s->D_, s->n_);
  } else {
    s->diffusion_generic_ = model.sigma_tilde;
  }
  s->finish();
  return s;
}

std::shared_ptr<const ParticleSystem> ParticleSystem::compile(const HamiltonianModel& model,
                                                              double dt) {
  model.check();
  std::shared_ptr<ParticleSystem> s(new ParticleSystem());
  const auto m = static_cast<Eigen::Index>(model.m);
  const auto d = static_cast<Eigen::Index>(model.d);
  s->D_ = model.m + model.d;
  s->n_ = model.d;
  s->L_ = horizon_steps(model.r0, dt);
  s->dt_ = dt;
  s->constant_ = Vector::Zero(static_cast<Eigen::Index>(s->field_size()));

  // Position block: A x1 + M x2. Momentum block: b(x2).
  if (model.b_affine) {
    AffineMap local{Matrix::Zero(m + d, m + d), Vector::Zero(m + d)};
    local.linear.topLeftCorner(m, m) = model.A;
    local.linear.topRightCorner(m, d) = model.M;
    local.linear.bottomRightCorner(d, d) = model.b_affine->linear;
    local.offset.tail(d) = model.b_affine->offset;
    s->local_affine_ = local;
  }
  s->local_ = [A = model.A, M = model.M, b = model.b, m, d](double t, std::span<const double> x,
                                                           std::span<double> out) {
    Eigen::Map<const Vector> xv(x.data(), m + d);
    Eigen::Map<Vector> ov(out.data(), m + d);
    ov.head(m) = A * xv.head(m) + M * xv.tail(d);
    b(t, x.subspan(static_cast<std::size_t>(m)), out.subspan(static_cast<std::size_t>(m)));
  };
  if (model.B_structure) {
    s->add_kernel(*model.B_structure, model.m, 0, 1);
  } else {
    s->drift_generic_ = [B = model.B_tilde, m = model.m](double t, const SegmentView& xi,
                                                         const SegmentView& eta,
                                                         std::span<double> out) {
      std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
      B(t, xi, eta, out.subspan(m));
    };
  }
  // Noise enters the momentum rows only.
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      s->constant_(static_cast<Eigen::Index>(s->D_) + (m + r) * d + c) = model.sigma(r, c);
  s->finish();
  return s;
}

void ParticleSystem::field(const SegmentSet& own, std::size_t i, const Measure& law, double t,
                           std::span<double> out, std::span<double> scratch) const {
  const std::size_t F = field_size();
  for (std::size_t k = 0; k < F; ++k) out[k] = constant_(static_cast<Eigen::Index>(k));
  const double* head = own.slices[0] + i * D_;

  if (local_affine_) {
    const Matrix& A = local_affine_->linear;
    for (std::size_t r = 0; r < D_; ++r) {
      double acc = local_affine_->offset(static_cast<Eigen::Index>(r));
      for (std::size_t c = 0; c < D_; ++c) acc += A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * head[c];
      out[r] += acc;
    }
  } else {
    local_(t, {head, D_}, scratch.subspan(0, D_));
    for (std::size_t r = 0; r < D_; ++r) out[r] += scratch[r];
  }

  for (const auto& term : terms_) {
    const double x = own.slices[term.own.lag][i * D_ + term.own.src];
    const double shift = term.coef_x * x + term.offset;
    const double v = term.form == PairTerm::Form::Linear
                         ? term.coef_y * law.column_mean(term.column) + shift
                         : law.tanh_mean(term.tanh_slot, shift);
    out[term.target] += term.weight * v;
  }

  if (has_generic_kernels()) {
    const SegmentSet* segs = law.segments();
    if (!segs) throw std::logic_error("a custom interaction kernel needs a sampled law");
    const SegmentView xi = own.view(i);
    const double inv = 1.0 / static_cast<double>(segs->count);
    auto average = [&](const SegmentPairMap& kernel, std::size_t base, std::size_t size) {
      std::span<double> tmp = scratch.subspan(0, size);
      std::span<double> acc = scratch.subspan(size, size);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t m = 0; m < segs->count; ++m) {
        kernel(t, xi, segs->view(m), tmp);
        for (std::size_t k = 0; k < size; ++k) acc[k] += tmp[k];
      }
      for (std::size_t k = 0; k < size; ++k) out[base + k] += acc[k] * inv;
    };
    if (drift_generic_) average(drift_generic_, 0, D_);
    if (diffusion_generic_) average(diffusion_generic_, D_, D_ * n_);
  }
}

void ParticleSystem::advance(SegmentEnsemble& ens, const Measure& law,
                             std::span<const double> increments, std::size_t step,
                             ThreadPool* pool) const {
  if (ens.dim() != D_ || ens.lags() != L_) {
    throw std::invalid_argument("ensemble shape does not match the compiled model");
  }
  if (std::abs(ens.dt() - dt_) > 1e-12 * dt_) throw std::invalid_argument("ensemble dt differs from model dt");
  const std::size_t N = ens.size();
  if (increments.size() != N * n_) throw std::invalid_argument("noise increments must be N x n");
  const SegmentSet own = ens.segments();
  const double t = ens.t();
  std::span<double> next = ens.spare();
  const std::size_t F = field_size();
  const std::size_t scratch_size = 2 * std::max<std::size_t>(F, 1);

  auto body = [&](std::size_t begin, std::size_t end) {
    std::vector<double> f(F), scratch(scratch_size);
    for (std::size_t i = begin; i < end; ++i) {
      field(own, i, law, t, f, scratch);
      const double* head = own.slices[0] + i * D_;
      const double* dw = increments.data() + i * n_;
      double* out = next.data() + i * D_;
      for (std::size_t r = 0; r < D_; ++r) {
        double v = head[r] + dt_ * f[r];
        const double* sig = f.data() + D_ + r * n_;
        for (std::size_t c = 0; c < n_; ++c) v += sig[c] * dw[c];
        out[r] = v;
      }
    }
  };
  if (pool && pool->size() > 1) {
    pool->parallel_for(N, body);
  } else {
    body(0, N);
  }
  for (std::size_t k = 0; k < next.size(); ++k) {
    if (!std::isfinite(next[k])) throw BlowUp(k / D_, step, t + dt_);
  }
  ens.commit();
}

SegmentEnsemble ParticleSystem::make_ensemble(const Ensemble& points) const {
  if (points.dim != D_) throw std::invalid_argument("initial states have the wrong dimension");
  return SegmentEnsemble::from_points(points, L_, dt_);
}

EmpiricalMeasure::EmpiricalMeasure(const ParticleSystem& system, const SegmentSet& segments)
    : system_(&system), segments_(segments) {
  if (segments.count == 0) throw std::invalid_argument("empirical measure of an empty ensemble");
  if (segments.dim != system.dim()) throw std::invalid_argument("measure dimension does not match the model");
  const auto& cols = system.columns();
  values_.resize(cols.size());
  means_.resize(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].lag >= segments.slices.size()) {
      throw std::invalid_argument("measure segments are shorter than the kernel lag");
    }
    const double* block = segments.slices[cols[c].lag];
    auto& v = values_[c];
    v.resize(segments.count);
    double sum = 0.0;
    for (std::size_t m = 0; m < segments.count; ++m) {
      v[m] = block[m * segments.dim + cols[c].src];
      sum += v[m];
    }
    means_[c] = sum / static_cast<double>(segments.count);
  }
  exp_.resize(system.tanh_terms().size());
  for (std::size_t j = 0; j < exp_.size(); ++j) {
    const auto& term = system.terms()[system.tanh_terms()[j]];
    const auto& v = values_[term.column];
    auto& e = exp_[j];
    e.resize(v.size());
    for (std::size_t m = 0; m < v.size(); ++m) {
      const double z = 2.0 * term.coef_y * v[m];
      if (!(std::abs(z) <= kMaxExponent)) {
        e.clear();
        break;
      }
      e[m] = std::exp(z);
    }
  }
}

simd::TanhSums EmpiricalMeasure::tanh_sums(std::size_t j, double shift) const {
  const auto& e = exp_[j];
  if (!e.empty() && std::abs(2.0 * shift) <= kMaxExponent) {
    // tanh = 1 - 2 r and sech^2 = 4 r (1 - r).
    const auto s = simd::logistic_sums(e, std::exp(2.0 * shift));
    return {static_cast<double>(e.size()) - 2.0 * s.value, 4.0 * s.slope};
  }
  const auto& term = system_->terms()[system_->tanh_terms()[j]];
  return simd::tanh_affine_sums(values_[term.column], term.coef_y, shift);
}

double EmpiricalMeasure::tanh_mean(std::size_t j, double shift) const {
  const auto& e = exp_[j];
  const double n = static_cast<double>(segments_.count);
  if (!e.empty() && std::abs(2.0 * shift) <= kMaxExponent) {
    return (n - 2.0 * simd::logistic_sum(e, std::exp(2.0 * shift))) / n;
  }
  const auto& term = system_->terms()[system_->tanh_terms()[j]];
  return simd::tanh_affine_sum(values_[term.column], term.coef_y, shift) / n;
}

std::pair<double, double> EmpiricalMeasure::shift_range(std::size_t j) const {
  const auto& term = system_->terms()[system_->tanh_terms()[j]];
  const double* block = segments_.slices[term.own.lag];
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t m = 0; m < segments_.count; ++m) {
    const double s = term.coef_x * block[m * segments_.dim + term.own.src] + term.offset;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo, hi};
}

TabulatedMeasure::TabulatedMeasure(const ParticleSystem& system, const EmpiricalMeasure& source,
                                   double h) {
  if (!(h > 0.0)) throw std::invalid_argument("table spacing must be positive");
  means_.resize(system.columns().size());
  for (std::size_t c = 0; c < means_.size(); ++c) means_[c] = source.column_mean(c);
  const auto& slots = system.tanh_terms();
  tables_.resize(slots.size());
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const auto& term = system.terms()[slots[j]];
    const auto [lo, hi] = source.shift_range(j);
    // Room for the limit particles, which follow the same law but are not the
    // particles the range was measured on.
    const double pad = 0.5 * (hi - lo) + 2.0;
    Table& tab = tables_[j];
    tab.h = h;
    tab.u0 = lo - pad;
    const auto nodes = static_cast<std::size_t>(std::ceil((hi + pad - tab.u0) / h)) + 1;
    tab.value.resize(nodes);
    tab.slope.resize(nodes);
    const double inv = 1.0 / static_cast<double>(source.column(term.column).size());
    for (std::size_t k = 0; k < nodes; ++k) {
      const auto sums = source.tanh_sums(j, tab.u0 + h * static_cast<double>(k));
      tab.value[k] = sums.value * inv;
      tab.slope[k] = sums.slope * inv;
    }
  }
}

double TabulatedMeasure::tanh_mean(std::size_t j, double shift) const {
  const Table& tab = tables_[j];
  const double pos = (shift - tab.u0) / tab.h;
  const double last = static_cast<double>(tab.value.size() - 1);
  if (!(pos >= 0.0 && pos <= last)) {
    throw std::out_of_range("tabulated law queried at shift " + std::to_string(shift) +
                            " outside [" + std::to_string(tab.u0) + ", " +
                            std::to_string(tab.u0 + last * tab.h) + "]");
  }
  auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= tab.value.size()) k = tab.value.size() - 2;
  const double s = pos - static_cast<double>(k);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * tab.value[k] + (s3 - 2 * s2 + s) * tab.h * tab.slope[k] +
         (-2 * s3 + 3 * s2) * tab.value[k + 1] + (s3 - s2) * tab.h * tab.slope[k + 1];
}

}  // namespace mfchaos
