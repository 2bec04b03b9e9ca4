#include "mfchaos/models/validators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mfchaos/rng/philox.hpp"

namespace mfchaos {
namespace {

// Draws coordinates from the box. Every other pair is a small perturbation of
// the first point so that local slopes get probed as well as global ones.
class PairSampler {
 public:
  PairSampler(const SpotCheckOptions& opts, std::uint64_t tag)
      : stream_(opts.seed, tag), box_(opts.box) {}

  double coord() { return box_ * (2.0 * next() - 1.0); }

  void fill(std::span<double> v) {
    for (double& x : v) x = coord();
  }

  void fill_pair(std::size_t sample, std::span<double> a, std::span<double> b) {
    fill(a);
    if (sample % 2 == 0) {
      fill(b);
    } else {
      const double scale = 1e-3 * box_;
      for (std::size_t k = 0; k < a.size(); ++k) b[k] = a[k] + scale * (2.0 * next() - 1.0);
    }
  }

 private:
  double next() {
    if (slot_ == 2) {
      buffer_ = stream_.uniforms(position_++);
      slot_ = 0;
    }
    return buffer_[slot_++];
  }

  rng::CounterStream stream_;
  double box_;
  std::array<double, 2> buffer_{};
  std::size_t slot_ = 2;
  std::uint64_t position_ = 0;
};

double diff_norm2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

double dot_diff(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                std::span<const double> e) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (c[k] - e[k]);
  return s;
}

// Records lhs <= rhs with slack; `scale` normalises the reported excess.
class CheckAccumulator {
 public:
  CheckAccumulator(std::string name, const SpotCheckOptions& opts) : opts_(opts) {
    check_.name = std::move(name);
    check_.worst_ratio = -std::numeric_limits<double>::infinity();
  }

  void add(double lhs, double rhs, double scale) {
    ++check_.samples;
    if (!(lhs <= rhs + opts_.rel_slack * std::abs(rhs) + opts_.abs_slack)) {
      ++check_.violations;
      check_.pass = false;
    }
    if (scale > 0.0) check_.worst_ratio = std::max(check_.worst_ratio, (lhs - rhs) / scale);
  }

  SpotCheck result() {
    if (check_.samples == 0 || !std::isfinite(check_.worst_ratio)) check_.worst_ratio = 0.0;
    return check_;
  }

 private:
  const SpotCheckOptions& opts_;
  SpotCheck check_;
};

SpotCheck dissipativity_check(const char* name, const PointMap& f, double K, std::size_t dim,
                              const SpotCheckOptions& opts, std::uint64_t tag) {
  PairSampler sampler(opts, tag);
  CheckAccumulator acc(name, opts);
  std::vector<double> x(dim), y(dim), fx(dim), fy(dim);
  for (std::size_t s = 0; s < opts.samples; ++s) {
    sampler.fill_pair(s, x, y);
    f(0.0, x, fx);
    f(0.0, y, fy);
    const double dist2 = std::pow(diff_norm2(x, y), 2);
    acc.add(2.0 * dot_diff(fx, fy, x, y), -K * dist2, dist2);
  }
  return acc.result();
}

SpotCheck point_lipschitz_check(const char* name, const PointMap& f, double K, std::size_t dim,
                                const SpotCheckOptions& opts, std::uint64_t tag) {
  PairSampler sampler(opts, tag);
  CheckAccumulator acc(name, opts);
  std::vector<double> x(dim), y(dim), fx(dim), fy(dim);
  for (std::size_t s = 0; s < opts.samples; ++s) {
    sampler.fill_pair(s, x, y);
    f(0.0, x, fx);
    f(0.0, y, fy);
    const double dist = diff_norm2(x, y);
    acc.add(diff_norm2(fx, fy), K * dist, dist);
  }
  return acc.result();
}

// |k(x,y) - k(x',y')| <= K (|x-x'| + |y-y'|), or the squared form
// |k - k'|^2 <= K (|x-x'|^2 + |y-y'|^2) when `squared`.
SpotCheck pair_lipschitz_check(const char* name, const PairMap& k, std::size_t dim,
                               std::size_t out_size, double K, bool squared,
                               const SpotCheckOptions& opts, std::uint64_t tag) {
  PairSampler sampler(opts, tag);
  CheckAccumulator acc(name, opts);
  std::vector<double> x(dim), xs(dim), y(dim), ys(dim), a(out_size), b(out_size);
  for (std::size_t s = 0; s < opts.samples; ++s) {
    sampler.fill_pair(s, x, xs);
    sampler.fill_pair(s, y, ys);
    k(0.0, x, y, a);
    k(0.0, xs, ys, b);
    const double dx = diff_norm2(x, xs);
    const double dy = diff_norm2(y, ys);
    const double gap = diff_norm2(a, b);
    if (squared) {
      const double rhs_scale = dx * dx + dy * dy;
      acc.add(gap * gap, K * rhs_scale, rhs_scale);
    } else {
      acc.add(gap, K * (dx + dy), dx + dy);
    }
  }
  return acc.result();
}

struct SegmentBuffer {
  SegmentBuffer(std::size_t lags, std::size_t dim, double dt)
      : dim(dim), dt(dt), data(lags + 1, std::vector<double>(dim)), ptrs(lags + 1) {
    for (std::size_t l = 0; l <= lags; ++l) ptrs[l] = data[l].data();
  }
  SegmentView view() const { return SegmentView(ptrs, 0, dim, dt); }
  double sup_diff(const SegmentBuffer& other) const {
    double s = 0.0;
    for (std::size_t l = 0; l < data.size(); ++l) s = std::max(s, diff_norm2(data[l], other.data[l]));
    return s;
  }
  std::size_t dim;
  double dt;
  std::vector<std::vector<double>> data;
  std::vector<const double*> ptrs;
};

void fill_segment_pair(PairSampler& sampler, std::size_t s, SegmentBuffer& a, SegmentBuffer& b) {
  for (std::size_t l = 0; l < a.data.size(); ++l) sampler.fill_pair(s, a.data[l], b.data[l]);
}

SpotCheck segment_lipschitz_check(const char* name, const SegmentPairMap& k, std::size_t lags,
                                  std::size_t dim, double dt, std::size_t out_size, double K,
                                  bool squared, const SpotCheckOptions& opts, std::uint64_t tag) {
  PairSampler sampler(opts, tag);
  CheckAccumulator acc(name, opts);
  SegmentBuffer xi(lags, dim, dt), xis(lags, dim, dt), eta(lags, dim, dt), etas(lags, dim, dt);
  std::vector<double> a(out_size), b(out_size);
  for (std::size_t s = 0; s < opts.samples; ++s) {
    fill_segment_pair(sampler, s, xi, xis);
    fill_segment_pair(sampler, s, eta, etas);
    k(0.0, xi.view(), eta.view(), a);
    k(0.0, xis.view(), etas.view(), b);
    const double dx = xi.sup_diff(xis);
    const double dy = eta.sup_diff(etas);
    const double gap = diff_norm2(a, b);
    if (squared) {
      const double rhs_scale = dx * dx + dy * dy;
      acc.add(gap * gap, K * rhs_scale, rhs_scale);
    } else {
      acc.add(gap, K * (dx + dy), dx + dy);
    }
  }
  return acc.result();
}

// Eigenvalues of sigma sigma^* with sigma(x, mu) averaged over sampled atoms.
SpotCheck ellipticity_check(const MeanFieldModel& model, const SpotCheckOptions& opts,
                            std::uint64_t tag) {
  PairSampler sampler(opts, tag);
  CheckAccumulator acc("ellipticity", opts);
  const std::size_t d = model.d, n = model.n;
  const double delta = model.diffusion.delta;
  std::vector<double> x(d), y(d), sig(d * n);
  const std::size_t draws = std::max<std::size_t>(1, opts.samples / 10);
  for (std::size_t s = 0; s < draws; ++s) {
    sampler.fill(x);
    Matrix avg = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < opts.measure_size; ++a) {
      sampler.fill(y);
      model.diffusion.sigma_tilde(0.0, x, y, sig);
      avg += Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          sig.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    }
    avg /= static_cast<double>(opts.measure_size);
    Eigen::SelfAdjointEigenSolver<Matrix> es(avg * avg.transpose());
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    acc.add(1.0 / delta, lo, 1.0);
    acc.add(hi, delta, 1.0);
  }
  return acc.result();
}

bool all_pass(const std::vector<SpotCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const SpotCheck& c) { return c.pass; });
}

}  // namespace

bool DissipativeReport::pass() const { return threshold_pass && all_pass(checks); }
bool DelayReport::pass() const { return threshold_pass && all_pass(checks); }
bool FiniteTimeReport::pass() const { return all_pass(checks); }
bool HamiltonianReport::pass() const {
  return threshold_pass && rank_pass && sigma_invertible && all_pass(checks);
}

double sup_rate(double K, double r0) {
  if (!(K >= 0.0) || !(r0 >= 0.0)) {
    throw std::invalid_argument("sup_rate requires K >= 0 and r0 >= 0");
  }
  if (r0 == 0.0 || K * r0 <= 1.0) return K * std::exp(-K * r0);
  return 1.0 / (std::numbers::e * r0);
}

std::size_t kalman_rank(const Matrix& A, const Matrix& M) {
  const auto m = A.rows();
  if (A.cols() != m || M.rows() != m) {
    throw std::invalid_argument("kalman_rank: A must be m x m and M must have m rows");
  }
  if (m == 0) return 0;
  const auto d = M.cols();
  Matrix ctrl(m, m * d);
  Matrix block = M;
  for (Eigen::Index p = 0; p < m; ++p) {
    ctrl.middleCols(p * d, d) = block;
    block = A * block;
  }
  if (ctrl.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(ctrl);
  const auto& sv = svd.singularValues();
  const double tol = static_cast<double>(std::max(ctrl.rows(), ctrl.cols())) *
                     std::numeric_limits<double>::epsilon() * sv(0);
  std::size_t rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > tol) ++rank;
  }
  return rank;
}

double spectral_norm(const Matrix& M, double rel_tol, std::size_t max_iter) {
  if (M.size() == 0 || M.isZero(0.0)) return 0.0;
  const Matrix G = M.transpose() * M;
  Vector v(G.rows());
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = 1.0 + 0.1 * static_cast<double>(k);
  v.normalize();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = G * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= rel_tol * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

DissipativeReport dissipative_threshold(double K1, double K2) {
  DissipativeReport r;
  r.K1 = K1;
  r.K2 = K2;
  r.margin = K1 - 8.0 * K2;
  r.threshold_pass = r.margin > 0.0;
  r.rate = r.margin / 2.0;
  return r;
}

DissipativeReport validate_dissipative(const MeanFieldModel& model, const SpotCheckOptions& opts) {
  if (model.regime != Regime::Dissipative) {
    throw std::invalid_argument("validate_dissipative requires a model in the dissipative regime");
  }
  model.check();
  DissipativeReport r = dissipative_threshold(model.drift.K1, model.drift.K2);
  const std::size_t d = model.d;
  if (model.drift.K1 > 0.0) {
    r.checks.push_back(dissipativity_check("b0_dissipative", model.drift.b0, model.drift.K1, d, opts, 1));
  }
  r.checks.push_back(pair_lipschitz_check("b1_lipschitz", model.drift.b1, d, d,
                                          std::max(model.drift.K_b, model.drift.K2), false, opts, 2));
  r.checks.push_back(pair_lipschitz_check("sigma_squared_lipschitz", model.diffusion.sigma_tilde, d,
                                          d * model.n, model.drift.K2, true, opts, 3));
  if (std::isfinite(model.diffusion.delta)) r.checks.push_back(ellipticity_check(model, opts, 4));
  return r;
}

FiniteTimeReport validate_finite_time(const MeanFieldModel& model, const SpotCheckOptions& opts) {
  model.check();
  FiniteTimeReport r;
  const std::size_t d = model.d;
  r.checks.push_back(point_lipschitz_check("b0_lipschitz", model.drift.b0, model.drift.K_b, d, opts, 5));
  r.checks.push_back(pair_lipschitz_check("b1_lipschitz", model.drift.b1, d, d,
                                          std::max(model.drift.K_b, model.drift.K2), false, opts, 6));
  r.checks.push_back(pair_lipschitz_check("sigma_lipschitz", model.diffusion.sigma_tilde, d,
                                          d * model.n, model.diffusion.K_sigma, false, opts, 7));
  if (std::isfinite(model.diffusion.delta)) r.checks.push_back(ellipticity_check(model, opts, 8));
  return r;
}

DelayReport delay_threshold(double K_b, double r0, double K_sigma, double K_B) {
  DelayReport r;
  r.sup = sup_rate(K_b, r0);
  r.threshold_lhs = 72.0 * K_sigma + 8.0 * K_B;
  r.threshold_pass = r.threshold_lhs < r.sup;
  r.lambda = 0.5 * (r.sup - r.threshold_lhs);
  r.lambda_tilde = r.sup - (36.0 * K_sigma + 8.0 * K_B);
  r.decay_rate = std::exp(K_b * r0) * r.lambda;
  return r;
}

DelayReport validate_delay(const DelayModel& model, const SpotCheckOptions& opts) {
  model.check();
  DelayReport r = delay_threshold(model.K_b, model.r0, model.K_sigma, model.K_B);
  const double dt = model.grid_dt();
  r.checks.push_back(dissipativity_check("b_dissipative", model.b, model.K_b, model.d, opts, 11));
  r.checks.push_back(segment_lipschitz_check("B_lipschitz", model.B_tilde, model.grid_lag, model.d,
                                             dt, model.d, model.K_B, false, opts, 12));
  r.checks.push_back(segment_lipschitz_check("sigma_squared_lipschitz", model.sigma_tilde,
                                             model.grid_lag, model.d, dt, model.d * model.n,
                                             model.K_sigma, true, opts, 13));
  return r;
}

HamiltonianReport hamiltonian_threshold(double K1, double K_A, double r0, double K_B,
                                        const Matrix& A, const Matrix& M, const Matrix& sigma) {
  HamiltonianReport r;
  r.M_norm = spectral_norm(M);
  r.sup = sup_rate(std::min(K1, K_A), r0);
  r.threshold_lhs = 4.0 * K_B + 2.0 * r.M_norm;
  r.threshold_pass = r.threshold_lhs < r.sup;
  r.lambda = 0.5 * (r.sup - r.threshold_lhs);
  r.rank = kalman_rank(A, M);
  r.rank_pass = r.rank == static_cast<std::size_t>(A.rows());
  if (sigma.size() > 0) {
    Eigen::JacobiSVD<Matrix> svd(sigma);
    r.sigma_min_singular = svd.singularValues().minCoeff();
  }
  r.sigma_invertible = r.sigma_min_singular > 0.0;
  return r;
}

HamiltonianReport validate_hamiltonian(const HamiltonianModel& model, const SpotCheckOptions& opts) {
  model.check();
  HamiltonianReport r =
      hamiltonian_threshold(model.K1, model.K_A, model.r0, model.K_B, model.A, model.M, model.sigma);
  r.checks.push_back(dissipativity_check("b_dissipative", model.b, model.K1, model.d, opts, 21));
  r.checks.push_back(point_lipschitz_check("b_lipschitz", model.b, model.K2, model.d, opts, 22));
  {
    // (A2) is a matrix inequality and can be checked exactly.
    SpotCheck a;
    a.name = "A_dissipative";
    Eigen::SelfAdjointEigenSolver<Matrix> es(model.A + model.A.transpose());
    const double top = es.eigenvalues().maxCoeff();
    a.worst_ratio = top + model.K_A;
    a.pass = top <= -model.K_A + opts.rel_slack * model.K_A + opts.abs_slack;
    a.samples = 1;
    a.violations = a.pass ? 0 : 1;
    r.checks.push_back(a);
  }
  r.checks.push_back(segment_lipschitz_check("B_lipschitz", model.B_tilde, model.grid_lag,
                                             model.state_dim(), model.grid_dt(), model.d, model.K_B,
                                             false, opts, 23));
  return r;
}

void to_json(nlohmann::json& j, const SpotCheck& c) {
  j = {{"name", c.name},
       {"pass", c.pass},
       {"worst_excess", c.worst_ratio},
       {"samples", c.samples},
       {"violations", c.violations}};
}

void to_json(nlohmann::json& j, const DissipativeReport& r) {
  j = {{"kind", "dissipative"}, {"pass", r.pass()},     {"threshold_pass", r.threshold_pass},
       {"K1", r.K1},            {"K2", r.K2},           {"margin", r.margin},
       {"rate", r.rate},        {"checks", r.checks}};
}

void to_json(nlohmann::json& j, const DelayReport& r) {
  j = {{"kind", "delay"},
       {"pass", r.pass()},
       {"threshold_pass", r.threshold_pass},
       {"sup", r.sup},
       {"threshold_lhs", r.threshold_lhs},
       {"lambda", r.lambda},
       {"lambda_tilde", r.lambda_tilde},
       {"decay_rate", r.decay_rate},
       {"checks", r.checks}};
}

void to_json(nlohmann::json& j, const HamiltonianReport& r) {
  j = {{"kind", "hamiltonian"},
       {"pass", r.pass()},
       {"threshold_pass", r.threshold_pass},
       {"sup", r.sup},
       {"threshold_lhs", r.threshold_lhs},
       {"lambda", r.lambda},
       {"M_norm", r.M_norm},
       {"kalman_rank", r.rank},
       {"rank_pass", r.rank_pass},
       {"sigma_min_singular", r.sigma_min_singular},
       {"sigma_invertible", r.sigma_invertible},
       {"checks", r.checks}};
}

void to_json(nlohmann::json& j, const FiniteTimeReport& r) {
  j = {{"kind", "finite_time"}, {"pass", r.pass()}, {"checks", r.checks}};
}

}  // namespace mfchaos
