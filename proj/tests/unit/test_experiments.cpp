#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "mfchaos/experiments/persist.hpp"
#include "mfchaos/oracle/gaussian_oracle.hpp"

using namespace mfchaos;

namespace {

ModelBundle linear_bundle(double a0, double b1, double b2, double sigma, Regime regime = Regime::Dissipative) {
  LinearModelSpec s;
  s.A0 = Matrix::Constant(1, 1, a0);
  s.c0 = Vector::Zero(1);
  s.B1 = Matrix::Constant(1, 1, b1);
  s.B2 = Matrix::Constant(1, 1, b2);
  s.c1 = Vector::Zero(1);
  s.Sigma = Matrix::Constant(1, 1, sigma);
  return {s.to_model(regime), Vector::Zero(1), Matrix::Identity(1, 1)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("mfchaos_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

ScanConfig small_scan() {
  ScanConfig c;
  c.N = {4, 16, 64};
  c.T = 1.0;
  c.dt = 0.01;
  c.record_times = {0.5, 1.0};
  c.replicas = 200;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("power-law fits recover exact exponents") {
  std::vector<double> N{10, 20, 40, 80, 160}, y1, y2;
  for (double n : N) {
    y1.push_back(5.0 / n);
    y2.push_back(3.0 / (n * n));
  }
  const auto f1 = fit_power_law(N, y1);
  CHECK(f1.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::exp(f1.intercept) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(f1.r_squared == doctest::Approx(1.0));
  CHECK(f1.std_error < 1e-12);
  CHECK(fit_power_law(N, y2).slope == doctest::Approx(-2.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_power_law(std::vector<double>{1, 2}, std::vector<double>{1, -1}), std::domain_error);
  CHECK_THROWS_AS(fit_line(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
  CHECK_THROWS_AS(fit_line(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("decay-to-plateau fit recovers rate and plateau") {
  // y = a e^{-lambda t} + p with the plateau well inside the last fifth.
  const double a = 3.0, lambda = 1.7, p = 0.04;
  std::vector<double> t, y;
  for (int i = 0; i <= 400; ++i) {
    t.push_back(0.05 * i);
    y.push_back(a * std::exp(-lambda * t.back()) + p);
  }
  const auto d = fit_decay_to_plateau(t, y);
  REQUIRE(d.ok);
  CHECK(d.plateau_reached);
  CHECK(d.plateau == doctest::Approx(p).epsilon(1e-6));
  CHECK(d.rate == doctest::Approx(lambda).epsilon(1e-6));

  // A pure exponential never settles, so the window runs into the tail.
  std::vector<double> z;
  for (double s : t) z.push_back(std::exp(-s));
  CHECK_FALSE(fit_decay_to_plateau(t, z).plateau_reached);
}

TEST_CASE("normal confidence intervals cover at the nominal rate") {
  int covered = 0;
  const auto sampler = standard_normal_sampler();
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    UniformSource u(2024, rep);
    std::vector<double> v(1000);
    for (double& x : v) x = sampler(u);
    const auto e = summarize(v);
    if (e.ci_low <= 0.0 && 0.0 <= e.ci_high) ++covered;
  }
  CHECK(covered >= 93);
  CHECK(covered <= 97);
}

TEST_CASE("scan config validation") {
  auto c = small_scan();
  CHECK_NOTHROW(c.check());
  c.N = {16, 4};
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = small_scan();
  c.replicas = 1;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = small_scan();
  c.statistic = Statistic::GapAt;
  c.statistic_time = 0.7;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c.statistic_time = 0.5;
  CHECK_NOTHROW(c.check());
}

TEST_CASE("coupling gap shrinks with N and Auto picks the Gaussian law") {
  const auto bundle = linear_bundle(-1.0, -0.5, 0.5, 1.0, Regime::FiniteTime);
  const auto res = rate_scan_N(bundle, small_scan());
  CHECK(res.backend == "gaussian");
  REQUIRE(res.rows.size() == 3);
  for (std::size_t i = 1; i < res.rows.size(); ++i) CHECK(res.rows[i].stat.mean < res.rows[i - 1].stat.mean);
  CHECK(res.fit.slope < -0.7);
  CHECK(res.fit.slope > -1.3);
  CHECK(res.rows[0].gap_at.size() == 2);
  CHECK(res.rows[0].segment_gap_at.empty());
}

TEST_CASE("scan results do not depend on the thread count") {
  const auto bundle = linear_bundle(-1.0, -0.5, 0.5, 1.0);
  auto c = small_scan();
  c.replicas = 8;
  const auto serial = rate_scan_N(bundle, c);
  ThreadPool pool(3);
  const auto threaded = rate_scan_N(bundle, c, &pool);
  REQUIRE(serial.rows.size() == threaded.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].stat.mean == threaded.rows[i].stat.mean);
    CHECK(serial.rows[i].stat.std_error == threaded.rows[i].stat.std_error);
  }
  CHECK(to_json(serial) == to_json(threaded));
}

TEST_CASE("offset initials under pure confinement decay at rate two") {
  // No interaction and additive noise: the gap is the offset contracted by
  // the Euler factor, 2 in the continuum.
  const auto bundle = linear_bundle(-1.0, 0.0, 0.0, 0.5);
  ScanConfig c;
  c.N = {4, 8};
  c.T = 20.0;
  c.dt = 0.01;
  c.replicas = 2;
  c.coupling = InitialCoupling::Offset;
  const auto res = longtime_scan(bundle, c);
  CHECK(res.theoretical_rate == doctest::Approx(1.0));
  CHECK(res.fitted_rate == doctest::Approx(2.0).epsilon(0.01));
  CHECK(res.rate_pass);
  for (const auto& row : res.rows) CHECK(row.plateau_times_N == 0.0);
}

TEST_CASE("long-time verdict is bounded and stable when the horizon doubles") {
  const auto bundle = linear_bundle(-1.0, -0.25, 0.25, 1.0);
  ScanConfig c;
  c.N = {8, 16, 32};
  c.dt = 0.01;
  c.replicas = 64;
  c.seed = 5;
  c.coupling = InitialCoupling::Offset;
  c.offset = 2.0;
  c.T = 10.0;
  const auto a = longtime_scan(bundle, c);
  c.T = 20.0;
  const auto b = longtime_scan(bundle, c);
  CHECK(a.verdict == "bounded");
  CHECK(b.verdict == a.verdict);
  CHECK(a.rate_pass);
  CHECK(b.rate_pass);
  CHECK_THROWS_AS(longtime_scan(bundle, small_scan()), std::invalid_argument);
}

TEST_CASE("LLN scan: scaled gap is flat in N") {
  const std::vector<std::size_t> Ns{10, 40, 160};
  const auto bern = lln_scan(lln_builtin("bernoulli"), Ns, 4000, 3);
  for (const auto& r : bern.rows) CHECK(r.scaled == doctest::Approx(0.25).epsilon(0.06));
  CHECK(bern.flatness < 1.2);
  const auto constant = lln_scan(lln_builtin("constant"), Ns, 100, 3);
  for (const auto& r : constant.rows) CHECK(r.estimate.mean == 0.0);
  CHECK(constant.flatness == 1.0);
  const auto prod = lln_scan(lln_builtin("product_normal"), Ns, 4000, 3);
  CHECK(prod.rows.back().scaled == doctest::Approx(1.0).epsilon(0.1));
  CHECK_THROWS_AS(lln_builtin("nope"), std::invalid_argument);

  ThreadPool pool(2);
  const auto again = lln_scan(lln_builtin("bernoulli"), Ns, 4000, 3, &pool);
  CHECK(to_json(again) == to_json(bern));
}

TEST_CASE("numbers round-trip through their text form") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 6.02214076e23}) {
    const auto s = format_number(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-HUGE_VAL) == "-inf");
}

TEST_CASE("results CSV round trip, header and byte-identical replay") {
  TempDir dir;
  const auto bundle = linear_bundle(-1.0, -0.5, 0.5, 1.0);
  auto c = small_scan();
  c.replicas = 6;
  const auto rows = result_rows(rate_scan_N(bundle, c));
  const auto p1 = dir.path / "a.csv", p2 = dir.path / "b.csv";
  write_results_csv(p1, rows);
  CHECK(read_results_csv(p1) == rows);
  CHECK(slurp(p1).rfind(std::string(kResultsHeader) + "\n", 0) == 0);

  write_results_csv(p2, result_rows(rate_scan_N(bundle, c)));
  CHECK(slurp(p1) == slurp(p2));

  std::ofstream(dir.path / "bad.csv") << "x,y\n1,2\n";
  CHECK_THROWS_AS(read_results_csv(dir.path / "bad.csv"), std::runtime_error);
  CHECK_THROWS_AS(write_results_csv(dir.path / "missing" / "x.csv", rows), std::runtime_error);

  const auto j = to_json(c);
  write_json(dir.path / "c.json", j);
  CHECK(read_json(dir.path / "c.json") == j);
}

TEST_CASE("gap series and gnuplot outputs") {
  TempDir dir;
  GapSeries s;
  s.t = {0.0, 0.5};
  s.gap = {summarize(std::vector<double>{1.0, 3.0}), summarize(std::vector<double>{0.5, 0.5})};
  write_gap_csv(dir.path / "gap.csv", s);
  const auto text = slurp(dir.path / "gap.csv");
  CHECK(text.rfind(std::string(kGapHeader) + "\n0,2,", 0) == 0);
  write_gnuplot(dir.path / "g.dat", {{"4", 1.0, 0.5, 1.5, 3}});
  CHECK(slurp(dir.path / "g.dat") == "# param stat ci_low ci_high n_replicas\n4 1 0.5 1.5 3\n");
}

TEST_CASE("halving dt leaves the coupling gap within noise") {
  auto delay = [](double dt) {
    const double r0 = 0.1;
    const auto L = static_cast<std::size_t>(std::llround(r0 / dt));
    return ModelBundle{make_delay_model(1, 1, r0, L, AffineMap{Matrix::Constant(1, 1, -2.5), Vector::Zero(1)}, 5.0,
                                        lagged_difference_kernel(1, 1, 0, 0.01, false, 0.0, r0), 0.01,
                                        lagged_kernel_sigma(1, 1.0, 0.0, 0.0, 0.0), 0.0005),
                       Vector::Zero(1), Matrix::Identity(1, 1)};
  };
  auto kinetic = [](double) {
    return ModelBundle{make_hamiltonian_model(Matrix::Constant(1, 1, -3.0), Matrix::Constant(1, 1, 0.05), 3.0,
                                              AffineMap{Matrix::Constant(1, 1, -3.0), Vector::Zero(1)}, 3.0, 3.0,
                                              lagged_difference_kernel(2, 1, 1, 0.01, false, 0.0, 0.0), 0.01,
                                              Matrix::Constant(1, 1, 1.0), 0.0, 0),
                       Vector::Zero(2), Matrix::Identity(2, 2)};
  };
  auto linear = [](double) { return linear_bundle(-1.0, 0.0, 0.2, 1.0, Regime::FiniteTime); };
  const std::vector<std::pair<const char*, std::function<ModelBundle(double)>>> models{
      {"linear", linear}, {"delay", delay}, {"kinetic", kinetic}};
  for (const auto& [name, make] : models) {
    CAPTURE(name);
    ScanConfig c;
    c.N = {16, 64};
    c.k = 0;
    c.T = 2.0;
    c.record_times = {2.0};
    c.replicas = 200;
    c.seed = 21;
    c.statistic = Statistic::GapAt;
    c.statistic_time = 2.0;
    c.dt = 0.01;
    const auto coarse = rate_scan_N(make(c.dt), c);
    c.dt = 0.005;
    const auto fine = rate_scan_N(make(c.dt), c);
    for (std::size_t i = 0; i < c.N.size(); ++i) {
      const auto& a = coarse.rows[i].stat;
      const auto& b = fine.rows[i].stat;
      CHECK(std::abs(a.mean - b.mean) <= 4.0 * std::hypot(a.std_error, b.std_error));
    }
  }
}
