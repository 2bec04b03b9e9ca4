#include "mfchaos/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "mfchaos/cli/config.hpp"
#include "mfchaos/experiments/persist.hpp"
#include "mfchaos/rng/philox.hpp"

#ifndef MFCHAOS_VERSION
#define MFCHAOS_VERSION "unknown"
#endif

namespace mfchaos {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
  std::string command;
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::string threads = "auto";
};

// Signals a failed validation; the report is already on disk.
struct ValidationFailed {
  json report;
};

struct Context {
  Options opt;
  ExperimentConfig cfg;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::ostream* out = nullptr;
  std::vector<std::string> files;

  std::unique_ptr<ThreadPool> pool() const {
    return threads > 1 ? std::make_unique<ThreadPool>(threads) : nullptr;
  }
  void write_rows(const std::vector<ResultRow>& rows) {
    write_results_csv(opt.out / "results.csv", rows);
    write_gnuplot(opt.out / "results.dat", rows);
    files.push_back("results.csv");
    files.push_back("results.dat");
  }
  void write_report(const json& j) {
    write_json(opt.out / "report.json", j);
    files.push_back("report.json");
  }
};

std::size_t parse_threads(const std::string& s) {
  if (s == "auto") return std::max(1u, std::thread::hardware_concurrency());
  std::size_t k = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), k);
  if (ec != std::errc() || p != s.data() + s.size() || k == 0) {
    throw ConfigError("--threads", "expected a positive integer or 'auto'");
  }
  return k;
}

template <class Section>
Section& need(std::optional<Section>& s, const char* name, const std::string& command) {
  if (!s) throw ConfigError(name, "the '" + command + "' command needs a '" + name + "' section");
  return *s;
}

std::string param(std::initializer_list<std::pair<const char*, std::string>> kv) {
  std::string s;
  for (const auto& [k, v] : kv) {
    if (!s.empty()) s += ';';
    s += std::string(k) + "=" + v;
  }
  return s;
}

// Full validation of the model; the JSON carries "pass".
json validation_report(const ModelBundle& b, const SpotCheckOptions& opts) {
  json j;
  switch (b.family()) {
    case ModelFamily::MeanField: {
      const auto& m = std::get<MeanFieldModel>(b.model);
      if (m.regime == Regime::Dissipative) j = validate_dissipative(m, opts);
      else j = validate_finite_time(m, opts);
      break;
    }
    case ModelFamily::Delay: j = validate_delay(std::get<DelayModel>(b.model), opts); break;
    case ModelFamily::Hamiltonian: j = validate_hamiltonian(std::get<HamiltonianModel>(b.model), opts); break;
  }
  return j;
}

void require_valid(Context& ctx, const ModelBundle& b) {
  auto v = validation_report(b, ctx.cfg.validation);
  if (!v.at("pass").get<bool>()) {
    ctx.write_report({{"command", ctx.opt.command}, {"validation", v}});
    throw ValidationFailed{v};
  }
}

void cmd_validate(Context& ctx) {
  ctx.cfg.validation.seed = ctx.seed;
  const double dt = ctx.cfg.scan ? ctx.cfg.scan->dt : (ctx.cfg.simulate ? ctx.cfg.simulate->dt : 1e-2);
  const auto b = ctx.cfg.bundle(dt);
  const auto v = validation_report(b, ctx.cfg.validation);
  ctx.write_report({{"command", "validate"}, {"model_type", ctx.cfg.model_type()}, {"validation", v}});
  *ctx.out << "validate: " << (v.at("pass").get<bool>() ? "pass" : "fail") << '\n';
  if (!v.at("pass").get<bool>()) throw ValidationFailed{v};
}

std::size_t grid_step(double t, double dt) {
  const double s = std::round(t / dt);
  if (std::abs(s * dt - t) > 1e-9 * std::max(1.0, t)) {
    throw ConfigError("simulate.record_times", "time " + format_number(t) + " is not on the step grid");
  }
  return static_cast<std::size_t>(s);
}

void cmd_simulate(Context& ctx) {
  auto& sim = need(ctx.cfg.simulate, "simulate", "simulate");
  sim.seed = ctx.seed;
  const auto b = ctx.cfg.bundle(sim.dt);
  require_valid(ctx, b);
  const auto system = b.compile(sim.dt);
  const auto pool = ctx.pool();
  auto ens = system->make_ensemble(sample_gaussian(b.init_mean, b.init_cov, sim.N, rng::derive_seed(sim.seed, 1)));
  const rng::NoisePlan plan(rng::derive_seed(sim.seed, 2));
  const std::size_t steps = step_count(sim.T, sim.dt), D = system->dim();

  std::vector<std::pair<std::size_t, double>> marks;
  for (double t : sim.record_times) marks.emplace_back(grid_step(t, sim.dt), t);
  std::sort(marks.begin(), marks.end());

  std::vector<ResultRow> rows;
  json records = json::array();
  std::size_t next = 0;
  auto record = [&](std::size_t s) {
    for (; next < marks.size() && marks[next].first == s; ++next) {
      const auto pts = ens.head_ensemble();
      Vector mean = Vector::Zero(static_cast<Eigen::Index>(D));
      std::vector<double> sq(sim.N);
      for (std::size_t i = 0; i < sim.N; ++i) {
        const auto r = pts.row(i);
        double acc = 0.0;
        for (std::size_t c = 0; c < D; ++c) {
          mean(static_cast<Eigen::Index>(c)) += r[c];
          acc += r[c] * r[c];
        }
        sq[i] = acc;
      }
      mean /= static_cast<double>(sim.N);
      Matrix cov = Matrix::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
      for (std::size_t i = 0; i < sim.N; ++i) {
        Vector x(static_cast<Eigen::Index>(D));
        for (std::size_t c = 0; c < D; ++c) x(static_cast<Eigen::Index>(c)) = pts.row(i)[c] - mean(static_cast<Eigen::Index>(c));
        cov += x * x.transpose();
      }
      if (sim.N > 1) cov /= static_cast<double>(sim.N - 1);
      const auto e = summarize(sq);
      rows.push_back({param({{"t", format_number(marks[next].second)}}), e.mean, e.ci_low, e.ci_high, sim.N});
      json c = json::array();
      for (Eigen::Index r = 0; r < cov.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index k = 0; k < cov.cols(); ++k) row.push_back(cov(r, k));
        c.push_back(row);
      }
      records.push_back({{"t", marks[next].second},
                         {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
                         {"cov", c},
                         {"second_moment", to_json(e)}});
    }
  };
  record(0);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto inc = plan.increments(sim.N, system->noise_dim(), s, sim.dt);
    const EmpiricalMeasure emp(*system, ens.segments());
    system->advance(ens, emp, inc, s, pool.get());
    record(s + 1);
  }
  ctx.write_rows(rows);
  ctx.write_report({{"command", "simulate"}, {"N", sim.N}, {"records", records}});
  *ctx.out << "simulate: N = " << sim.N << ", " << steps << " steps\n";
}

ScanConfig& scan_section(Context& ctx) {
  auto& scan = need(ctx.cfg.scan, "scan", ctx.opt.command);
  scan.seed = ctx.seed;
  return scan;
}

void cmd_couple(Context& ctx) {
  ScanConfig scan = scan_section(ctx);
  if (scan.record_times.empty()) scan.record_times = {scan.T};
  const auto b = ctx.cfg.bundle(scan.dt);
  require_valid(ctx, b);
  const auto pool = ctx.pool();
  const auto res = rate_scan_N(b, scan, pool.get());
  std::vector<ResultRow> rows;
  for (const auto& row : res.rows) {
    for (std::size_t j = 0; j < res.record_times.size(); ++j) {
      const auto& g = row.gap_at[j];
      rows.push_back({param({{"N", std::to_string(row.N)}, {"t", format_number(res.record_times[j])}}), g.mean,
                      g.ci_low, g.ci_high, g.samples});
    }
  }
  ctx.write_rows(rows);
  ctx.write_report({{"command", "couple"}, {"scan", to_json(scan)}, {"result", to_json(res)}});
  *ctx.out << "couple: " << scan.N.size() << " N values x " << scan.replicas << " replicas, backend " << res.backend
           << '\n';
}

void cmd_scan_n(Context& ctx) {
  const ScanConfig& scan = scan_section(ctx);
  const auto b = ctx.cfg.bundle(scan.dt);
  require_valid(ctx, b);
  const auto pool = ctx.pool();
  const auto res = rate_scan_N(b, scan, pool.get());
  ctx.write_rows(result_rows(res));
  ctx.write_report({{"command", "scan-n"}, {"scan", to_json(scan)}, {"result", to_json(res)}});
  *ctx.out << "scan-n: " << scan.N.size() << " N values x " << scan.replicas << " replicas, slope "
           << format_number(res.fit.slope) << '\n';
}

void cmd_scan_t(Context& ctx) {
  const ScanConfig& scan = scan_section(ctx);
  const auto b = ctx.cfg.bundle(scan.dt);
  require_valid(ctx, b);
  const auto pool = ctx.pool();
  const auto res = longtime_scan(b, scan, pool.get());
  ctx.write_rows(result_rows(res));
  for (const auto& row : res.rows) {
    const auto n = std::to_string(row.N);
    write_gap_csv(ctx.opt.out / ("gap_N" + n + ".csv"), row.transient);
    write_gap_csv(ctx.opt.out / ("plateau_N" + n + ".csv"), row.matched);
    ctx.files.push_back("gap_N" + n + ".csv");
    ctx.files.push_back("plateau_N" + n + ".csv");
  }
  ctx.write_report({{"command", "scan-t"}, {"scan", to_json(scan)}, {"result", to_json(res)}});
  *ctx.out << "scan-t: fitted rate " << format_number(res.fitted_rate) << ", theoretical "
           << format_number(res.theoretical_rate) << ", verdict " << res.verdict << '\n';
}

void cmd_lln(Context& ctx) {
  auto& l = need(ctx.cfg.lln, "lln", "lln");
  l.seed = ctx.seed;
  const auto pool = ctx.pool();
  const auto res = lln_scan(lln_builtin(l.example), l.N, l.trials, l.seed, pool.get());
  ctx.write_rows(result_rows(res));
  ctx.write_report({{"command", "lln"}, {"example", l.example}, {"trials", l.trials}, {"result", to_json(res)}});
  *ctx.out << "lln: " << l.example << ", flatness " << format_number(res.flatness) << '\n';
}

void cmd_oracle(Context& ctx) {
  const auto& o = need(ctx.cfg.oracle, "oracle", "oracle");
  const auto spec = ctx.cfg.linear_spec();
  if (!spec) throw ConfigError("model", "the oracle needs a linear mean-field model with constant noise");
  const auto b = ctx.cfg.bundle(1e-2);
  std::vector<ResultRow> rows;
  json curves = json::array();
  for (std::size_t k : o.k) {
    const auto pts = exact_chaos_curve(*spec, b.init_mean, b.init_cov, o.N, k, o.t, o.dt_ode);
    json points = json::array();
    std::vector<double> ns, kl, w2;
    for (const auto& p : pts) {
      rows.push_back({param({{"N", std::to_string(p.N)}, {"k", std::to_string(k)}}), p.kl, p.kl, p.kl, 0});
      points.push_back({{"N", p.N}, {"kl", p.kl}, {"w2_sq", p.w2_sq}});
      ns.push_back(static_cast<double>(p.N));
      kl.push_back(p.kl);
      w2.push_back(p.w2_sq);
    }
    json c = {{"k", k}, {"t", o.t}, {"points", points}};
    if (ns.size() >= 2) {
      try {
        c["kl_fit"] = to_json(fit_power_law(ns, kl));
        c["w2_sq_fit"] = to_json(fit_power_law(ns, w2));
      } catch (const std::domain_error&) {
        c["kl_fit"] = nullptr;  // some distance vanished exactly
      }
    }
    curves.push_back(c);
  }
  ctx.write_rows(rows);
  ctx.write_report({{"command", "oracle"}, {"curves", curves}});
  *ctx.out << "oracle: " << o.k.size() << " curves x " << o.N.size() << " N values\n";
}

std::uint64_t config_seed(const Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& cmd = ctx.opt.command;
  if (cmd == "simulate" && c.simulate) return c.simulate->seed;
  if (cmd == "lln" && c.lln) return c.lln->seed;
  if ((cmd == "couple" || cmd == "scan-n" || cmd == "scan-t") && c.scan) return c.scan->seed;
  if (cmd == "validate") return c.validation.seed;
  return 0;
}

void write_manifest(const Context& ctx, double wall, int code) {
  json m = {{"command", ctx.opt.command},
            {"config_path", ctx.opt.config.string()},
            {"config", ctx.cfg.document},
            {"model_hash", ctx.cfg.model_hash()},
            {"seed", ctx.seed},
            {"threads", ctx.threads},
            {"version", version()},
            {"wall_time_s", wall},
            {"exit_code", code},
            {"outputs", ctx.files}};
  write_json(ctx.opt.out / "manifest.json", m);
}

void emit(std::ostream& err, const json& j) { err << j.dump() << '\n'; }

}  // namespace

const char* version() { return MFCHAOS_VERSION; }

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field particle systems and propagation-of-chaos experiments"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1, 1);
  Options opt;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"validate", "check declared constants and long-time thresholds"},
      {"simulate", "run the interacting particle system"},
      {"couple", "synchronous coupling gaps at the record times"},
      {"scan-n", "coupling statistic against N with a log-log fit"},
      {"scan-t", "long-time contraction rate and plateau verdict"},
      {"lln", "law-of-large-numbers gap against N"},
      {"oracle", "exact Gaussian chaos curves for a linear model"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "experiment file (YAML)")->required();
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--seed", opt.seed, "overrides the seed in the config");
    sub->add_option("--threads", opt.threads, "worker threads, or 'auto'")->default_str("auto");
    sub->final_callback([&opt, n = std::string(name)] { opt.command = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    emit(err, {{"error", "usage"}, {"message", e.what()}});
    return 2;
  }

  Context ctx;
  ctx.opt = opt;
  ctx.out = &out;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  int code = 0;
  bool loaded = false;
  try {
    ctx.threads = parse_threads(opt.threads);
    ctx.cfg = load_config(opt.config);
    loaded = true;
    ctx.seed = opt.seed ? *opt.seed : config_seed(ctx);
    std::error_code ec;
    fs::create_directories(opt.out, ec);
    if (ec || !fs::is_directory(opt.out)) {
      throw std::runtime_error("cannot create output directory '" + opt.out.string() + "'");
    }
    const auto& c = opt.command;
    if (c == "validate") cmd_validate(ctx);
    else if (c == "simulate") cmd_simulate(ctx);
    else if (c == "couple") cmd_couple(ctx);
    else if (c == "scan-n") cmd_scan_n(ctx);
    else if (c == "scan-t") cmd_scan_t(ctx);
    else if (c == "lln") cmd_lln(ctx);
    else cmd_oracle(ctx);
  } catch (const ValidationFailed& v) {
    emit(err, {{"error", "validation_failed"}, {"report", v.report}});
    code = 1;
  } catch (const ConfigError& e) {
    emit(err, {{"error", "config"}, {"where", e.where}, {"message", e.what()}});
    code = 2;
  } catch (const ScanBlowUp& e) {
    emit(err, {{"error", "blow_up"},
               {"N", e.N},
               {"replica", e.replica},
               {"step", e.step},
               {"particle", e.particle},
               {"message", e.what()}});
    code = 2;
  } catch (const BlowUp& e) {
    emit(err, {{"error", "blow_up"}, {"step", e.step}, {"particle", e.particle}, {"t", e.t}, {"message", e.what()}});
    code = 2;
  } catch (const std::exception& e) {
    emit(err, {{"error", "runtime"}, {"message", e.what()}});
    code = 2;
  }
  if (loaded && fs::is_directory(opt.out)) {
    try {
      write_manifest(ctx, elapsed(), code);
    } catch (const std::exception& e) {
      emit(err, {{"error", "io"}, {"message", e.what()}});
      code = 2;
    }
  }
  return code;
}

}  // namespace mfchaos
