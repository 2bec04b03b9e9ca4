#include "mfchaos/cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace mfchaos {
namespace {

using nlohmann::json;

json scalar_to_json(const YAML::Node& node) {
  const std::string& s = node.Scalar();
  if (node.Tag() == "!") return s;  // quoted
  if (s == "~" || s == "null" || s.empty()) return nullptr;
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  const char* b = s.data();
  const char* e = b + s.size();
  std::int64_t i = 0;
  if (auto [p, ec] = std::from_chars(b, e, i); ec == std::errc() && p == e) return i;
  double d = 0.0;
  if (auto [p, ec] = std::from_chars(b, e, d); ec == std::errc() && p == e) return d;
  if (s == ".inf" || s == "-.inf" || s == ".nan") {
    throw ConfigError(node.Mark().line >= 0 ? "line " + std::to_string(node.Mark().line + 1) : "config",
                      "non-finite numbers are not allowed");
  }
  return s;
}

json node_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar: return scalar_to_json(node);
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& child : node) a.push_back(node_to_json(child));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (o.contains(key)) throw ConfigError(key, "duplicate key");
        o[key] = node_to_json(kv.second);
      }
      return o;
    }
  }
  return nullptr;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

// A mapping whose keys must all be consumed.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "config" : path_, "expected a mapping");
  }

  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  const json& at(const std::string& k) {
    used_.insert(k);
    if (!j_.contains(k)) {
      for (auto it = j_.begin(); it != j_.end(); ++it) {
        if (!used_.count(it.key()) && edit_distance(it.key(), k) <= 2) {
          throw ConfigError(key_path(it.key()), "unknown key (did you mean '" + k + "'?)");
        }
      }
      throw ConfigError(key_path(k), "missing required key");
    }
    return j_.at(k);
  }

  double num(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_number()) throw ConfigError(key_path(k), "expected a number");
    return v.get<double>();
  }
  double num(const std::string& k, double def) { return has(k) ? num(k) : (used_.insert(k), def); }

  std::uint64_t integer(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError(key_path(k), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::uint64_t integer(const std::string& k, std::uint64_t def) {
    return has(k) ? integer(k) : (used_.insert(k), def);
  }

  bool flag(const std::string& k, bool def) {
    if (!has(k)) return def;
    const auto& v = at(k);
    if (!v.is_boolean()) throw ConfigError(key_path(k), "expected true or false");
    return v.get<bool>();
  }

  std::string str(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_string()) throw ConfigError(key_path(k), "expected a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& k, const std::string& def) { return has(k) ? str(k) : def; }

  std::vector<double> numbers(const std::string& k) {
    const auto& v = at(k);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError(key_path(k), "expected a list of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(key_path(k), "expected a list of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& k) {
    const auto& v = at(k);
    if (!v.is_array()) throw ConfigError(key_path(k), "expected a list of integers");
    std::vector<std::size_t> out;
    for (const auto& x : v) {
      if (!x.is_number_integer() || x.get<std::int64_t>() < 0) {
        throw ConfigError(key_path(k), "expected a list of non-negative integers");
      }
      out.push_back(x.get<std::size_t>());
    }
    return out;
  }

  Vector vec(const std::string& k) {
    const auto v = numbers(k);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  Vector vec(const std::string& k, Vector def) { return has(k) ? vec(k) : def; }

  // A list of rows; a bare number is a 1 x 1 matrix.
  Matrix mat(const std::string& k) {
    const auto& v = at(k);
    if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
    if (!v.is_array() || v.empty()) throw ConfigError(key_path(k), "expected a list of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    Matrix m;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& row = v[r];
      if (!row.is_array() || row.empty()) throw ConfigError(key_path(k), "expected a list of rows");
      if (r == 0) {
        cols = row.size();
        m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      }
      if (row.size() != cols) throw ConfigError(key_path(k), "rows differ in length");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!row[c].is_number()) throw ConfigError(key_path(k), "expected numbers");
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
      }
    }
    return m;
  }
  Matrix mat(const std::string& k, Matrix def) { return has(k) ? mat(k) : def; }

  Obj obj(const std::string& k) { return Obj(at(k), key_path(k)); }

  // Rejects keys nobody asked for.
  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
auto wrap(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where, e.what());
  }
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ConfigError(where, "expected a " + std::to_string(rows) + " x " + std::to_string(cols) + " matrix");
  }
}

void require_size(const Vector& v, Eigen::Index n, const std::string& where) {
  if (v.size() != n) throw ConfigError(where, "expected " + std::to_string(n) + " entries");
}

std::size_t grid_lag(double r0, double dt, const std::string& where) {
  if (!(r0 >= 0.0) || !std::isfinite(r0)) throw ConfigError(where, "r0 must be a non-negative number");
  const double steps = r0 / dt;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError(where, "r0 must be a whole number of time steps (dt = " + std::to_string(dt) + ")");
  }
  return static_cast<std::size_t>(rounded);
}

AffineMap affine(Obj o, std::size_t d) {
  AffineMap a;
  a.linear = o.mat("A");
  require_shape(a.linear, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), o.key_path("A"));
  a.offset = o.vec("c", Vector::Zero(static_cast<Eigen::Index>(d)));
  require_size(a.offset, static_cast<Eigen::Index>(d), o.key_path("c"));
  o.done();
  return a;
}

PairKernel lagged_difference(Obj o, std::size_t dim, std::size_t d, std::size_t default_offset, double r0) {
  const auto family = o.str("family");
  if (family != "lagged_difference") {
    throw ConfigError(o.key_path("family"), "unknown interaction family '" + family + "' (lagged_difference)");
  }
  const double weight = o.num("weight");
  const bool use_tanh = o.flag("tanh", false);
  const double lag_xi = o.num("lag_xi", 0.0);
  const double lag_eta = o.num("lag_eta", 0.0);
  const auto offset = o.integer("read_offset", default_offset);
  o.done();
  if (lag_xi > r0 + 1e-12 || lag_eta > r0 + 1e-12 || lag_xi < 0.0 || lag_eta < 0.0) {
    throw ConfigError(o.key_path("lag_eta"), "lags must lie in [0, r0]");
  }
  if (offset + d > dim) throw ConfigError(o.key_path("read_offset"), "reads past the state");
  return lagged_difference_kernel(dim, d, offset, weight, use_tanh, lag_xi, lag_eta);
}

MeanFieldModel mean_field(Obj& m) {
  const auto d = m.integer("d");
  if (d == 0) throw ConfigError(m.key_path("d"), "must be positive");
  const auto regime_name = m.str("regime", "finite_time");
  Regime regime;
  if (regime_name == "finite_time") regime = Regime::FiniteTime;
  else if (regime_name == "dissipative") regime = Regime::Dissipative;
  else throw ConfigError(m.key_path("regime"), "expected finite_time or dissipative");

  MeanFieldModel model;
  model.d = d;
  model.regime = regime;
  const auto D = static_cast<Eigen::Index>(d);

  Obj dr = m.obj("drift");
  const auto drift = dr.str("family");
  if (drift == "linear") {
    const Matrix A0 = dr.mat("A0");
    require_shape(A0, D, D, dr.key_path("A0"));
    const Matrix B1 = dr.mat("B1", Matrix::Zero(D, D));
    require_shape(B1, D, D, dr.key_path("B1"));
    const Matrix B2 = dr.mat("B2", Matrix::Zero(D, D));
    require_shape(B2, D, D, dr.key_path("B2"));
    const Vector c0 = dr.vec("c0", Vector::Zero(D));
    require_size(c0, D, dr.key_path("c0"));
    const Vector c1 = dr.vec("c1", Vector::Zero(D));
    require_size(c1, D, dr.key_path("c1"));
    model.drift = linear_drift(A0, c0, B1, B2, c1);
  } else if (drift == "attractive_quadratic_tanh") {
    model.drift = attractive_quadratic_tanh(d, dr.num("confinement"), dr.num("coupling"));
  } else {
    throw ConfigError(dr.key_path("family"),
                      "unknown drift family '" + drift + "' (linear, attractive_quadratic_tanh)");
  }
  model.drift.K_b = dr.num("K_b", model.drift.K_b);
  model.drift.K1 = dr.num("K1", model.drift.K1);
  model.drift.K2 = dr.num("K2", model.drift.K2);
  dr.done();

  Obj df = m.obj("diffusion");
  const auto diffusion = df.str("family");
  if (diffusion == "constant_sigma") {
    const Matrix sigma = df.mat("sigma");
    if (sigma.rows() != D) throw ConfigError(df.key_path("sigma"), "expected " + std::to_string(d) + " rows");
    model.diffusion = constant_sigma(sigma);
    model.n = static_cast<std::size_t>(sigma.cols());
  } else if (diffusion == "kernel_sigma") {
    model.diffusion = kernel_sigma(d, df.num("base"), df.num("scale"));
    model.n = d;
  } else {
    throw ConfigError(df.key_path("family"),
                      "unknown diffusion family '" + diffusion + "' (constant_sigma, kernel_sigma)");
  }
  model.diffusion.K_sigma = df.num("K_sigma", model.diffusion.K_sigma);
  model.diffusion.delta = df.num("delta", model.diffusion.delta);
  df.done();
  wrap(m.key_path("drift"), [&] { model.check(); return 0; });
  return model;
}

DelayModel delay(Obj& m, double dt) {
  const auto d = m.integer("d");
  if (d == 0) throw ConfigError(m.key_path("d"), "must be positive");
  const double r0 = m.num("r0");
  const auto L = grid_lag(r0, dt, m.key_path("r0"));
  const auto b = affine(m.obj("b"), d);
  const double K_b = m.num("K_b");
  const auto B = lagged_difference(m.obj("B"), d, d, 0, r0);
  const double K_B = m.num("K_B");
  Obj s = m.obj("sigma");
  const auto family = s.str("family");
  if (family != "lagged_kernel_sigma") {
    throw ConfigError(s.key_path("family"), "unknown diffusion family '" + family + "' (lagged_kernel_sigma)");
  }
  const auto sigma = lagged_kernel_sigma(d, s.num("base"), s.num("scale"), s.num("lag_xi", 0.0), s.num("lag_eta", 0.0));
  s.done();
  const double K_sigma = m.num("K_sigma");
  return wrap(m.key_path("type"), [&] { return make_delay_model(d, d, r0, L, b, K_b, B, K_B, sigma, K_sigma); });
}

HamiltonianModel kinetic(Obj& m, double dt) {
  const Matrix A = m.mat("A");
  const Matrix M = m.mat("M");
  const auto mm = static_cast<std::size_t>(A.rows());
  require_shape(A, A.rows(), A.rows(), m.key_path("A"));
  if (static_cast<std::size_t>(M.rows()) != mm) throw ConfigError(m.key_path("M"), "needs as many rows as A");
  const auto d = static_cast<std::size_t>(M.cols());
  const double K_A = m.num("K_A");
  const double r0 = m.num("r0", 0.0);
  const auto L = grid_lag(r0, dt, m.key_path("r0"));
  const auto b = affine(m.obj("b"), d);
  const double K1 = m.num("K1");
  const double K2 = m.num("K2");
  const auto B = lagged_difference(m.obj("B"), mm + d, d, mm, r0);
  const double K_B = m.num("K_B");
  const Matrix sigma = m.mat("sigma");
  require_shape(sigma, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), m.key_path("sigma"));
  return wrap(m.key_path("type"),
              [&] { return make_hamiltonian_model(A, M, K_A, b, K1, K2, B, K_B, sigma, r0, L); });
}

Backend parse_backend(const std::string& s, const std::string& where) {
  if (s == "auto") return Backend::Auto;
  if (s == "gaussian") return Backend::Gaussian;
  if (s == "reference_tabulated") return Backend::ReferenceTabulated;
  if (s == "reference_direct") return Backend::ReferenceDirect;
  throw ConfigError(where, "unknown backend '" + s + "'");
}

InitialCoupling parse_coupling(const std::string& s, const std::string& where) {
  if (s == "matched") return InitialCoupling::Matched;
  if (s == "independent") return InitialCoupling::Independent;
  if (s == "offset") return InitialCoupling::Offset;
  throw ConfigError(where, "unknown coupling '" + s + "' (matched, independent, offset)");
}

Statistic parse_statistic(const std::string& s, const std::string& where) {
  if (s == "sup_gap") return Statistic::SupGap;
  if (s == "gap_at") return Statistic::GapAt;
  if (s == "segment_gap_at") return Statistic::SegmentGapAt;
  throw ConfigError(where, "unknown statistic '" + s + "' (sup_gap, gap_at, segment_gap_at)");
}

ScanConfig parse_scan(Obj s) {
  ScanConfig c;
  c.N = s.counts("N");
  if (s.has("k")) {
    const auto& k = s.at("k");
    if (k.is_string() && k.get<std::string>() == "all") c.k = 0;
    else if (k.is_number_integer() && k.get<std::int64_t>() > 0) c.k = k.get<std::size_t>();
    else throw ConfigError(s.key_path("k"), "expected a positive integer or 'all'");
  }
  c.T = s.num("T");
  c.dt = s.num("dt");
  if (s.has("record_times")) c.record_times = s.numbers("record_times");
  c.replicas = s.integer("replicas");
  c.seed = s.integer("seed", c.seed);
  c.backend = parse_backend(s.str("backend", "auto"), s.key_path("backend"));
  c.reference_size = s.integer("reference_size", 0);
  c.table_spacing = s.num("table_spacing", c.table_spacing);
  c.coupling = parse_coupling(s.str("coupling", "matched"), s.key_path("coupling"));
  c.offset = s.num("offset", c.offset);
  c.statistic = parse_statistic(s.str("statistic", "sup_gap"), s.key_path("statistic"));
  c.statistic_time = s.num("statistic_time", 0.0);
  s.done();
  wrap("scan", [&] { c.check(); return 0; });
  return c;
}

SimulateConfig parse_simulate(Obj s) {
  SimulateConfig c;
  c.N = s.integer("N");
  if (c.N == 0) throw ConfigError(s.key_path("N"), "must be positive");
  c.T = s.num("T");
  c.dt = s.num("dt");
  if (!(c.T > 0.0) || !(c.dt > 0.0)) throw ConfigError("simulate", "T and dt must be positive");
  if (s.has("record_times")) c.record_times = s.numbers("record_times");
  else c.record_times = {c.T};
  for (double t : c.record_times) {
    if (t < 0.0 || t > c.T + 1e-9 * c.dt) throw ConfigError(s.key_path("record_times"), "must lie in [0, T]");
  }
  c.seed = s.integer("seed", c.seed);
  s.done();
  return c;
}

LlnConfig parse_lln(Obj s) {
  LlnConfig c;
  c.example = s.str("example");
  wrap(s.key_path("example"), [&] { return lln_builtin(c.example); });
  c.N = s.counts("N");
  if (c.N.empty()) throw ConfigError(s.key_path("N"), "must not be empty");
  for (auto n : c.N) {
    if (n == 0) throw ConfigError(s.key_path("N"), "entries must be positive");
  }
  c.trials = s.integer("trials");
  if (c.trials < 2) throw ConfigError(s.key_path("trials"), "need at least 2 trials");
  c.seed = s.integer("seed", c.seed);
  s.done();
  return c;
}

OracleConfig parse_oracle(Obj s) {
  OracleConfig c;
  c.N = s.counts("N");
  if (c.N.empty()) throw ConfigError(s.key_path("N"), "must not be empty");
  if (s.has("k")) c.k = s.counts("k");
  for (auto k : c.k) {
    if (k == 0) throw ConfigError(s.key_path("k"), "entries must be positive");
    for (auto n : c.N) {
      if (k > n) throw ConfigError(s.key_path("k"), "k must not exceed any N");
    }
  }
  c.t = s.num("t");
  c.dt_ode = s.num("dt_ode", c.dt_ode);
  if (!(c.t > 0.0) || !(c.dt_ode > 0.0)) throw ConfigError("oracle", "t and dt_ode must be positive");
  s.done();
  return c;
}

SpotCheckOptions parse_validation(Obj s) {
  SpotCheckOptions o;
  o.samples = s.integer("samples", o.samples);
  o.box = s.num("box", o.box);
  o.seed = s.integer("seed", o.seed);
  o.measure_size = s.integer("measure_size", o.measure_size);
  s.done();
  if (o.samples == 0 || !(o.box > 0.0)) throw ConfigError("validation", "samples and box must be positive");
  return o;
}

// Step size used to check the model when the file is loaded.
double nominal_dt(const ExperimentConfig& c) {
  if (c.scan) return c.scan->dt;
  if (c.simulate) return c.simulate->dt;
  return 1e-2;
}

}  // namespace

ConfigError::ConfigError(const std::string& where_, const std::string& what)
    : std::runtime_error(where_ + ": " + what), where(where_) {}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

json yaml_to_json(const std::string& text) {
  try {
    return node_to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1), e.msg);
  }
}

std::string ExperimentConfig::model_type() const {
  return model.is_object() && model.contains("type") && model.at("type").is_string() ? model.at("type").get<std::string>()
                                                                                    : "none";
}

ModelBundle ExperimentConfig::bundle(double dt) const {
  if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
  if (model.is_null()) throw ConfigError("model", "missing required section");
  Obj m(model, "model");
  const auto type = m.str("type");
  ModelBundle b;
  if (type == "mean_field") b.model = mean_field(m);
  else if (type == "delay") b.model = delay(m, dt);
  else if (type == "kinetic") b.model = kinetic(m, dt);
  else throw ConfigError("model.type", "unknown model type '" + type + "' (mean_field, delay, kinetic)");
  m.done();
  const auto D = static_cast<Eigen::Index>(b.state_dim());
  b.init_mean = init_mean.size() ? init_mean : Vector::Zero(D);
  b.init_cov = init_cov.size() ? init_cov : Matrix::Identity(D, D);
  require_size(b.init_mean, D, "init.mean");
  require_shape(b.init_cov, D, D, "init.cov");
  return b;
}

std::optional<LinearModelSpec> ExperimentConfig::linear_spec() const {
  if (model_type() != "mean_field") return std::nullopt;
  const auto b = bundle(nominal_dt(*this));
  try {
    return LinearModelSpec::from_model(std::get<MeanFieldModel>(b.model));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string ExperimentConfig::model_hash() const {
  json canonical = {{"model", model}};
  if (document.contains("init")) canonical["init"] = document.at("init");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

ExperimentConfig parse_config(const json& document) {
  Obj root(document, "");
  const auto& schema = root.at("schema");
  if (!schema.is_number_integer() || schema.get<std::int64_t>() != 1) {
    throw ConfigError("schema", "unsupported schema (expected 1)");
  }
  ExperimentConfig c;
  c.document = document;
  if (root.has("model")) {
    c.model = root.at("model");
    if (!c.model.is_object()) throw ConfigError("model", "expected a mapping");
  }
  if (root.has("init")) {
    Obj init = root.obj("init");
    if (init.has("mean")) c.init_mean = init.vec("mean");
    if (init.has("cov")) c.init_cov = init.mat("cov");
    init.done();
  }
  if (root.has("scan")) c.scan = parse_scan(root.obj("scan"));
  if (root.has("simulate")) c.simulate = parse_simulate(root.obj("simulate"));
  if (root.has("lln")) c.lln = parse_lln(root.obj("lln"));
  if (root.has("oracle")) c.oracle = parse_oracle(root.obj("oracle"));
  if (root.has("validation")) c.validation = parse_validation(root.obj("validation"));
  root.done();
  // Builds once so that model errors surface at load time.
  if (!c.model.is_null()) {
    c.bundle(nominal_dt(c));
    if (c.scan && c.simulate && c.scan->dt != c.simulate->dt) c.bundle(c.simulate->dt);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path.string(), "cannot open for reading");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(yaml_to_json(ss.str()));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.where, std::string(e.what()).substr(e.where.size() + 2));
  }
}

}  // namespace mfchaos
