#include "mfchaos/experiments/persist.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mfchaos {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return f;
}

void finish(std::ofstream& f, const std::filesystem::path& path) {
  f.flush();
  if (!f) throw std::runtime_error("write to '" + path.string() + "' failed");
}

double parse_number(const std::string& s, const std::filesystem::path& path) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("'" + path.string() + "': bad number '" + s + "'");
  }
  return v;
}

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<ResultRow> result_rows(const NScanResult& r) {
  std::vector<ResultRow> rows;
  for (const auto& row : r.rows) {
    rows.push_back({std::to_string(row.N), row.stat.mean, row.stat.ci_low, row.stat.ci_high, row.stat.samples});
  }
  return rows;
}

std::vector<ResultRow> result_rows(const LongtimeResult& r) {
  // One row per N: the fitted decay rate with a normal interval from its
  // standard error.
  std::vector<ResultRow> rows;
  for (const auto& row : r.rows) {
    const double se = row.decay.fit.std_error;
    const double rate = row.decay.ok ? row.decay.rate : std::nan("");
    const std::size_t n = row.transient.gap.empty() ? 0 : row.transient.gap.front().samples;
    rows.push_back({std::to_string(row.N), rate, rate - 1.96 * se, rate + 1.96 * se, n});
  }
  return rows;
}

std::vector<ResultRow> result_rows(const LlnResult& r) {
  std::vector<ResultRow> rows;
  for (const auto& row : r.rows) {
    rows.push_back({std::to_string(row.N), row.estimate.mean, row.estimate.ci_low, row.estimate.ci_high,
                    row.estimate.samples});
  }
  return rows;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  auto f = open_out(path);
  f << kResultsHeader << '\n';
  for (const auto& r : rows) {
    f << r.param << ',' << format_number(r.stat) << ',' << format_number(r.ci_low) << ','
      << format_number(r.ci_high) << ',' << r.n_replicas << '\n';
  }
  finish(f, path);
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(f, line) || line != kResultsHeader) {
    throw std::runtime_error("'" + path.string() + "': unexpected header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw std::runtime_error("'" + path.string() + "': expected 5 columns in '" + line + "'");
    ResultRow r;
    r.param = cells[0];
    r.stat = parse_number(cells[1], path);
    r.ci_low = parse_number(cells[2], path);
    r.ci_high = parse_number(cells[3], path);
    r.n_replicas = static_cast<std::size_t>(parse_number(cells[4], path));
    rows.push_back(r);
  }
  return rows;
}

void write_gap_csv(const std::filesystem::path& path, const GapSeries& series) {
  auto f = open_out(path);
  f << kGapHeader << '\n';
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    const auto& g = series.gap[i];
    f << format_number(series.t[i]) << ',' << format_number(g.mean) << ',' << format_number(g.ci_low) << ','
      << format_number(g.ci_high) << '\n';
  }
  finish(f, path);
}

void write_gnuplot(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  auto f = open_out(path);
  f << "# param stat ci_low ci_high n_replicas\n";
  for (const auto& r : rows) {
    f << r.param << ' ' << format_number(r.stat) << ' ' << format_number(r.ci_low) << ' '
      << format_number(r.ci_high) << ' ' << r.n_replicas << '\n';
  }
  finish(f, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
  finish(f, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + path.string() + "': " + e.what());
  }
}

nlohmann::json to_json(const FitResult& f) {
  return {{"slope", number(f.slope)},
          {"intercept", number(f.intercept)},
          {"std_error", number(f.std_error)},
          {"r_squared", number(f.r_squared)},
          {"points", f.points}};
}

nlohmann::json to_json(const McEstimate& e) {
  return {{"mean", number(e.mean)},
          {"std_error", number(e.std_error)},
          {"ci_low", number(e.ci_low)},
          {"ci_high", number(e.ci_high)},
          {"samples", e.samples}};
}

nlohmann::json to_json(const ScanConfig& c) {
  return {{"N", c.N},
          {"k", c.k == 0 ? nlohmann::json("all") : nlohmann::json(c.k)},
          {"T", c.T},
          {"dt", c.dt},
          {"record_times", c.record_times},
          {"replicas", c.replicas},
          {"seed", c.seed},
          {"backend", to_string(c.backend)},
          {"reference_size", c.reference_size},
          {"table_spacing", c.table_spacing},
          {"coupling", to_string(c.coupling)},
          {"offset", c.offset},
          {"statistic", to_string(c.statistic)},
          {"statistic_time", c.statistic_time}};
}

nlohmann::json to_json(const NScanResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json gaps = nlohmann::json::array(), segs = nlohmann::json::array();
    for (const auto& g : row.gap_at) gaps.push_back(to_json(g));
    for (const auto& g : row.segment_gap_at) segs.push_back(to_json(g));
    rows.push_back({{"N", row.N}, {"stat", to_json(row.stat)}, {"gap_at", gaps}, {"segment_gap_at", segs}});
  }
  return {{"kind", "scan_n"}, {"backend", r.backend}, {"record_times", r.record_times}, {"fit", to_json(r.fit)},
          {"rows", rows}};
}

nlohmann::json to_json(const LongtimeResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"N", row.N},
                    {"plateau", number(row.decay.plateau)},
                    {"fitted_rate", row.decay.ok ? number(row.decay.rate) : nlohmann::json()},
                    {"fit", to_json(row.decay.fit)},
                    {"window_points", row.decay.window.size()},
                    {"plateau_reached", row.decay.plateau_reached},
                    {"plateau_times_N", number(row.plateau_times_N)}});
  }
  return {{"kind", "scan_t"},
          {"backend", r.backend},
          {"theoretical_rate", number(r.theoretical_rate)},
          {"fitted_rate", number(r.fitted_rate)},
          {"rate_pass", r.rate_pass},
          {"plateau_ratio", number(r.plateau_ratio)},
          {"verdict", r.verdict},
          {"rows", rows}};
}

nlohmann::json to_json(const LlnResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"N", row.N}, {"estimate", to_json(row.estimate)}, {"scaled", number(row.scaled)}});
  }
  return {{"kind", "lln"}, {"flatness", number(r.flatness)}, {"rows", rows}};
}

}  // namespace mfchaos
