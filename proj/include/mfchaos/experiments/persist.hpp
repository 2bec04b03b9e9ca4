#pragma once

// On-disk formats. Numbers are written with the shortest representation that
// reads back to the same double, so a reload compares equal and identical
// runs produce identical bytes.

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mfchaos/experiments/scan.hpp"

namespace mfchaos {

struct ResultRow {
  std::string param;
  double stat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_replicas = 0;
  bool operator==(const ResultRow&) const = default;
};

inline constexpr const char* kResultsHeader = "param,stat,ci_low,ci_high,n_replicas";
inline constexpr const char* kGapHeader = "t,gap_mean,gap_ci_low,gap_ci_high";

std::string format_number(double v);

std::vector<ResultRow> result_rows(const NScanResult& r);
std::vector<ResultRow> result_rows(const LongtimeResult& r);
std::vector<ResultRow> result_rows(const LlnResult& r);

// All writers throw std::runtime_error naming the path on I/O failure.
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);
void write_gap_csv(const std::filesystem::path& path, const GapSeries& series);
// Whitespace-separated columns with a '#' header, for gnuplot.
void write_gnuplot(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

nlohmann::json to_json(const FitResult& f);
nlohmann::json to_json(const McEstimate& e);
nlohmann::json to_json(const ScanConfig& c);
nlohmann::json to_json(const NScanResult& r);
nlohmann::json to_json(const LongtimeResult& r);
nlohmann::json to_json(const LlnResult& r);

}  // namespace mfchaos
