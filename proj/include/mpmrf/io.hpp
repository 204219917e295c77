#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mpmrf/estimation.hpp"
#include "mpmrf/severity.hpp"

namespace mpmrf {

inline constexpr std::string_view kVersion = "0.1.0";

/// Comma-separated fields, surrounding blanks trimmed. No quoting.
std::vector<std::string> split_csv_line(std::string_view line);

struct CountTable {
  std::vector<std::string> periods;
  std::vector<std::string> stations;
  CountMatrix counts;  // periods x stations
};

/// Header `period,<station>...`, one row per period. Throws ParseError.
CountTable read_counts_csv(const std::filesystem::path& path);
void write_counts_csv(std::ostream& os, const CountTable& table);

/// Header `u,v`. The vertex count is the largest label unless given.
Tree read_tree_csv(const std::filesystem::path& path, int num_vertices = 0);
void write_tree_csv(std::ostream& os, const Tree& tree);

/// Dense matrix with a header row of station identifiers.
WeightedGraph read_weighted_graph_csv(const std::filesystem::path& path);
void write_weighted_graph_csv(std::ostream& os, const WeightedGraph& graph);

/// {"lambda":[...], "alpha":[{"u":..,"v":..,"value":..}]}
nlohmann::json params_to_json(const MpmrfParams& params);
MpmrfParams params_from_json(const nlohmann::json& j);
MpmrfParams read_params_json(const std::filesystem::path& path);

std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(const std::chrono::year_month_day& date);

/// Long format `station,date,precip_mm`; an empty value cell means missing.
std::vector<DailyRecord> read_daily_csv(const std::filesystem::path& path);

/// {"type": "dgpd" | "discrete" | "mixed_erlang" | "negbinom", ...}
/// on the lattice of step h. Mixed Erlang mass on ((k-1)h, kh] goes to kh.
LatticePmf severity_from_json(const nlohmann::json& spec, double h,
                              double tail_tolerance = 1e-9);

std::uint64_t fnv1a(std::string_view bytes);
/// `# config_hash=<hex> seed=<n> version=<v>`
std::string metadata_line(std::uint64_t config_hash, std::uint64_t seed);

}  // namespace mpmrf
