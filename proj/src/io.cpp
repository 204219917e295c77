#include "mpmrf/io.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mpmrf/error.hpp"

namespace mpmrf {

namespace chr = std::chrono;
using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path.string());
  return in;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Next non-empty line that is not a `#` comment.
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (!t.empty() && t.front() != '#') return true;
  }
  return false;
}

template <class T>
T parse_number(std::string_view text, const std::string& where) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(Errc::ParseError, where + ": not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string at_line(const std::filesystem::path& path, int line) {
  return path.filename().string() + ":" + std::to_string(line);
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

CountTable read_counts_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!next_line(in, line)) throw Error(Errc::ParseError, path.string() + ": empty file");
  CountTable t;
  auto header = split_csv_line(line);
  if (header.size() < 2) throw Error(Errc::ParseError, path.string() + ": need station columns");
  t.stations.assign(header.begin() + 1, header.end());
  int lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(Errc::ParseError, at_line(path, lineno) + ": wrong number of fields");
    }
    t.periods.push_back(cells[0]);
    std::vector<int> row;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      const int c = parse_number<int>(cells[j], at_line(path, lineno));
      if (c < 0) throw Error(Errc::NegativeCount, at_line(path, lineno));
      row.push_back(c);
    }
    t.counts.push_back(std::move(row));
  }
  return t;
}

void write_counts_csv(std::ostream& os, const CountTable& table) {
  os << "period";
  for (const auto& s : table.stations) os << ',' << s;
  os << '\n';
  for (std::size_t i = 0; i < table.counts.size(); ++i) {
    os << (i < table.periods.size() ? table.periods[i] : std::to_string(i + 1));
    for (int c : table.counts[i]) os << ',' << c;
    os << '\n';
  }
}

Tree read_tree_csv(const std::filesystem::path& path, int num_vertices) {
  auto in = open_input(path);
  std::string line;
  if (!next_line(in, line) || split_csv_line(line) != std::vector<std::string>{"u", "v"}) {
    throw Error(Errc::ParseError, path.string() + ": expected header 'u,v'");
  }
  std::vector<std::pair<Vertex, Vertex>> edges;
  int top = 1;
  int lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw Error(Errc::ParseError, at_line(path, lineno) + ": need u,v");
    const Vertex a = parse_number<int>(cells[0], at_line(path, lineno));
    const Vertex b = parse_number<int>(cells[1], at_line(path, lineno));
    top = std::max({top, a, b});
    edges.emplace_back(a, b);
  }
  return build_tree(num_vertices > 0 ? num_vertices : top, edges);
}

void write_tree_csv(std::ostream& os, const Tree& tree) {
  os << "u,v\n";
  for (const auto& e : tree.edges()) os << e.u << ',' << e.v << '\n';
}

WeightedGraph read_weighted_graph_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!next_line(in, line)) throw Error(Errc::ParseError, path.string() + ": empty file");
  const auto labels = split_csv_line(line);
  const int n = static_cast<int>(labels.size());
  WeightedGraph g(n, labels);
  int row = 0;
  while (next_line(in, line)) {
    if (row == n) throw Error(Errc::ParseError, path.string() + ": more rows than columns");
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != n) {
      throw Error(Errc::ParseError, at_line(path, row + 2) + ": wrong number of fields");
    }
    for (int j = 0; j < n; ++j) {
      const double w = cells[j].empty() || cells[j] == "NA"
                           ? std::numeric_limits<double>::quiet_NaN()
                           : parse_number<double>(cells[j], at_line(path, row + 2));
      if (j >= row) g.set_weight(row + 1, j + 1, w);
    }
    ++row;
  }
  if (row != n) throw Error(Errc::ParseError, path.string() + ": matrix is not square");
  return g;
}

void write_weighted_graph_csv(std::ostream& os, const WeightedGraph& graph) {
  const int n = graph.num_vertices();
  const auto& labels = graph.labels();
  for (int j = 0; j < n; ++j) {
    os << (j ? "," : "") << (j < static_cast<int>(labels.size()) ? labels[j] : std::to_string(j + 1));
  }
  os << '\n';
  char buf[32];
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      const double w = graph.weight(i, j);
      if (j > 1) os << ',';
      if (std::isnan(w)) {
        os << "NA";
      } else {
        std::snprintf(buf, sizeof buf, "%.6f", w);
        os << buf;
      }
    }
    os << '\n';
  }
}

json params_to_json(const MpmrfParams& params) {
  json j;
  j["lambda"] = params.lambda;
  j["alpha"] = json::array();
  for (const auto& [e, a] : params.alpha) j["alpha"].push_back({{"u", e.u}, {"v", e.v}, {"value", a}});
  return j;
}

MpmrfParams params_from_json(const json& j) {
  try {
    MpmrfParams p;
    p.lambda = j.at("lambda").get<std::vector<double>>();
    for (const auto& a : j.at("alpha")) {
      const Edge e = Edge::of(a.at("u").get<int>(), a.at("v").get<int>());
      if (!p.alpha.emplace(e, a.at("value").get<double>()).second) {
        throw Error(Errc::DuplicateEdge, "alpha given twice for one edge");
      }
    }
    return p;
  } catch (const json::exception& ex) {
    throw Error(Errc::ParseError, std::string("parameter JSON: ") + ex.what());
  }
}

MpmrfParams read_params_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return params_from_json(json::parse(in));
  } catch (const json::exception& ex) {
    throw Error(Errc::ParseError, path.string() + ": " + ex.what());
  }
}

chr::year_month_day parse_date(std::string_view text) {
  const auto bad = [&] { return Error(Errc::ParseError, "bad date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  int y = 0;
  unsigned m = 0, d = 0;
  try {
    y = parse_number<int>(text.substr(0, 4), "date");
    m = parse_number<unsigned>(text.substr(5, 2), "date");
    d = parse_number<unsigned>(text.substr(8, 2), "date");
  } catch (const Error&) {
    throw bad();
  }
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) throw bad();
  return ymd;
}

std::string format_date(const chr::year_month_day& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::vector<DailyRecord> read_daily_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!next_line(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"station", "date", "precip_mm"}) {
    throw Error(Errc::ParseError, path.string() + ": expected header 'station,date,precip_mm'");
  }
  std::vector<DailyRecord> out;
  int lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw Error(Errc::ParseError, at_line(path, lineno) + ": need 3 fields");
    DailyRecord r{cells[0], {}, {}};
    try {
      r.date = parse_date(cells[1]);
    } catch (const Error& e) {
      throw Error(Errc::ParseError, at_line(path, lineno) + ": " + e.what());
    }
    if (!cells[2].empty()) r.value = parse_number<double>(cells[2], at_line(path, lineno));
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

LatticePmf mixed_erlang_on_lattice(const MixedErlang& me, double h, double tail_tolerance) {
  double wsum = 0.0;
  for (double w : me.weights) {
    if (w < 0.0) throw Error(Errc::NormalizationError, "negative mixed Erlang weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw Error(Errc::NormalizationError, "weights must sum to 1");
  if (!(me.beta > 0.0)) throw Error(Errc::InvalidRate, "beta must be positive");
  const auto cdf = [&](double x) {
    double f = 0.0;
    for (std::size_t k = 0; k < me.weights.size(); ++k) {
      if (me.weights[k] > 0.0) f += me.weights[k] * boost::math::gamma_p(double(k + 1), me.beta * x);
    }
    return f;
  };
  LatticePmf out{h, {0.0}};
  double prev = 0.0;
  constexpr std::size_t kMaxCells = 50'000'000;
  for (std::size_t k = 1; 1.0 - prev > tail_tolerance; ++k) {
    if (k > kMaxCells) throw Error(Errc::TailMassTooLarge, "mixed Erlang lattice too long");
    const double f = cdf(static_cast<double>(k) * h);
    out.p.push_back(f - prev);
    prev = f;
  }
  out.p.back() += 1.0 - prev;
  return out;
}

}  // namespace

LatticePmf severity_from_json(const json& spec, double h, double tail_tolerance) {
  try {
    const auto type = spec.at("type").get<std::string>();
    if (type == "dgpd") {
      const Gpd g{spec.at("xi").get<double>(), spec.at("sigma").get<double>(),
                  spec.at("u").get<double>()};
      return dgpd_pmf(g, h, tail_tolerance);
    }
    if (type == "discrete") {
      const double step = spec.value("h", h);
      if (std::abs(step - h) > 1e-12 * h) {
        throw Error(Errc::LatticeMismatch, "discrete severity step differs from the lattice step");
      }
      const auto points = spec.at("points").get<std::vector<double>>();
      const auto masses = spec.at("masses").get<std::vector<double>>();
      return discrete_pmf(points, masses, h);
    }
    if (type == "mixed_erlang") {
      const MixedErlang me{spec.at("beta").get<double>(),
                           spec.at("weights").get<std::vector<double>>()};
      return mixed_erlang_on_lattice(me, h, tail_tolerance);
    }
    if (type == "negbinom") {
      const double r = spec.at("r").get<double>();
      const double p = spec.at("p").get<double>();
      if (!(r > 0.0) || !(p > 0.0 && p <= 1.0)) {
        throw Error(Errc::ConfigError, "negbinom needs r > 0 and 0 < p <= 1");
      }
      std::size_t n = 64;
      LatticePmf pmf = negbinom_pmf(r, p, n);
      while (1.0 - pmf.total() > tail_tolerance) pmf = negbinom_pmf(r, p, n *= 2);
      pmf.p.back() += 1.0 - pmf.total();
      pmf.h = h;
      return pmf;
    }
    throw Error(Errc::ConfigError, "unknown severity type '" + type + "'");
  } catch (const json::exception& ex) {
    throw Error(Errc::ConfigError, std::string("severity spec: ") + ex.what());
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string metadata_line(std::uint64_t config_hash, std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash));
  std::ostringstream os;
  os << "# config_hash=" << buf << " seed=" << seed << " version=" << kVersion;
  return os.str();
}

}  // namespace mpmrf
