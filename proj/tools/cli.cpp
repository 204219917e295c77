#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mpmrf/allocation.hpp"
#include "mpmrf/asymptotics.hpp"
#include "mpmrf/error.hpp"
#include "mpmrf/estimation.hpp"
#include "mpmrf/io.hpp"

namespace mpmrf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Config {
  json j;
  fs::path base;
  fs::path out;
  std::uint64_t hash = 0;
  std::uint64_t seed = 1;

  bool has(const char* key) const { return j.contains(key) && !j.at(key).is_null(); }
  fs::path path(const json& value) const {
    const fs::path p = value.get<std::string>();
    return p.is_absolute() ? p : base / p;
  }
  /// Value stored inline or in a JSON file named by a string.
  json inline_or_file(const char* key) const {
    const json& v = j.at(key);
    if (!v.is_string()) return v;
    std::ifstream in(path(v));
    if (!in) throw Error(Errc::ConfigError, "cannot open " + path(v).string());
    try {
      return json::parse(in);
    } catch (const json::exception& ex) {
      throw Error(Errc::ParseError, path(v).string() + ": " + ex.what());
    }
  }
};

Config load_config(const Invocation& inv) {
  std::ifstream in(inv.config, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot open config " + inv.config.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Config cfg;
  try {
    cfg.j = json::parse(text);
  } catch (const json::exception& ex) {
    throw Error(Errc::ConfigError, inv.config.string() + ": " + ex.what());
  }
  if (!cfg.j.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
  cfg.base = inv.config.parent_path();
  cfg.hash = fnv1a(text);
  cfg.seed = cfg.j.value("seed", std::uint64_t{1});
  if (inv.seed) cfg.seed = *inv.seed;
  if (inv.out) {
    cfg.out = *inv.out;
  } else {
    cfg.out = cfg.has("output_dir") ? cfg.path(cfg.j.at("output_dir")) : fs::path("out");
  }
  fs::create_directories(cfg.out);
  return cfg;
}

std::ofstream open_output(const Config& cfg, const std::string& name) {
  std::ofstream os(cfg.out / name);
  if (!os) throw Error(Errc::ConfigError, "cannot write " + (cfg.out / name).string());
  os << metadata_line(cfg.hash, cfg.seed) << '\n';
  return os;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

void write_json(const Config& cfg, const std::string& name, json body) {
  char hex[24];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(cfg.hash));
  body["metadata"] = {{"config_hash", hex}, {"seed", cfg.seed}, {"version", kVersion}};
  std::ofstream os(cfg.out / name);
  if (!os) throw Error(Errc::ConfigError, "cannot write " + (cfg.out / name).string());
  os << body.dump(2) << '\n';
}

std::vector<double> read_kappas(const Config& cfg, std::vector<double> fallback) {
  std::vector<double> k = cfg.has("kappas") ? cfg.j.at("kappas").get<std::vector<double>>()
                                            : std::move(fallback);
  for (double x : k) {
    if (!(x >= 0.0 && x < 1.0)) throw Error(Errc::ConfigError, "kappa must lie in [0, 1)");
  }
  return k;
}

double read_step(const Config& cfg) {
  const double h = cfg.j.value("h", 1.0);
  if (!(h > 0.0)) throw Error(Errc::ConfigError, "h must be positive");
  return h;
}

AggregateOptions read_aggregate_options(const Config& cfg) {
  AggregateOptions opts;
  if (cfg.has("n_fft") && !cfg.j.at("n_fft").is_string()) {
    opts.n_fft = cfg.j.at("n_fft").get<std::size_t>();
  } else if (cfg.has("n_fft") && cfg.j.at("n_fft").get<std::string>() != "auto") {
    throw Error(Errc::ConfigError, "n_fft must be a power of two or \"auto\"");
  }
  opts.tail_tolerance = cfg.j.value("tail_tolerance", opts.tail_tolerance);
  return opts;
}

CountTable counts_from_events(const EventSeries& ev) {
  CountTable t;
  t.stations = ev.stations;
  for (int y : ev.years) t.periods.push_back(std::to_string(y));
  t.counts = ev.counts;
  return t;
}

EventSeries run_decluster(const Config& cfg) {
  if (!cfg.has("daily")) throw Error(Errc::ConfigError, "missing 'daily'");
  if (!cfg.has("thresholds") || !cfg.j.at("thresholds").is_object()) {
    throw Error(Errc::ConfigError, "'thresholds' must map station to threshold");
  }
  const auto records = read_daily_csv(cfg.path(cfg.j.at("daily")));
  const auto thresholds = cfg.j.at("thresholds").get<std::map<std::string, double>>();
  DeclusterOptions opts;
  opts.max_missing_fraction = cfg.j.value("max_missing_fraction", opts.max_missing_fraction);
  opts.season_only = cfg.j.value("season_only", opts.season_only);
  return decluster_stations(records, thresholds, opts);
}

/// Counts from a counts CSV or from declustering daily data.
CountTable load_counts(const Config& cfg) {
  if (cfg.has("counts") && cfg.has("daily")) {
    throw Error(Errc::ConfigError, "give either 'counts' or 'daily', not both");
  }
  if (cfg.has("counts")) return read_counts_csv(cfg.path(cfg.j.at("counts")));
  return counts_from_events(run_decluster(cfg));
}

bool has_data_source(const Config& cfg) { return cfg.has("counts") || cfg.has("daily"); }

void require_single_source(const Config& cfg) {
  if (cfg.has("params") && has_data_source(cfg)) {
    throw Error(Errc::ConfigError,
                "both a parameter file and data to fit were given; keep exactly one");
  }
  if (!cfg.has("params") && !has_data_source(cfg)) {
    throw Error(Errc::ConfigError, "no frequency parameters: give 'params', 'counts' or 'daily'");
  }
}

Tree explicit_tree(const Config& cfg, int d) {
  const json& t = cfg.j.at("tree");
  if (t.is_string()) return read_tree_csv(cfg.path(t), d);
  try {
    return build_tree(d, t.get<std::vector<std::pair<Vertex, Vertex>>>());
  } catch (const json::exception& ex) {
    throw Error(Errc::ConfigError, std::string("tree: ") + ex.what());
  }
}

bool tree_is_mst(const Config& cfg) {
  return !cfg.has("tree") || (cfg.j.at("tree").is_string() && cfg.j.at("tree") == "mst");
}

struct FittedModel {
  CountTable data;
  Tree tree;
  FitResult fit;
  std::optional<WeightedGraph> correlation;
};

FittedModel fit_from_config(const Config& cfg) {
  FittedModel m;
  m.data = load_counts(cfg);
  const int d = static_cast<int>(m.data.stations.size());
  m.correlation = pearson_correlation_matrix(m.data.counts, m.data.stations);
  m.tree = tree_is_mst(cfg) ? kruskal_mst(*m.correlation) : explicit_tree(cfg, d);
  FitOptions fo;
  fo.max_restarts = cfg.j.value("max_restarts", fo.max_restarts);
  m.fit = fit_mpmrf(m.tree, m.data.counts, fo);
  return m;
}

struct Model {
  MpmrfParams params;
  Tree tree;
  std::vector<LatticePmf> severities;
};

Model load_model(const Config& cfg) {
  require_single_source(cfg);
  Model m;
  if (cfg.has("params")) {
    m.params = params_from_json(cfg.inline_or_file("params"));
    if (tree_is_mst(cfg)) {
      throw Error(Errc::ConfigError, "an explicit tree is required with a parameter file");
    }
    m.tree = explicit_tree(cfg, m.params.dimension());
  } else {
    auto fitted = fit_from_config(cfg);
    m.params = fitted.fit.params;
    m.tree = fitted.tree;
  }
  require_valid(m.params, m.tree);
  if (!cfg.has("severities")) throw Error(Errc::ConfigError, "missing 'severities'");
  const json sev = cfg.inline_or_file("severities");
  const double h = read_step(cfg);
  const int d = m.params.dimension();
  if (sev.is_object()) {
    m.severities.assign(d, severity_from_json(sev, h));
  } else if (sev.is_array() && static_cast<int>(sev.size()) == d) {
    for (const auto& s : sev) m.severities.push_back(severity_from_json(s, h));
  } else {
    throw Error(Errc::ConfigError, "need one severity per vertex or a single shared severity");
  }
  return m;
}

}  // namespace

int cmd_decluster_impl(const Config& cfg) {
  const EventSeries ev = run_decluster(cfg);
  {
    auto os = open_output(cfg, "counts.csv");
    os << "station,year,count\n";
    for (std::size_t j = 0; j < ev.stations.size(); ++j) {
      for (std::size_t i = 0; i < ev.years.size(); ++i) {
        os << ev.stations[j] << ',' << ev.years[i] << ',' << ev.counts[i][j] << '\n';
      }
    }
  }
  {
    auto os = open_output(cfg, "counts_wide.csv");
    write_counts_csv(os, counts_from_events(ev));
  }
  {
    auto os = open_output(cfg, "events.csv");
    os << "station,event_date,severity_mm\n";
    for (const auto& st : ev.per_station) {
      for (const auto& e : st.events) {
        os << st.station << ',' << format_date(e.start) << ',' << num(e.severity) << '\n';
      }
    }
  }
  {
    auto os = open_output(cfg, "cluster_sizes.csv");
    os << "station,length_days,clusters\n";
    for (const auto& st : ev.per_station) {
      for (const auto& [len, n] : st.cluster_sizes) os << st.station << ',' << len << ',' << n << '\n';
    }
  }
  json summary = {{"stations", ev.stations},
                  {"years", ev.years},
                  {"dropped_years", ev.dropped_years}};
  if (ev.years.size() >= 20) {
    auto os = open_output(cfg, "gof.csv");
    os << "station,statistic,bins,dof,p_value\n";
    for (std::size_t j = 0; j < ev.stations.size(); ++j) {
      std::vector<int> col;
      for (const auto& row : ev.counts) col.push_back(row[j]);
      const auto g = poisson_gof(col);
      os << ev.stations[j] << ',' << num(g.statistic) << ',' << g.bins << ',' << g.dof << ','
         << num(g.p_value) << '\n';
    }
  } else {
    summary["gof"] = "skipped: fewer than 20 retained years";
  }
  write_json(cfg, "decluster_summary.json", summary);
  return kSuccess;
}

int cmd_fit_impl(const Config& cfg) {
  if (cfg.has("params")) {
    throw Error(Errc::ConfigError,
                "both a parameter file and data to fit were given; keep exactly one");
  }
  if (!has_data_source(cfg)) throw Error(Errc::ConfigError, "fit needs 'counts' or 'daily'");
  const FittedModel m = fit_from_config(cfg);
  const int d = m.tree.num_vertices();

  json out;
  out["stations"] = m.data.stations;
  out["params"] = params_to_json(m.fit.params);
  out["loglik"] = m.fit.loglik;
  out["loglik_init"] = m.fit.loglik_init;
  out["n_params"] = m.fit.n_params;
  out["n_obs"] = m.fit.n_obs;
  out["aic"] = m.fit.criteria.aic;
  out["aicc"] = m.fit.criteria.aicc;
  out["bic"] = m.fit.criteria.bic;
  out["converged"] = m.fit.converged;
  out["evaluations"] = m.fit.evaluations;
  std::vector<double> means(d, 0.0);
  for (const auto& row : m.data.counts) {
    for (int j = 0; j < d; ++j) means[j] += row[j];
  }
  for (auto& x : means) x /= static_cast<double>(m.data.counts.size());
  out["empirical_means"] = means;

  const int n_boot = cfg.j.value("bootstrap_replicates", 0);
  if (n_boot > 0) {
    BootstrapOptions bo;
    const std::string kind = cfg.j.value("bootstrap_kind", std::string("parametric"));
    if (kind == "resample_years") {
      bo.kind = BootstrapKind::ResampleYears;
      bo.data = &m.data.counts;
    } else if (kind != "parametric") {
      throw Error(Errc::ConfigError, "bootstrap_kind must be parametric or resample_years");
    }
    const auto br = bootstrap_se(m.tree, m.fit.params, m.fit.n_obs, n_boot, cfg.seed, bo);
    json se_alpha = json::array();
    for (const auto& [e, s] : br.se_alpha) se_alpha.push_back({{"u", e.u}, {"v", e.v}, {"value", s}});
    out["bootstrap"] = {{"kind", kind},
                        {"replicates", br.replicates},
                        {"failures", br.failures},
                        {"se_lambda", br.se_lambda},
                        {"se_alpha", se_alpha}};
  }
  write_json(cfg, "fit.json", out);
  {
    auto os = open_output(cfg, "tree.csv");
    write_tree_csv(os, m.tree);
  }
  {
    auto os = open_output(cfg, "correlation_empirical.csv");
    write_weighted_graph_csv(os, *m.correlation);
  }
  {
    const auto rho = correlation_matrix(m.fit.params, m.tree);
    WeightedGraph g(d, m.data.stations);
    for (int a = 1; a <= d; ++a) {
      for (int b = a; b <= d; ++b) g.set_weight(a, b, rho[a - 1][b - 1]);
    }
    auto os = open_output(cfg, "correlation_model.csv");
    write_weighted_graph_csv(os, g);
  }
  return kSuccess;
}

int cmd_aggregate_impl(const Config& cfg) {
  const Model m = load_model(cfg);
  const auto kappas = read_kappas(cfg, {0.8, 0.9, 0.95, 0.99});
  const auto agg = aggregate_pmf_fft(m.params, m.tree, m.severities, read_aggregate_options(cfg));
  {
    auto os = open_output(cfg, "aggregate_pmf.csv");
    os << "x,pmf,cdf\n";
    for (std::size_t k = 0; k < agg.pmf.size(); ++k) {
      os << num(k * agg.pmf.h) << ',' << num(agg.pmf.p[k]) << ',' << num(agg.cdf[k]) << '\n';
      if (agg.cdf[k] >= 1.0 - 1e-15) break;
    }
  }
  {
    auto os = open_output(cfg, "risk_measures.csv");
    os << "kappa,var,tvar\n";
    for (double k : kappas) {
      const auto rm = var_tvar(agg, k);
      os << num(k) << ',' << num(rm.var) << ',' << num(rm.tvar) << '\n';
    }
  }
  write_json(cfg, "aggregate_summary.json",
             {{"mean_fft", agg.pmf.mean()},
              {"mean_closed_form", aggregate_mean(m.params, m.severities)},
              {"variance_fft", agg.pmf.variance()},
              {"variance_closed_form", aggregate_variance(m.params, m.tree, m.severities)},
              {"n_fft", agg.n_fft},
              {"step", agg.pmf.h},
              {"tail_mass", agg.tail_mass}});
  return kSuccess;
}

int cmd_allocate_impl(const Config& cfg) {
  const Model m = load_model(cfg);
  const auto kappas = read_kappas(cfg, {0.0, 0.5, 0.8, 0.9, 0.95, 0.99});
  const AllocationEngine engine(m.params, m.tree, m.severities, read_aggregate_options(cfg));
  const auto allocs = engine.all_expected_allocations();
  {
    auto os = open_output(cfg, "allocation.csv");
    os << "vertex,kappa,euler_tvar,cov_tvar,euler_share_pct,cov_share_pct\n";
    for (double k : kappas) {
      const auto rep = allocation_report(engine, allocs, k);
      for (const auto& r : rep.rows) {
        os << r.vertex << ',' << num(k) << ',' << num(r.euler) << ',' << num(r.covariance) << ','
           << num(r.euler_share_pct) << ',' << num(r.covariance_share_pct) << '\n';
      }
    }
  }
  if (cfg.j.value("conditional_means", false)) {
    const auto& agg = engine.aggregate();
    auto os = open_output(cfg, "conditional_means.csv");
    os << "k,x";
    for (const auto& a : allocs) os << ",Ev" << a.vertex;
    os << '\n';
    for (std::size_t k = 0; k < agg.pmf.size(); ++k) {
      if (agg.pmf.p[k] < 1e-14) continue;
      os << k << ',' << num(k * agg.pmf.h);
      for (const auto& a : allocs) os << ',' << num(a.a[k] / agg.pmf.p[k]);
      os << '\n';
      if (agg.cdf[k] >= 1.0 - 1e-12) break;
    }
  }
  return kSuccess;
}

int cmd_asymptotics_impl(const Config& cfg) {
  bool did_something = false;
  if (cfg.has("splash")) {
    did_something = true;
    const json& s = cfg.j.at("splash");
    const SplashParams sp{s.value("lambda_r", 1.0), s.value("alpha", 0.5), s.value("chi", 3)};
    SplashOptions so;
    so.allow_supercritical = s.value("allow_supercritical", false);
    if (!splash_is_finite(sp) && !so.allow_supercritical) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "(chi-1)*alpha^2 = %.6g exceeds 1; alpha must not exceed %.6g for chi = %d",
                    (sp.chi - 1) * sp.alpha * sp.alpha, 1.0 / std::sqrt(sp.chi - 1.0), sp.chi);
      throw Error(Errc::SupercriticalRegime, buf);
    }
    const int x_max = s.value("x_max", 30);
    const std::int64_t n = s.value("replications", std::int64_t{100000});
    const auto closed = splash_total_pmf_closed_form(sp, x_max, so);
    const auto sim = splash_simulate(sp, n, cfg.seed, s.value("cap", std::int64_t{10'000'000}), so);
    std::vector<double> freq(x_max + 1, 0.0);
    for (auto t : sim.totals) {
      if (t <= x_max) freq[t] += 1.0;
    }
    auto os = open_output(cfg, "splash_pmf.csv");
    os << "x,pmf_closed_form,pmf_mc,se\n";
    const double nd = static_cast<double>(sim.replications);
    for (int x = 0; x <= x_max; ++x) {
      const double p = freq[x] / nd;
      os << x << ',' << num(closed[x]) << ',' << num(p) << ',' << num(std::sqrt(p * (1 - p) / nd))
         << '\n';
    }
  }
  if (cfg.has("gp_limit")) {
    did_something = true;
    const json& g = cfg.j.at("gp_limit");
    const auto rep = gp_limit_check(g.value("lambda_r", 1.0), g.value("theta", 0.5),
                                    g.value("chi", 200),
                                    g.value("replications", std::int64_t{100000}), cfg.seed);
    auto os = open_output(cfg, "gp_limit.csv");
    os << "chi,alpha,tv_closed_form,tv_simulated,replications,cap_exceeded\n";
    os << rep.chi << ',' << num(rep.alpha) << ',' << num(rep.tv_closed_form) << ','
       << num(rep.tv_simulated) << ',' << rep.replications << ',' << rep.cap_exceeded << '\n';
  }
  if (cfg.has("lln")) {
    did_something = true;
    const json& l = cfg.j.at("lln");
    const double lambda = l.value("lambda", 1.0);
    const double alpha = l.value("alpha", 0.5);
    const double h = l.value("h", 1.0);
    if (!l.contains("severity")) throw Error(Errc::ConfigError, "lln needs a severity");
    const LatticePmf sev = severity_from_json(l.at("severity"), h);
    const auto depths = l.value("binary_depths", std::vector<int>{2, 3, 4, 5, 6, 7, 8});
    const bool curves = l.value("cdf", false);
    std::vector<std::pair<std::string, std::vector<Tree>>> families(2);
    families[0].first = "binary";
    families[1].first = "star";
    for (int dep : depths) {
      const Tree b = binary_tree(dep).base();
      families[1].second.push_back(star_tree(b.num_vertices()).base());
      families[0].second.push_back(b);
    }
    const ParamsRule rule = [&](const Tree& t) { return homogeneous_params(t, lambda, alpha); };
    for (const auto& [name, trees] : families) {
      auto os = open_output(cfg, "lln_" + name + ".csv");
      os << "tree_size,var_avg\n";
      for (const auto& t : trees) {
        const std::vector<LatticePmf> sevs(t.num_vertices(), sev);
        os << t.num_vertices() << ',' << num(variance_of_average(rule(t), t, sevs)) << '\n';
      }
      if (curves) {
        const auto dist = average_loss_distribution(trees, rule, sev);
        auto cs = open_output(cfg, "lln_cdf_" + name + ".csv");
        cs << "tree_size,x,cdf\n";
        for (const auto& c : dist) {
          for (std::size_t k = 0; k < c.cdf.size(); ++k) {
            if (c.cdf[k] < 1e-6) continue;
            cs << c.d << ',' << num(k * c.step) << ',' << num(c.cdf[k]) << '\n';
            if (c.cdf[k] > 1.0 - 1e-6) break;
          }
        }
      }
    }
  }
  if (!did_something) {
    throw Error(Errc::ConfigError, "asymptotics config needs 'splash', 'gp_limit' or 'lln'");
  }
  return kSuccess;
}

namespace {

int guarded(const Invocation& inv, int (*body)(const Config&)) {
  fs::path out_dir = inv.out.value_or("out");
  std::uint64_t hash = 0;
  std::uint64_t seed = inv.seed.value_or(1);
  try {
    const Config cfg = load_config(inv);
    out_dir = cfg.out;
    hash = cfg.hash;
    seed = cfg.seed;
    return body(cfg);
  } catch (const Error& e) {
    std::cerr << "mpmrf: " << e.what() << '\n';
    if (e.code() == Errc::ConfigError || e.code() == Errc::ParseError) return kConfigError;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream diag(out_dir / "diagnostics.txt");
    diag << metadata_line(hash, seed) << '\n'
         << "error=" << to_string(e.code()) << '\n'
         << "message=" << e.what() << '\n';
    return kNumericalFailure;
  } catch (const json::exception& e) {
    std::cerr << "mpmrf: config: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "mpmrf: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

int cmd_decluster(const Invocation& inv) { return guarded(inv, cmd_decluster_impl); }
int cmd_fit(const Invocation& inv) { return guarded(inv, cmd_fit_impl); }
int cmd_aggregate(const Invocation& inv) { return guarded(inv, cmd_aggregate_impl); }
int cmd_allocate(const Invocation& inv) { return guarded(inv, cmd_allocate_impl); }
int cmd_asymptotics(const Invocation& inv) { return guarded(inv, cmd_asymptotics_impl); }

int run(int argc, char** argv) {
  CLI::App app{"Tree-structured Poisson frequency models for dependent compound losses"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Invocation inv;
  std::uint64_t seed = 0;
  std::string out;
  int (*selected)(const Invocation&) = nullptr;
  const std::pair<const char*, int (*)(const Invocation&)> commands[] = {
      {"decluster", cmd_decluster}, {"fit", cmd_fit},
      {"aggregate", cmd_aggregate}, {"allocate", cmd_allocate},
      {"asymptotics", cmd_asymptotics}};
  const char* help[] = {"Cluster daily exceedances into events and yearly counts",
                        "Fit the frequency model and its tree",
                        "Aggregate loss pmf, cdf and risk measures",
                        "Euler and covariance TVaR allocations",
                        "Splash model and large-portfolio diagnostics"};
  int i = 0;
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help[i++]);
    sub->add_option("--config", inv.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--out", out, "Override the output directory");
    sub->callback([&selected, fn = fn] { selected = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--out")) inv.out = out;
  }
  return selected(inv);
}

}  // namespace mpmrf::cli
