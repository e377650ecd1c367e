#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hjacobi.hpp"

namespace hjlab {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 2;
inline constexpr int kNumerical = 3;

namespace detail {

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw hjacobi::ValidationError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw hjacobi::ValidationError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw hjacobi::ValidationError(std::string("key '") + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw hjacobi::ValidationError("missing key '" + std::string(key) + "' in " + where);
  return get_or<T>(j, key, T{});
}

inline json margins_json(const std::vector<hjacobi::Margin>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back({{"k", m.k}, {"value", m.value}, {"ok", m.ok}});
  return out;
}

inline json scheme_json(const hjacobi::SchemeStats& s) {
  return {{"steps", s.steps},
          {"projected_steps", s.projected_steps},
          {"projected_fraction", s.projected_fraction()},
          {"under_resolved", s.under_resolved()}};
}

inline json estimate_json(hjacobi::Estimate e) { return {{"value", e.value}, {"se", e.se}}; }

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace detail

/// Fully resolved experiment configuration; `resolved` is echoed into every report.
struct ExperimentConfig {
  std::string subcommand;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  fs::path out_dir = ".";
  json resolved;

  std::optional<hjacobi::ModelParams> model;
  std::optional<std::size_t> open_size;

  double T = 10.0;
  double dt = 1e-3;
  std::size_t paths = 4;
  std::optional<std::vector<double>> x0;
  bool has_simulation = false;

  std::size_t n = 10000;
  std::string method = "mc";

  hjacobi::PDConfig pd;
  int max_total = 6;
  std::size_t atoms = 10;

  std::vector<std::size_t> dims;
  hjacobi::TailShape shape = hjacobi::TailShape::flat;
  double decay = 5.0;

  hjacobi::BoundaryKind boundary_kind = hjacobi::BoundaryKind::rank_hits;
  std::size_t rank = 2;
  std::vector<std::size_t> names;
  std::vector<double> eps = {1e-2, 1e-3, 1e-4};
  double separation = 10.0;

  std::optional<double> z_tolerance;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::optional<double> T, dt;
  std::optional<std::size_t> paths, n;
};

inline hjacobi::ModelParams parse_model(const json& m) {
  using namespace hjacobi;
  detail::reject_unknown(m, "model", {"a", "gamma", "sigma", "volatility_stabilized"});
  const double sigma = detail::get_or<double>(m, "sigma", 1.0);
  if (m.contains("volatility_stabilized")) {
    if (m.contains("a") || m.contains("gamma"))
      throw ValidationError("volatility_stabilized excludes explicit a/gamma");
    const auto& v = m["volatility_stabilized"];
    detail::reject_unknown(v, "model.volatility_stabilized", {"d", "gamma_star"});
    return ModelParams::volatility_stabilized(detail::require<std::size_t>(v, "d", "model.volatility_stabilized"),
                                              detail::require<double>(v, "gamma_star", "model.volatility_stabilized"),
                                              sigma);
  }
  auto a = detail::get_or<std::vector<double>>(m, "a", {});
  auto g = detail::get_or<std::vector<double>>(m, "gamma", {});
  if (a.empty() && g.empty()) throw ValidationError("model needs a, gamma or volatility_stabilized");
  if (a.empty()) a.assign(g.size(), 0.0);
  return ModelParams(std::move(a), std::move(g), sigma);
}

inline hjacobi::BoundaryKind parse_boundary_kind(const std::string& s) {
  using hjacobi::BoundaryKind;
  for (auto k : {BoundaryKind::rank_hits, BoundaryKind::rank_pushed_only, BoundaryKind::nameset_hits,
                 BoundaryKind::nameset_pushed_only})
    if (s == hjacobi::to_string(k)) return k;
  throw hjacobi::ValidationError("unknown boundary kind '" + s + "'");
}

/// Validates the raw document, applies flag overrides and fills defaults.
inline ExperimentConfig resolve_config(const std::string& sub, json raw, const Overrides& ov) {
  using namespace hjacobi;
  if (raw.is_null()) raw = json::object();
  detail::reject_unknown(raw, "config",
                         {"seed", "threads", "model", "open_size", "simulation", "sampler", "pd", "schedule",
                          "boundary", "output", "tolerances"});
  ExperimentConfig c;
  c.subcommand = sub;

  if (ov.seed) raw["seed"] = *ov.seed;
  if (!raw.contains("seed")) throw ValidationError("seed is required (config field 'seed' or --seed)");
  if (!raw["seed"].is_number_unsigned()) throw ValidationError("seed must be a non-negative integer");
  c.seed = raw["seed"].get<std::uint64_t>();
  c.threads = ov.threads ? *ov.threads : detail::get_or<unsigned>(raw, "threads", 1u);
  if (c.threads < 1) throw ValidationError("threads must be at least 1");

  json output = raw.value("output", json::object());
  detail::reject_unknown(output, "output", {"dir"});
  c.out_dir = ov.out ? *ov.out : detail::get_or<std::string>(output, "dir", ".");

  json res;
  res["subcommand"] = sub;
  res["seed"] = c.seed;
  res["output"] = {{"dir", c.out_dir.string()}};

  if (raw.contains("model")) {
    c.model = parse_model(raw["model"]);
    res["model"] = {{"a", c.model->a}, {"gamma", c.model->gamma}, {"sigma", c.model->sigma}};
  }
  if (raw.contains("open_size")) {
    c.open_size = detail::get_or<std::size_t>(raw, "open_size", 0);
    res["open_size"] = *c.open_size;
  }

  json sim = raw.value("simulation", json::object());
  detail::reject_unknown(sim, "simulation", {"T", "dt", "paths", "x0"});
  c.has_simulation = raw.contains("simulation") || ov.T || ov.dt || ov.paths;
  c.T = ov.T ? *ov.T : detail::get_or<double>(sim, "T", c.T);
  c.dt = ov.dt ? *ov.dt : detail::get_or<double>(sim, "dt", c.dt);
  c.paths = ov.paths ? *ov.paths : detail::get_or<std::size_t>(sim, "paths", c.paths);
  if (sim.contains("x0")) c.x0 = detail::get_or<std::vector<double>>(sim, "x0", {});
  if (c.has_simulation) {
    if (!(c.T > 0.0) || !(c.dt > 0.0) || c.dt > c.T) throw ValidationError("simulation needs 0 < dt <= T");
    if (c.paths < 1) throw ValidationError("simulation needs at least one path");
    res["simulation"] = {{"T", c.T}, {"dt", c.dt}, {"paths", c.paths}};
    if (c.x0) res["simulation"]["x0"] = *c.x0;
  }

  json smp = raw.value("sampler", json::object());
  detail::reject_unknown(smp, "sampler", {"n", "method", "max_total", "atoms"});
  c.n = ov.n ? *ov.n : detail::get_or<std::size_t>(smp, "n", c.n);
  c.method = detail::get_or<std::string>(smp, "method", c.method);
  c.max_total = detail::get_or<int>(smp, "max_total", c.max_total);
  c.atoms = detail::get_or<std::size_t>(smp, "atoms", c.atoms);
  if (c.n < 2) throw ValidationError("sampler needs n >= 2");
  if (c.method != "mc" && c.method != "quadrature") throw ValidationError("sampler.method must be mc or quadrature");
  res["sampler"] = {{"n", c.n}, {"method", c.method}};

  if (raw.contains("pd")) {
    const auto& p = raw["pd"];
    detail::reject_unknown(p, "pd", {"theta", "tilt", "M", "tail_cutoff"});
    c.pd.theta = detail::require<double>(p, "theta", "pd");
    c.pd.tilt = detail::get_or<std::vector<double>>(p, "tilt", {});
    c.pd.M = detail::get_or<std::size_t>(p, "M", c.pd.M);
    c.pd.tail_cutoff = detail::get_or<double>(p, "tail_cutoff", c.pd.tail_cutoff);
    c.pd.check();
    res["pd"] = {{"theta", c.pd.theta}, {"tilt", c.pd.tilt}, {"M", c.pd.M}, {"tail_cutoff", c.pd.tail_cutoff}};
    if (sub == "pd") {
      res["sampler"]["max_total"] = c.max_total;
      res["sampler"]["atoms"] = c.atoms;
    }
  }

  if (raw.contains("schedule")) {
    const auto& s = raw["schedule"];
    detail::reject_unknown(s, "schedule", {"dims", "shape", "decay"});
    c.dims = detail::require<std::vector<std::size_t>>(s, "dims", "schedule");
    const auto shape = detail::get_or<std::string>(s, "shape", "flat");
    if (shape == "flat")
      c.shape = TailShape::flat;
    else if (shape == "geometric")
      c.shape = TailShape::geometric;
    else
      throw ValidationError("schedule.shape must be flat or geometric");
    c.decay = detail::get_or<double>(s, "decay", c.decay);
    res["schedule"] = {{"dims", c.dims}, {"shape", shape}, {"decay", c.decay}};
  }

  if (raw.contains("boundary")) {
    const auto& b = raw["boundary"];
    detail::reject_unknown(b, "boundary", {"kind", "rank", "names", "eps", "separation_factor"});
    c.boundary_kind = parse_boundary_kind(detail::get_or<std::string>(b, "kind", "rank_hits"));
    c.rank = detail::get_or<std::size_t>(b, "rank", c.rank);
    c.names = detail::get_or<std::vector<std::size_t>>(b, "names", {});
    c.eps = detail::get_or<std::vector<double>>(b, "eps", c.eps);
    c.separation = detail::get_or<double>(b, "separation_factor", c.separation);
    for (double e : c.eps)
      if (!(e > 0.0)) throw ValidationError("boundary eps values must be positive");
    res["boundary"] = {{"kind", to_string(c.boundary_kind)},
                       {"rank", c.rank},
                       {"names", c.names},
                       {"eps", c.eps},
                       {"separation_factor", c.separation}};
  }

  if (raw.contains("tolerances")) {
    const auto& t = raw["tolerances"];
    detail::reject_unknown(t, "tolerances", {"z"});
    c.z_tolerance = detail::get_or<double>(t, "z", 3.0);
    res["tolerances"] = {{"z", *c.z_tolerance}};
  }

  // threads affect scheduling only, never results, so they stay out of the echo
  c.resolved = std::move(res);
  return c;
}

namespace detail {

inline const hjacobi::ModelParams& need_model(const ExperimentConfig& c) {
  if (!c.model) throw hjacobi::ValidationError(c.subcommand + " needs a model block");
  return *c.model;
}

inline hjacobi::SimplexVec start_state(const ExperimentConfig& c, std::size_t d) {
  if (!c.x0) return hjacobi::SimplexVec::uniform(d);
  if (c.x0->size() != d) throw hjacobi::ValidationError("simulation.x0 has the wrong dimension");
  return hjacobi::SimplexVec(*c.x0);
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw hjacobi::ValidationError("cannot create output directory " + dir_.string());
  }

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw hjacobi::ValidationError("cannot write " + (dir_ / name).string());
    files_.push_back(name);
    return f;
  }

  void report(const ExperimentConfig& c, json result) {
    json doc;
    doc["config"] = c.resolved;
    doc["result"] = std::move(result);
    doc["files"] = files_;
    doc["metadata"] = {{"timestamp", utc_timestamp()}};
    std::ofstream f(dir_ / "report.json", std::ios::binary);
    if (!f) throw hjacobi::ValidationError("cannot write report.json");
    f << doc.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

}  // namespace detail

inline json run_simulate(const ExperimentConfig& c, detail::Outputs& out) {
  using namespace hjacobi;
  const auto& p = detail::need_model(c);
  require_valid(p);
  const auto x0 = detail::start_state(c, p.dim());
  const auto batch = simulate_batch(p, x0, c.T, c.dt, c.seed, c.paths, c.threads);
  for (std::size_t i = 0; i < batch.paths.size(); ++i) {
    auto f = out.open("path_" + std::to_string(i) + ".csv");
    write_path_csv(f, batch.paths[i]);
  }
  json r = {{"paths", c.paths}, {"scheme", detail::scheme_json(batch.stats())}};
  if (batch.stats().under_resolved()) r["diagnostic"] = "under-resolved: more than 1% of steps projected";
  return r;
}

inline json run_invariant(const ExperimentConfig& c, detail::Outputs& out) {
  using namespace hjacobi;
  const auto& p = detail::need_model(c);
  const auto spec = InvariantSpec::for_params(p);
  const auto sample = sample_invariant(spec, c.n, derive_seed(c.seed, 1), Frame::named);
  {
    auto f = out.open("samples.csv");
    write_samples_csv(f, sample.draws, "x_");
  }
  json r;
  r["sampler"] = {{"kind", to_string(sample.diagnostics.kind)},
                  {"draws", sample.diagnostics.draws},
                  {"acceptance_rate", sample.diagnostics.acceptance_rate},
                  {"ess", sample.diagnostics.ess},
                  {"ok", sample.diagnostics.ok},
                  {"note", sample.diagnostics.note}};
  if (!sample.diagnostics.ok) r["diagnostic"] = "invariant sampler: " + sample.diagnostics.note;
  if (c.has_simulation) {
    std::vector<TestFunction> tests;
    for (std::size_t k = 1; k <= p.dim(); ++k) tests.push_back(ranked_power(k));
    tests.push_back(ranked_power(1, 2));
    ErgodicSimConfig sim{c.T, c.dt, c.paths, c.x0, derive_seed(c.seed, 2), c.threads};
    ErgodicSamplerConfig smp{c.n, derive_seed(c.seed, 3), {}};
    const auto rep = ergodic_compare(p, tests, sim, smp);
    const double zmax = c.z_tolerance.value_or(3.0);
    json rows = json::array();
    bool pass = true;
    for (const auto& row : rep.rows) {
      const bool ok = std::abs(row.z_score) < zmax;
      pass = pass && ok;
      rows.push_back({{"function", row.function_id},
                      {"time_average", detail::estimate_json(row.time_avg)},
                      {"invariant_average", detail::estimate_json(row.invariant_avg)},
                      {"z", row.z_score},
                      {"pass", ok}});
    }
    r["ergodic_compare"] = {{"rows", rows}, {"pass", pass}, {"scheme", detail::scheme_json(rep.scheme)}};
    if (rep.under_resolved()) r["diagnostic"] = "under-resolved: more than 1% of steps projected";
  }
  return r;
}

inline json run_growth(const ExperimentConfig& c, detail::Outputs& out) {
  using namespace hjacobi;
  const auto& p = detail::need_model(c);
  require_valid(p);
  if (!c.open_size) throw ValidationError("growth needs open_size");
  const std::size_t N = *c.open_size;
  const auto g = growth_exists(p, N);
  json r;
  r["existence"] = {{"open_size", N}, {"exists", g.exists}, {"margins", detail::margins_json(g.margins)}};
  if (g.first_violation) r["existence"]["first_violation"] = *g.first_violation;
  if (!g.exists) return r;

  if (c.has_simulation) {
    const auto x0 = detail::start_state(c, p.dim());
    const auto strategy = StrategySpec::growth_optimal(p, N);
    std::vector<double> rates(c.paths);
    std::vector<std::size_t> flagged(c.paths);
    std::vector<SchemeStats> stats(c.paths);
    WealthLedger first;
    parallel_for(c.paths, c.threads, [&](std::size_t i) {
      const auto path = simulate(p, x0, c.T, c.dt, derive_seed(c.seed, 4), i);
      const auto ledger = wealth(path, strategy);
      rates[i] = ledger.log_v.back() / c.T;
      flagged[i] = ledger.flagged_steps;
      stats[i] = path.stats;
      if (i == 0) first = ledger;
    });
    {
      auto f = out.open("wealth_path_0.csv");
      write_ledger_csv(f, first);
    }
    RunningStats acc;
    SchemeStats total;
    std::size_t total_flagged = 0;
    for (std::size_t i = 0; i < c.paths; ++i) {
      acc.add(rates[i]);
      total += stats[i];
      total_flagged += flagged[i];
    }
    r["backtest"] = {{"paths", c.paths},
                     {"log_wealth_rate", {{"value", acc.mean()}, {"se", acc.stderr_mean()}}},
                     {"per_path", rates},
                     {"flagged_steps", total_flagged},
                     {"scheme", detail::scheme_json(total)}};
    if (total.under_resolved()) r["diagnostic"] = "under-resolved: more than 1% of steps projected";
  }

  if (p.rank_only()) {
    GrowthBudget b;
    b.draws = c.n;
    b.seed = derive_seed(c.seed, 5);
    const auto method = c.method == "quadrature" ? GrowthMethod::quadrature : GrowthMethod::mc;
    try {
      const auto est = robust_growth_rate(p, N, method, b);
      r["lambda_hat"] = {{"value", est.lambda_hat}, {"se", est.se}, {"method", to_string(method)}};
    } catch (const GrowthConditionError& e) {
      r["lambda_hat"] = {{"value", nullptr}, {"reason", e.what()}};
    }
  }
  return r;
}

inline json run_boundary(const ExperimentConfig& c, detail::Outputs& out) {
  using namespace hjacobi;
  BoundaryQuery q;
  q.params = detail::need_model(c);
  require_valid(q.params);
  q.kind = c.boundary_kind;
  q.rank = c.rank;
  if (!q.is_rank()) q.names = IndexSet(c.names, q.params.dim());
  const auto v = analytic_verdict(q);
  json r;
  r["query"] = {{"kind", to_string(q.kind)}};
  if (q.is_rank())
    r["query"]["rank"] = q.rank;
  else
    r["query"]["names"] = c.names;
  r["analytic"] = {{"holds", v.holds}, {"margins", detail::margins_json(v.margins)}};
  if (c.has_simulation) {
    HitExperiment h;
    h.T = c.T;
    h.dt = c.dt;
    h.paths = c.paths;
    h.eps_ladder = c.eps;
    h.x0 = c.x0;
    h.seed = derive_seed(c.seed, 6);
    h.threads = c.threads;
    h.separation_factor = c.separation;
    const auto rep = mc_hit_frequency(q, h);
    {
      auto f = out.open("hits.csv");
      write_hit_csv(f, rep);
    }
    json rows = json::array();
    for (const auto& row : rep.rows)
      rows.push_back({{"eps", row.eps},
                      {"hits", row.hits},
                      {"frequency", row.frequency},
                      {"ci", {row.ci_lo, row.ci_hi}}});
    r["monte_carlo"] = {{"rows", rows}, {"scheme", detail::scheme_json(rep.scheme)}};
    if (rep.under_resolved()) r["diagnostic"] = "under-resolved: more than 1% of steps projected";
  }
  return r;
}

inline json run_pd(const ExperimentConfig& c, detail::Outputs& out) {
  using namespace hjacobi;
  if (c.resolved.find("pd") == c.resolved.end()) throw ValidationError("pd needs a pd block");
  if (c.max_total < 2 || c.max_total > 16) throw ValidationError("sampler.max_total must lie in 2..16");
  const auto sets = multisets_up_to(c.max_total);
  const MomentRecursion rec(c.pd.theta);
  PDConfig plain = c.pd;
  plain.tilt.clear();
  std::vector<RunningStats> acc(sets.size());
  std::vector<double> phis(static_cast<std::size_t>(c.max_total) + 1);
  std::ofstream samples = out.open("pd_samples.csv");
  samples << "draw";
  for (std::size_t k = 1; k <= c.atoms; ++k) samples << ",Y_" << k;
  samples << ",tail\n";
  std::size_t idx = 0;
  for_each_pd_draw(plain, c.n, derive_seed(c.seed, 7), [&](std::span<const double> y, double tail) {
    for (int m = 2; m <= c.max_total; ++m) phis[m] = phi_m(y, m);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      double v = 1.0;
      for (int m : sets[s]) v *= phis[m];
      acc[s].add(v);
    }
    samples << idx++;
    for (std::size_t k = 0; k < c.atoms; ++k) samples << ',' << format_real(k < y.size() ? y[k] : 0.0);
    samples << ',' << format_real(tail) << '\n';
  });
  auto table = out.open("moments.csv");
  table << "multiset,recursion,mc_mean,mc_se,z\n";
  json rows = json::array();
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const double exact = rec.expect(sets[s]);
    const double z = acc[s].stderr_mean() > 0.0 ? (acc[s].mean() - exact) / acc[s].stderr_mean() : 0.0;
    table << '"' << multiset_id(sets[s]) << "\"," << format_real(exact) << ',' << format_real(acc[s].mean()) << ','
          << format_real(acc[s].stderr_mean()) << ',' << format_real(z) << '\n';
    rows.push_back({{"multiset", sets[s]},
                    {"recursion", exact},
                    {"mc", {{"value", acc[s].mean()}, {"se", acc[s].stderr_mean()}}},
                    {"z", z}});
  }
  json r = {{"draws", c.n}, {"moments", rows}};
  if (!c.pd.tilt.empty()) {
    std::vector<KingmanFunction> fs;
    for (std::size_t k = 1; k <= c.pd.tilt.size(); ++k) fs.push_back(top_atom(k));
    fs.push_back(phi_function(2));
    const auto est = tilted_expect_many(c.pd, fs, c.n, derive_seed(c.seed, 8));
    json t = json::array();
    for (std::size_t j = 0; j < fs.size(); ++j)
      t.push_back({{"function", fs[j].id}, {"value", est[j].value}, {"se", est[j].se}});
    r["tilted"] = {{"estimates", t}, {"ess", est.front().ess}};
  }
  return r;
}

inline json run_limit(const ExperimentConfig& c, detail::Outputs& out) {
  using namespace hjacobi;
  if (c.resolved.find("pd") == c.resolved.end()) throw ValidationError("limit needs a pd block");
  if (c.dims.empty()) throw ValidationError("limit needs a schedule block");
  const auto schedule = make_schedule(c.pd.theta, c.pd.tilt, c.dims, c.shape, c.decay);
  std::vector<LimitTest> tests;
  const bool plain = std::all_of(c.pd.tilt.begin(), c.pd.tilt.end(), [](double v) { return v == 0.0; });
  tests.push_back({phi_function(2), plain ? std::optional<double>(1.0 / (1.0 + c.pd.theta)) : std::nullopt});
  tests.push_back({top_atom(1), std::nullopt});
  const auto rep = convergence_experiment(schedule, c.pd, tests, c.n, derive_seed(c.seed, 9));
  {
    auto f = out.open("convergence.csv");
    write_convergence_csv(f, rep);
  }
  json rows = json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"d", row.d},
                    {"function", row.function_id},
                    {"estimate", row.estimate},
                    {"se", row.se},
                    {"tilted_limit", row.tilted_limit},
                    {"limit_se", row.limit_se},
                    {"gap", row.gap}});
  json verdicts = json::array();
  for (const auto& v : rep.verdicts)
    verdicts.push_back({{"function", v.function_id},
                        {"gaps_decrease", v.gaps_decrease},
                        {"final_within_noise", v.final_within_noise},
                        {"pass", v.pass}});
  json sched = json::array();
  for (const auto& chk : schedule.checks())
    sched.push_back({{"d", chk.d},
                     {"tail_sums_positive", chk.tail_sums_positive},
                     {"head_matches", chk.head_matches},
                     {"tail_mass_matches", chk.tail_mass_matches},
                     {"max_tail_entry", chk.max_tail_entry}});
  json r = {{"schedule_checks", sched}, {"rows", rows}, {"verdicts", verdicts}, {"pass", rep.pass()}};
  if (!c.pd.tilt.empty()) {
    try {
      const auto g = limit_growth_rate(c.pd, 1.0, c.n, derive_seed(c.seed, 10));
      r["limit_growth_rate"] = {
          {"value", g.value}, {"se", g.se}, {"ess", g.ess}, {"margins", detail::margins_json(g.condition_margins)}};
    } catch (const GrowthConditionError& e) {
      r["limit_growth_rate"] = {{"value", nullptr}, {"reason", e.what()}};
    }
  }
  return r;
}

inline void emit_error(std::ostream& err, const char* kind, const std::string& message,
                       std::optional<std::size_t> index = std::nullopt) {
  json e = {{"error", kind}, {"message", message}};
  if (index) e["index"] = *index;
  err << e.dump() << '\n';
}

inline json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw hjacobi::ValidationError("cannot read config file " + path);
  try {
    return json::parse(f, nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw hjacobi::ValidationError(std::string("malformed config: ") + e.what());
  }
}

/// Parses flags, runs one subcommand and returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"hybrid Jacobi market experiments"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides ov;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out_dir;
  double T = 0, dt = 0;
  std::size_t paths = 0, n = 0;
  std::vector<CLI::Option*> seeds, threads_opts, outs, Ts, dts, paths_opts, ns;

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"simulate", "simulate paths to CSV"},
      {"invariant", "sample the invariant law and compare with time averages"},
      {"growth", "growth-optimal existence, wealth backtest and growth rate"},
      {"boundary", "analytic boundary verdicts and Monte Carlo hit frequencies"},
      {"pd", "Poisson-Dirichlet samples and moment tables"},
      {"limit", "large-d convergence and limiting growth rate"}};
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "JSON config file");
    seeds.push_back(s->add_option("--seed", seed, "master seed"));
    threads_opts.push_back(s->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber));
    outs.push_back(s->add_option("--out", out_dir, "output directory"));
    Ts.push_back(s->add_option("--T", T, "horizon"));
    dts.push_back(s->add_option("--dt", dt, "time step"));
    paths_opts.push_back(s->add_option("--paths", paths, "number of paths"));
    ns.push_back(s->add_option("--n", n, "sampler draws"));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error(err, "validation", e.what());
    return kValidation;
  }

  auto any = [](const std::vector<CLI::Option*>& v) { return std::any_of(v.begin(), v.end(), [](auto* o) { return o->count() > 0; }); };
  if (any(seeds)) ov.seed = seed;
  if (any(threads_opts)) ov.threads = threads;
  if (any(outs)) ov.out = out_dir;
  if (any(Ts)) ov.T = T;
  if (any(dts)) ov.dt = dt;
  if (any(paths_opts)) ov.paths = paths;
  if (any(ns)) ov.n = n;
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    const auto cfg = resolve_config(sub, load_config(config_path), ov);
    detail::Outputs out(cfg.out_dir);
    json result;
    if (sub == "simulate")
      result = run_simulate(cfg, out);
    else if (sub == "invariant")
      result = run_invariant(cfg, out);
    else if (sub == "growth")
      result = run_growth(cfg, out);
    else if (sub == "boundary")
      result = run_boundary(cfg, out);
    else if (sub == "pd")
      result = run_pd(cfg, out);
    else
      result = run_limit(cfg, out);
    const bool failed = result.contains("diagnostic");
    const std::string diag = failed ? result["diagnostic"].get<std::string>() : "";
    out.report(cfg, std::move(result));
    if (failed) {
      emit_error(err, "numerical", diag);
      return kNumerical;
    }
    return kOk;
  } catch (const hjacobi::ValidationError& e) {
    emit_error(err, "validation", e.what(), e.index());
    return kValidation;
  } catch (const hjacobi::NumericalError& e) {
    emit_error(err, "numerical", e.what());
    return kNumerical;
  } catch (const hjacobi::DomainError& e) {
    emit_error(err, "numerical", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    emit_error(err, "internal", e.what());
    return 1;
  }
}

}  // namespace hjlab
