#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hjlab_app.hpp"

namespace fs = std::filesystem;
using hjlab::json;

namespace {

struct Run {
  int code;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hjlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "config.json") {
  std::ofstream(dir / name) << j.dump();
  return dir / name;
}

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hjlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream err;
  const int code = hjlab::run(static_cast<int>(argv.size()), argv.data(), err);
  return {code, err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json report(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

}  // namespace

TEST_CASE("growth reports non-existence with exit 0") {
  const auto dir = scratch("growth_none");
  // γ* = 0.1 < 1/(d−N) = 0.125
  const json cfg = {{"seed", 1},
                    {"model", {{"volatility_stabilized", {{"d", 10}, {"gamma_star", 0.1}}}}},
                    {"open_size", 2}};
  const auto r = invoke({"growth", "--config", write_config(dir, cfg).string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const auto rep = report(dir / "out");
  CHECK(rep["result"]["existence"]["exists"] == false);
  CHECK(rep["result"]["existence"]["first_violation"] == 2);
  CHECK(rep["config"]["model"]["gamma"][0] == 0.1);
  CHECK(rep["metadata"].contains("timestamp"));
}

TEST_CASE("growth with existence runs the backtest and growth rate") {
  const auto dir = scratch("growth_ok");
  const json cfg = {{"seed", 2},
                    {"model", {{"a", {1.5, 1.5, 1.5}}}},
                    {"open_size", 1},
                    {"simulation", {{"T", 1.0}, {"dt", 1e-3}, {"paths", 2}}},
                    {"sampler", {{"n", 2000}}}};
  const auto r = invoke({"growth", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto rep = report(dir);
  CHECK(rep["result"]["existence"]["exists"] == true);
  CHECK(rep["result"]["backtest"]["per_path"].size() == 2);
  CHECK(rep["result"]["lambda_hat"]["value"].is_number());
  CHECK(fs::exists(dir / "wealth_path_0.csv"));
}

TEST_CASE("malformed and incomplete configs exit 2") {
  const auto dir = scratch("bad");
  std::ofstream(dir / "broken.json") << "{\"seed\": 1, \"model\": ";
  auto r = invoke({"simulate", "--config", (dir / "broken.json").string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["error"] == "validation");

  r = invoke({"simulate", "--config", write_config(dir, {{"model", {{"a", {1, 1}}}}}).string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("seed") != std::string::npos);

  r = invoke({"simulate", "--config", write_config(dir, {{"seed", 1}, {"modle", json::object()}}).string()});
  CHECK(r.code == 2);

  r = invoke({"simulate", "--bogus-flag"});
  CHECK(r.code == 2);
  r = invoke({"simulate", "--seed", "-4"});
  CHECK(r.code == 2);
}

TEST_CASE("invalid parameters carry the violated tail-sum index") {
  const auto dir = scratch("invalid");
  const json cfg = {{"seed", 1}, {"model", {{"a", {1.0, 1.5, -1.0}}}}};
  const auto r = invoke({"invariant", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  REQUIRE(r.code == 2);
  const auto e = json::parse(r.err);
  CHECK(e["index"] == 3);
  CHECK(r.err.find('\n') == r.err.size() - 1);
}

TEST_CASE("numerical failures exit 3") {
  const auto dir = scratch("numerical");
  const json cfg = {{"seed", 1}, {"pd", {{"theta", 1.0}, {"tilt", {200.0}}}}, {"sampler", {{"n", 500}}}};
  const auto r = invoke({"pd", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  CHECK(r.code == 3);
  CHECK(json::parse(r.err)["error"] == "numerical");
}

TEST_CASE("outputs are reproducible and independent of thread count") {
  const auto dir = scratch("repro");
  const json cfg = {{"seed", 77},
                    {"model", {{"a", {0.5, 0.5, 0.5}}, {"gamma", {0.2, 0.0, 0.1}}}},
                    {"simulation", {{"T", 0.2}, {"dt", 1e-3}, {"paths", 3}}}};
  const auto path = write_config(dir, cfg).string();
  REQUIRE(invoke({"simulate", "--config", path, "--out", (dir / "a").string(), "--threads", "1"}).code == 0);
  REQUIRE(invoke({"simulate", "--config", path, "--out", (dir / "b").string(), "--threads", "3"}).code == 0);
  for (int i = 0; i < 3; ++i) {
    const auto name = "path_" + std::to_string(i) + ".csv";
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  auto ra = report(dir / "a"), rb = report(dir / "b");
  ra.erase("metadata");
  rb.erase("metadata");
  ra["config"].erase("output");
  rb["config"].erase("output");
  CHECK(ra == rb);

  REQUIRE(invoke({"simulate", "--config", path, "--out", (dir / "c").string(), "--seed", "78"}).code == 0);
  CHECK(slurp(dir / "a" / "path_0.csv") != slurp(dir / "c" / "path_0.csv"));
}

TEST_CASE("pd subcommand writes samples and a moment table") {
  const auto dir = scratch("pd");
  const json cfg = {{"seed", 5}, {"pd", {{"theta", 1.0}}}, {"sampler", {{"n", 3000}, {"max_total", 4}}}};
  REQUIRE(invoke({"pd", "--config", write_config(dir, cfg).string(), "--out", dir.string()}).code == 0);
  const auto rep = report(dir);
  const auto& m = rep["result"]["moments"];
  REQUIRE(m.size() == 4);  // {2} {3} {2,2} {4}
  CHECK(m[0]["recursion"].get<double>() == Catch::Approx(0.5));
  CHECK(slurp(dir / "pd_samples.csv").rfind("draw,Y_1,", 0) == 0);
  const auto first = slurp(dir / "pd_samples.csv");
  REQUIRE(invoke({"pd", "--config", write_config(dir, cfg).string(), "--out", dir.string()}).code == 0);
  CHECK(first == slurp(dir / "pd_samples.csv"));
}

TEST_CASE("boundary and limit subcommands") {
  const auto dir = scratch("boundary");
  json cfg = {{"seed", 3},
              {"model", {{"a", {0.0, 0.25}}}},
              {"boundary", {{"kind", "rank_hits"}, {"rank", 2}, {"eps", {1e-2}}}},
              {"simulation", {{"T", 2.0}, {"dt", 1e-3}, {"paths", 8}}}};
  // strong boundary attraction: the report is written but the run is flagged under-resolved
  auto r = invoke({"boundary", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  CHECK(r.code == 3);
  auto rep = report(dir);
  CHECK(rep["result"]["analytic"]["holds"] == false);
  CHECK(rep["result"]["monte_carlo"]["rows"].size() == 1);
  CHECK(rep["result"]["monte_carlo"]["scheme"]["under_resolved"] == true);

  cfg["model"]["a"] = {1.0, 1.5};
  r = invoke({"boundary", "--config", write_config(dir, cfg).string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  rep = report(dir);
  CHECK(rep["result"]["analytic"]["holds"] == true);

  const auto ldir = scratch("limit");
  cfg = {{"seed", 4},
         {"pd", {{"theta", 2.0}, {"tilt", {0.5}}}},
         {"schedule", {{"dims", {10, 40}}}},
         {"sampler", {{"n", 4000}}}};
  r = invoke({"limit", "--config", write_config(ldir, cfg).string(), "--out", ldir.string()});
  REQUIRE(r.code == 0);
  rep = report(ldir);
  CHECK(rep["result"]["rows"].size() == 4);
  CHECK(rep["result"]["limit_growth_rate"]["value"].is_number());
  CHECK(fs::exists(ldir / "convergence.csv"));
}
