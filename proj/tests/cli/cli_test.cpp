// End-to-end checks of the smld executable and the C interface.
#include "doctest.h"
#include "json.hpp"
#include "smld.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("smld_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SMLD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const std::string& name, const json& j) {
  const auto p = scratch(name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string config(const std::string& name) { return std::string(SMLD_SOURCE_DIR) + "/configs/" + name; }

void check_summary(const json& block) {
  for (const auto& [name, s] : block["parameters"].items()) {
    CHECK(s["ci95"][0].get<double>() <= s["ci95"][1].get<double>());
    CHECK(s["var"].get<double>() >= 0.0);
  }
  for (const auto& [name, s] : block["derived"].items())
    if (name.rfind("corr_", 0) == 0) {
      CHECK(s["ci95"][0].get<double>() >= -1.0);
      CHECK(s["ci95"][1].get<double>() <= 1.0);
    }
}

}  // namespace

TEST_CASE("fit smoke run writes every artefact quickly") {
  const auto out = scratch("smoke");
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(run_cli("fit --config " + config("smoke_fit.json") + " --out " + out.string()) == 0);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
  for (const char* f : {"trace_raw.csv", "trace_raw.json", "trace_corrected.csv", "trace_corrected.json",
                        "correction.json", "summary.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  std::ifstream tr(out / "trace_raw.csv");
  std::string header;
  std::getline(tr, header);
  CHECK(header == "iter,coord_0,coord_1,coord_2,coord_3,coord_4");
  const auto corr = load(out / "correction.json");
  CHECK(corr["status"] == "completed");
  for (const char* k : {"vartheta_hat", "V_eigenvalues", "H_eigenvalues", "residual", "dropped_samples"})
    CHECK_MESSAGE(corr.contains(k), k);
  CHECK(corr["residual"].get<double>() <= 1e-8);
  const auto summary = load(out / "summary.json");
  CHECK(summary["status"] == "completed");
  check_summary(summary["raw"]);
  check_summary(summary["corrected"]);
  CHECK(summary["corrected"]["derived"].contains("odds_ratio_1"));
  const auto manifest = load(out / "trace_raw.json");
  CHECK(manifest["parameters"].size() == 5);
  CHECK(manifest["seed"] == 11);
}

TEST_CASE("identical config and seed give byte-identical traces") {
  const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
  REQUIRE(run_cli("fit --config " + config("smoke_fit.json") + " --out " + a.string()) == 0);
  REQUIRE(std::system(("SMLD_THREADS=1 " + std::string(SMLD_CLI_PATH) + " fit --config " + config("smoke_fit.json") +
                       " --out " + b.string() + " > /dev/null").c_str()) == 0);
  REQUIRE(run_cli("fit --config " + config("smoke_fit.json") + " --out " + c.string() + " --seed 12") == 0);
  for (const char* f : {"trace_raw.csv", "trace_corrected.csv", "trace_raw_dual.csv", "correction.json"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  CHECK(slurp(a / "trace_raw.csv") != slurp(c / "trace_raw.csv"));
}

TEST_CASE("simulate writes grouped data deterministically") {
  const json cfg = {{"model", "glmm"},
                    {"family", {{"kind", "binomial_logit"}, {"trials", 1}}},
                    {"simulate", {{"n", 10}, {"n_per_group", 10}, {"seed", 3}}}};
  const auto path = write_config("sim", cfg);
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  REQUIRE(run_cli("simulate --config " + path.string() + " --out " + a.string()) == 0);
  REQUIRE(run_cli("simulate --config " + path.string() + " --out " + b.string()) == 0);
  CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
  std::ifstream is(a / "data.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "group_id,y,x_0,x_1,z_0,z_1");
  std::set<int> groups;
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    const int g = std::stoi(line.substr(0, line.find(',')));
    groups.insert(g);
    const double y = std::stod(line.substr(line.find(',') + 1));
    CHECK((y == 0.0 || y == 1.0));
  }
  CHECK(rows == 100);
  CHECK(groups.size() == 10);
  CHECK(*groups.begin() == 1);
  CHECK(*groups.rbegin() == 10);
}

TEST_CASE("invalid configs are rejected before any work") {
  const auto out = scratch("bad");
  json cfg = {{"model", "logvar"}, {"simulate", {{"n", 50}}}, {"sampler", {{"step_size", 0}}}};
  CHECK(run_cli("fit --config " + write_config("eps0", cfg).string() + " --out " + out.string()) == 1);
  CHECK_FALSE(fs::exists(out / "trace_raw.csv"));
  cfg["sampler"] = {{"step_size", 1e-4}, {"minibatch", 5}, {"iterz", 3}};
  CHECK(run_cli("fit --config " + write_config("typo", cfg).string() + " --out " + out.string()) == 1);
  CHECK(run_cli("fit --config /nonexistent.json --out " + out.string()) == 1);
  CHECK(run_cli("sample --config " + config("smoke_fit.json") + " --out " + out.string()) == 1);
}

TEST_CASE("a diverging chain exits 2 with a truncated trace") {
  const auto out = scratch("div");
  CHECK(run_cli("fit --config " + config("sgld_diverge.json") + " --out " + out.string()) == 2);
  const auto summary = load(out / "summary.json");
  CHECK(summary["status"] == "diverged");
  const auto at = summary["diverged_at"].get<std::uint64_t>();
  CHECK(at > 0);
  CHECK(at < 10000);
  const auto manifest = load(out / "trace_raw.json");
  CHECK(manifest["rows"].get<std::uint64_t>() == at - 1);
  CHECK_FALSE(fs::exists(out / "trace_corrected.csv"));
}

TEST_CASE("oracle and gibbs commands") {
  const auto out = scratch("oracle");
  const json cfg = {{"model", "variance"}, {"simulate", {{"n", 200}, {"sigma", 2.0}, {"seed", 4}}}};
  REQUIRE(run_cli("oracle --config " + write_config("var", cfg).string() + " --out " + out.string()) == 0);
  const auto o = load(out / "oracle.json");
  CHECK(o["sigma_sq_mean"].get<double>() > 2.0);
  CHECK(o["sigma_sq_mean"].get<double>() < 8.0);
  const auto g = scratch("gibbs");
  const json gcfg = {{"model", "glmm"},
                     {"family", {{"kind", "gaussian"}}},
                     {"simulate", {{"n", 20}, {"seed", 4}}},
                     {"gibbs", {{"sweeps", 200}}}};
  REQUIRE(run_cli("gibbs --config " + write_config("gibbs", gcfg).string() + " --out " + g.string()) == 0);
  const auto s = load(g / "summary.json");
  CHECK(s["raw"]["n_samples"] == 180);
  check_summary(s["raw"]);
}

TEST_CASE("C API: mirror maps and status codes") {
  smld_mirror_map* e = nullptr;
  smld_mirror_map* w = nullptr;
  smld_mirror_map* prod = nullptr;
  REQUIRE(smld_mirror_map_euclidean(2, &e) == SMLD_OK);
  REQUIRE(smld_mirror_map_log_det_pd(2, &w) == SMLD_OK);
  const smld_mirror_map* parts[] = {e, w};
  REQUIRE(smld_mirror_map_product(parts, 2, &prod) == SMLD_OK);
  CHECK(smld_mirror_map_dim(prod) == 5);
  const double theta[5] = {0.3, -1.0, 2.0, 0.5, 1.0};
  double dual[5], back[5];
  REQUIRE(smld_mirror_map_grad_phi(prod, theta, dual) == SMLD_OK);
  // -W^{-1} with W = [[2, .5], [.5, 1]], det 1.75
  CHECK(dual[2] == doctest::Approx(-1.0 / 1.75));
  CHECK(dual[3] == doctest::Approx(0.5 / 1.75));
  REQUIRE(smld_mirror_map_grad_phi_star(prod, dual, back) == SMLD_OK);
  for (int i = 0; i < 5; ++i) CHECK(back[i] == doctest::Approx(theta[i]).epsilon(1e-12));
  const double bad[5] = {0.0, 0.0, 1.0, 2.0, 1.0};
  CHECK(smld_mirror_map_grad_phi(prod, bad, dual) == SMLD_ERR_DOMAIN);
  CHECK(std::string(smld_last_error_message()).size() > 0);
  CHECK(smld_mirror_map_grad_phi(nullptr, bad, dual) == SMLD_ERR_CONFIG);
  smld_mirror_map_destroy(prod);
  smld_mirror_map_destroy(w);
  smld_mirror_map_destroy(e);
}

TEST_CASE("C API: Lyapunov solve") {
  // j = 2, v = 0.5, gamma = 3 -> x = 12
  const double j = 2.0, v = 0.5, g = 3.0;
  double x = 0.0, res = 1.0;
  REQUIRE(smld_lyapunov_solve(1, &j, &v, &g, &x, &res) == SMLD_OK);
  CHECK(x == doctest::Approx(12.0));
  CHECK(res < 1e-14);
  const double J[4] = {1, 0, 0, -1}, V[4] = {1, 0, 0, 1}, G[4] = {1, 0, 0, 1};
  double X[4];
  CHECK(smld_lyapunov_solve(2, J, V, G, X, nullptr) == SMLD_ERR_SINGULAR);
}

TEST_CASE("C API: command run") {
  const auto out = scratch("capi_run");
  smld_run_result* r = nullptr;
  CHECK(smld_command_run("fit", "{not json", out.string().c_str(), nullptr, &r) == SMLD_ERR_CONFIG);
  CHECK(r == nullptr);
  const std::string cfg = slurp(config("sgld_diverge.json"));
  smld_run_options opt{1, 3, 0.0};
  REQUIRE(smld_command_run("fit", cfg.c_str(), out.string().c_str(), &opt, &r) == SMLD_OK);
  CHECK(smld_run_result_exit_code(r) == 2);
  CHECK(std::string(smld_run_result_status(r)) == "diverged");
  CHECK(json::parse(smld_run_result_report_json(r))["status"] == "diverged");
  smld_run_result_destroy(r);
}
