#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <json.hpp>

using json = nlohmann::ordered_json;

namespace {

std::string cli_path() {
  if (const char* env = std::getenv("LOGGAS_CLI_PATH")) return env;
#ifdef LOGGAS_CLI_PATH
  return LOGGAS_CLI_PATH;
#else
  return "./loggas";
#endif
}

std::string work_dir() {
  static std::string dir = [] {
    char tmpl[] = "/tmp/loggas_cli_XXXXXX";
    char* d = mkdtemp(tmpl);
    REQUIRE(d != nullptr);
    return std::string(d);
  }();
  return dir;
}

std::string path_in(const std::string& name) { return work_dir() + "/" + name; }

int run_cli(const std::string& args) {
  std::string cmd = cli_path() + " " + args + " > " + work_dir() +
                    "/stdout.txt 2> " + work_dir() + "/stderr.txt";
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_report(const std::string& path) { return json::parse(slurp(path)); }

void write_config(const std::string& path, const json& doc) {
  std::ofstream out(path);
  out << doc.dump(2) << "\n";
}

// The timestamp is the one permitted difference between identical reruns.
std::string strip_generated_at(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.find("\"generated_at\"") == std::string::npos) out << line << "\n";
  return out.str();
}

json base_potential() {
  json p = json::object();
  p["kind"] = "dyson";
  p["beta"] = 1.0;
  p["exterior"] = json::array({-2.0, 2.0});
  return p;
}

}  // namespace

TEST_CASE("the convexity certificate runs from direct flags") {
  std::string out = path_in("conv.json");
  int rc = run_cli(
      "convexity --kind dyson --beta 1 --k 2 --trials 50 --directions 4 "
      "--seed 7 --exterior -2 --exterior 2 --out " + out);
  CHECK(rc == 0);

  json rep = read_report(out);
  CHECK(rep["command"] == "convexity");
  CHECK(rep.contains("config_hash"));
  CHECK(rep.contains("generated_at"));
  CHECK(rep["all_pass"] == true);
  REQUIRE(rep["results"].is_array());
  REQUIRE(rep["results"].size() == 2);
  for (const auto& row : rep["results"]) {
    CHECK(row["pass"] == true);
    CHECK(row.contains("margin"));
  }
  CHECK(rep["convexity"]["min_quadratic_form"].get<double>() >= -1e-10);
  CHECK(rep["convexity"]["n_configs"] == 50);
}

TEST_CASE("a riesz certificate requires the exponent flag") {
  int rc = run_cli("convexity --kind riesz --beta 1 --k 2 --trials 5 "
                   "--directions 2 --out " + path_in("conv_riesz.json"));
  CHECK(rc == 2);
  rc = run_cli("convexity --kind riesz --beta 1 --s 0.5 --k 2 --trials 5 "
               "--directions 2 --out " + path_in("conv_riesz.json"));
  CHECK(rc == 0);
}

TEST_CASE("sampling writes an ensemble and diagnostics") {
  json cfg = json::object();
  cfg["seed"] = 11;
  cfg["potential"] = base_potential();
  cfg["k"] = 2;
  json s = json::object();
  s["scheme"] = "metropolis";
  s["n_samples"] = 100;
  s["burn_in"] = 50;
  s["thinning"] = 2;
  cfg["sampler"] = s;
  write_config(path_in("sample.json"), cfg);

  int rc = run_cli("sample --config " + path_in("sample.json") + " --out " +
                   path_in("samples.csv") + " --report " +
                   path_in("sample_rep.json"));
  CHECK(rc == 0);

  std::string csv = slurp(path_in("samples.csv"));
  CHECK(csv.rfind("# config_hash=fnv1a64:", 0) == 0);
  CHECK(csv.find("config_id,particle_index,x\n") != std::string::npos);
  // 100 retained configurations of 2 particles each.
  std::size_t rows = 0;
  for (char ch : csv)
    if (ch == '\n') ++rows;
  CHECK(rows == 2 + 100 * 2);

  json rep = read_report(path_in("sample_rep.json"));
  CHECK(rep["command"] == "sample");
  CHECK(rep["n_samples"] == 100);
  double acc = rep["sampler"]["acceptance_rate"].get<double>();
  CHECK(acc > 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("path evolution records trajectories with shared statistics") {
  json cfg = json::object();
  cfg["seed"] = 3;
  cfg["potential"] = base_potential();
  cfg["initial"] = json::array({-0.3, 0.3});
  cfg["n_paths"] = 2;
  json sde = json::object();
  sde["dt"] = 1e-3;
  sde["t_final"] = 0.02;
  sde["record_stride"] = 5;
  cfg["sde"] = sde;
  write_config(path_in("evolve.json"), cfg);

  int rc = run_cli("evolve --config " + path_in("evolve.json") + " --out " +
                   path_in("traj.csv") + " --report " +
                   path_in("evolve_rep.json"));
  CHECK(rc == 0);

  std::string csv = slurp(path_in("traj.csv"));
  CHECK(csv.find("path_id,t,particle_index,x\n") != std::string::npos);
  json rep = read_report(path_in("evolve_rep.json"));
  CHECK(rep["stats"]["steps"] == 40);
  CHECK(rep["n_paths"] == 2);
}

TEST_CASE("inequality verification passes on a small seeded run") {
  json cfg = json::object();
  cfg["seed"] = 21;
  cfg["potential"] = base_potential();
  cfg["gamma"] = json::array({0.2});
  cfg["t"] = 0.05;
  cfg["n_paths"] = 2000;
  cfg["fd_eps"] = 1e-3;
  json sde = json::object();
  sde["dt"] = 1e-3;
  cfg["sde"] = sde;
  write_config(path_in("verify_be.json"), cfg);

  int rc = run_cli("verify be --config " + path_in("verify_be.json") +
                   " --threads 1 --report " + path_in("be_rep.json"));
  CHECK(rc == 0);

  json rep = read_report(path_in("be_rep.json"));
  CHECK(rep["command"] == "verify");
  CHECK(rep["check"] == "be");
  CHECK(rep["all_pass"] == true);
  REQUIRE(rep["results"].size() == 1);
  CHECK(rep["results"][0]["name"] == "gradient-commutation:smooth-occupancy");
  REQUIRE(rep["reports"].size() == 1);
  CHECK(rep["reports"][0]["n_paths"] == 2000);
  CHECK(rep["reports"][0]["pass"] == true);
}

TEST_CASE("seeded verification reruns are identical modulo the timestamp") {
  json cfg = json::object();
  cfg["seed"] = 77;
  cfg["potential"] = base_potential();
  cfg["gamma"] = json::array({-0.25, 0.3});
  cfg["t"] = 0.02;
  cfg["n_paths"] = 500;
  json sde = json::object();
  sde["dt"] = 1e-3;
  cfg["sde"] = sde;
  write_config(path_in("rerun.json"), cfg);

  std::string args = "verify poincare --config " + path_in("rerun.json") +
                     " --threads 1 --report ";
  REQUIRE(run_cli(args + path_in("rerun1.json")) == 0);
  REQUIRE(run_cli(args + path_in("rerun2.json")) == 0);

  std::string a = slurp(path_in("rerun1.json"));
  std::string b = slurp(path_in("rerun2.json"));
  CHECK(strip_generated_at(a) == strip_generated_at(b));
  // Only the timestamp line may differ, and reruns are not byte-equal only
  // when the clock ticked between them.
  CHECK(strip_generated_at(a).size() >= a.size() - 64);
}

TEST_CASE("the grid flow subcommand writes densities and conserves mass") {
  json cfg = json::object();
  cfg["potential"] = json::parse(R"({"kind":"quadratic","stiffness":1.0})");
  cfg["cells"] = 128;
  cfg["initial"] = json::parse(R"({"type":"gaussian","mean":0.5,"sigma":0.3})");
  cfg["t"] = 0.1;
  cfg["dt"] = 1e-4;
  write_config(path_in("fp.json"), cfg);

  int rc = run_cli("flow fp --config " + path_in("fp.json") + " --out " +
                   path_in("fp.csv") + " --report " + path_in("fp_rep.json"));
  CHECK(rc == 0);

  std::string csv = slurp(path_in("fp.csv"));
  CHECK(csv.rfind("# config_hash=fnv1a64:", 0) == 0);
  CHECK(csv.find("node,value\n") != std::string::npos);

  json rep = read_report(path_in("fp_rep.json"));
  CHECK(rep["flow"] == "fp");
  CHECK(rep["fp"]["steps"] == 1000);
  CHECK(std::abs(rep["mass"].get<double>() - 1.0) < 1e-9);
  CHECK(rep["results"][0]["name"] == "mass-conservation");
  CHECK(rep["all_pass"] == true);
}

TEST_CASE("the movement flow subcommand matches its own grid flow") {
  json cfg = json::object();
  cfg["potential"] = json::parse(R"({"kind":"quadratic","stiffness":1.0})");
  cfg["cells"] = 128;
  cfg["initial"] = json::parse(R"({"type":"gaussian","mean":0.4,"sigma":0.25})");
  cfg["t"] = 0.1;
  cfg["tau"] = 1e-3;
  cfg["quantiles"] = 128;
  write_config(path_in("jko.json"), cfg);

  int rc = run_cli("flow jko --config " + path_in("jko.json") + " --out " +
                   path_in("jko.csv") + " --report " + path_in("jko_rep.json"));
  CHECK(rc == 0);
  json rep = read_report(path_in("jko_rep.json"));
  CHECK(rep["flow"] == "jko");
  CHECK(rep["jko"]["newton_iterations"].get<std::int64_t>() > 0);
  CHECK(std::abs(rep["mass"].get<double>() - 1.0) < 1e-9);
}

TEST_CASE("entropy-transport diagnostics report through the flow subcommand") {
  json evi = json::object();
  evi["potential"] = json::parse(R"({"kind":"quadratic","stiffness":2.0})");
  evi["cells"] = 128;
  evi["initial"] = json::parse(R"({"type":"gaussian","mean":0.3,"sigma":0.4})");
  evi["times"] = json::array({0.0, 0.005, 0.01});
  evi["dt"] = 1e-4;
  evi["K"] = 0.0;
  write_config(path_in("evi.json"), evi);
  int rc = run_cli("flow evi --config " + path_in("evi.json") + " --out " +
                   path_in("evi.csv") + " --report " + path_in("evi_rep.json"));
  CHECK(rc == 0);
  json rep = read_report(path_in("evi_rep.json"));
  CHECK(rep["evi"]["check"] == "evi");
  CHECK(rep["all_pass"] == true);
  std::string csv = slurp(path_in("evi.csv"));
  CHECK(csv.find("t,lhs,rhs,residual\n") != std::string::npos);
}

TEST_CASE("an unattainable modulus fails loudly but still reports") {
  json cfg = json::object();
  cfg["potential"] = json::parse(R"({"kind":"quadratic","stiffness":1.0})");
  cfg["cells"] = 128;
  cfg["p0"] = json::parse(R"({"type":"gaussian","mean":-0.4,"sigma":0.25})");
  cfg["p1"] = json::parse(R"({"type":"gaussian","mean":0.4,"sigma":0.25})");
  cfg["samples"] = 7;
  cfg["K"] = 5.0;
  write_config(path_in("dispfail.json"), cfg);

  int rc = run_cli("flow dispconv --config " + path_in("dispfail.json") +
                   " --out " + path_in("dispfail.csv") + " --report " +
                   path_in("dispfail_rep.json"));
  CHECK(rc == 1);
  json rep = read_report(path_in("dispfail_rep.json"));
  CHECK(rep["all_pass"] == false);
  CHECK(rep["results"][0]["pass"] == false);
  CHECK(rep["dispconv"]["min_slack"].get<double>() < -5e-3);
}

TEST_CASE("configuration errors exit with the dedicated code") {
  // Missing config file.
  CHECK(run_cli("verify be --config " + path_in("nope.json") +
                " --report " + path_in("r.json")) == 2);

  // Unknown key in an otherwise valid config.
  json cfg = json::object();
  cfg["potential"] = base_potential();
  cfg["gamma"] = json::array({0.2});
  cfg["t"] = 0.05;
  cfg["n_paths"] = 100;
  cfg["typo_key"] = 1;
  write_config(path_in("typo.json"), cfg);
  CHECK(run_cli("verify be --config " + path_in("typo.json") +
                " --report " + path_in("r.json")) == 2);
  std::string err = slurp(work_dir() + "/stderr.txt");
  CHECK(err.find("unknown config key: typo_key") != std::string::npos);

  // Unknown subcommand argument rejected by the parser.
  CHECK(run_cli("verify bogus --config " + path_in("typo.json")) == 2);

  // Unknown potential kind.
  json bad = json::object();
  bad["potential"] = json::parse(R"({"kind":"cubic","beta":1.0})");
  bad["gamma"] = json::array({0.2});
  bad["t"] = 0.05;
  write_config(path_in("badkind.json"), bad);
  CHECK(run_cli("verify be --config " + path_in("badkind.json") +
                " --report " + path_in("r.json")) == 2);

  // A flow step violating the stability bound is a configuration error.
  json fp = json::object();
  fp["potential"] = json::parse(R"({"kind":"quadratic","stiffness":1.0})");
  fp["cells"] = 256;
  fp["initial"] = json::parse(R"({"type":"uniform"})");
  fp["t"] = 0.1;
  fp["dt"] = 0.01;
  write_config(path_in("cfl.json"), fp);
  CHECK(run_cli("flow fp --config " + path_in("cfl.json") + " --out " +
                path_in("cfl.csv") + " --report " + path_in("cfl_rep.json")) ==
        2);
}

TEST_CASE("consolidation merges reports and propagates failure") {
  // Reuse reports produced above; regenerate the two inputs if test order
  // ever changes.
  json ok = json::object();
  ok["results"] = json::array();
  json row = json::object();
  row["name"] = "synthetic";
  row["K"] = 0.0;
  row["t"] = 0.1;
  row["margin"] = 0.5;
  row["z"] = 3.0;
  row["pass"] = true;
  ok["results"].push_back(row);
  write_config(path_in("ok_rep.json"), ok);

  json bad = ok;
  bad["results"][0]["name"] = "synthetic-fail";
  bad["results"][0]["pass"] = false;
  write_config(path_in("bad_rep.json"), bad);

  int rc = run_cli("report " + path_in("ok_rep.json") + " --out " +
                   path_in("sum_ok.csv") + " --json " + path_in("sum_ok.json"));
  CHECK(rc == 0);
  json sum = read_report(path_in("sum_ok.json"));
  CHECK(sum["command"] == "report");
  CHECK(sum["all_pass"] == true);
  CHECK(sum["rows"].size() == 1);

  rc = run_cli("report " + path_in("ok_rep.json") + " " +
               path_in("bad_rep.json") + " --out " + path_in("sum_bad.csv") +
               " --json " + path_in("sum_bad.json"));
  CHECK(rc == 1);
  std::string csv = slurp(path_in("sum_bad.csv"));
  CHECK(csv.find("name,K,t,margin,z,pass\n") != std::string::npos);
  CHECK(csv.find("synthetic-fail") != std::string::npos);
  json sum2 = read_report(path_in("sum_bad.json"));
  CHECK(sum2["all_pass"] == false);
  CHECK(sum2["rows"].size() == 2);

  // No inputs: an empty table that trivially passes.
  CHECK(run_cli("report --out " + path_in("sum_empty.csv") + " --json " +
                path_in("sum_empty.json")) == 0);

  // A malformed report file is a configuration error.
  write_config(path_in("noresults.json"), json::object());
  CHECK(run_cli("report " + path_in("noresults.json") + " --out " +
                path_in("x.csv") + " --json " + path_in("x.json")) == 2);
}
