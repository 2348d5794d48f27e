#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "mediate_cli_test";
  fs::create_directories(dir);
  return dir;
}

Result run(const std::string& args) {
  const auto dir = scratch();
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(MEDIATE_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string spec(const char* name) { return std::string(MEDIATE_SPECS) + "/" + name; }

}  // namespace

TEST_CASE("simulate writes one CSV line per unit plus a header") {
  const auto prefix = (scratch() / "rows").string();
  REQUIRE(run("simulate --spec " + spec("direct_only.json") + " --n 100 --seed 1 --out " + prefix).code == 0);
  std::ifstream in(prefix + ".csv");
  std::string line;
  int lines = 0;
  std::getline(in, line);
  CHECK(line == "T,M1,Y");
  ++lines;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 101);
  const auto truth = nlohmann::json::parse(slurp(prefix + ".truth.json"));
  CHECK(truth.contains("theta_true"));
}

TEST_CASE("simulate is deterministic in its seed") {
  const auto a = (scratch() / "det_a").string();
  const auto b = (scratch() / "det_b").string();
  const auto c = (scratch() / "det_c").string();
  for (const auto& [prefix, seed] : {std::pair{a, 5}, std::pair{b, 5}, std::pair{c, 6}}) {
    REQUIRE(run("simulate --spec " + spec("two_layer.json") + " --n 5000 --seed " + std::to_string(seed) +
                " --out " + prefix)
                .code == 0);
  }
  CHECK(slurp(a + ".csv") == slurp(b + ".csv"));
  CHECK(slurp(a + ".truth.json") == slurp(b + ".truth.json"));
  CHECK(slurp(a + ".csv") != slurp(c + ".csv"));
}

TEST_CASE("truth of a spec without treatment pathways is exactly zero") {
  const auto prefix = (scratch() / "null").string();
  REQUIRE(run("simulate --spec " + spec("no_treatment.json") + " --n 10 --seed 1 --out " + prefix).code == 0);
  const auto truth = nlohmann::json::parse(slurp(prefix + ".truth.json"));
  for (const char* key : {"gade0", "gade1", "gacme0", "gacme1", "ate"}) CHECK(truth[key].get<double>() == 0.0);
}

TEST_CASE("analyze reports a decomposed ATE in JSON") {
  const auto prefix = (scratch() / "analyze").string();
  REQUIRE(run("simulate --spec " + spec("two_layer.json") + " --n 20000 --seed 3 --out " + prefix).code == 0);
  const auto r = run("analyze --input " + prefix +
                     ".csv --treatment-col T --mediator-col M1 --outcome-col Y --format json --kernel bartlett");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto& e = j["effects"];
  CHECK(std::fabs(e["ate"]["value"].get<double>() -
                  (e["gade0"]["value"].get<double>() + e["gacme1"]["value"].get<double>())) < 1e-10);
  CHECK(j["estimator"]["kernel"] == "bartlett");

  const auto text = run("analyze --input " + prefix + ".csv --treatment-col T --mediator-col M1 --outcome-col Y");
  CHECK(text.code == 0);
  CHECK(text.out.find("% Change = Effect/Mean of Control") != std::string::npos);
}

TEST_CASE("exit codes and error names") {
  const auto prefix = (scratch() / "codes").string();
  REQUIRE(run("simulate --spec " + spec("direct_only.json") + " --n 50 --seed 1 --out " + prefix).code == 0);

  const auto missing = run("analyze --input " + prefix + ".csv --treatment-col T --mediator-col M --outcome-col Y");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("MissingColumn") != std::string::npos);

  const auto nofile = run("analyze --input /nonexistent.csv --treatment-col T --mediator-col M1 --outcome-col Y");
  CHECK(nofile.code == 2);

  const auto bad_spec = scratch() / "bad_spec.json";
  std::ofstream(bad_spec) << R"({"k_upstream": 2, "alpha0": [1.0]})";
  const auto dims = run("simulate --spec " + bad_spec.string() + " --n 10 --seed 1 --out " + prefix);
  CHECK(dims.code == 2);
  CHECK(dims.err.find("DimensionMismatch") != std::string::npos);

  const auto flat = scratch() / "flat.csv";
  std::ofstream(flat) << "T,M1,Y\n0,1,2\n0,2,3\n0,3,4\n1,1,5\n1,2,6\n1,3,7\n";
  const auto singular = run("analyze --input " + flat.string() + " --treatment-col T --mediator-col M1 --outcome-col Y");
  CHECK(singular.code == 3);
  CHECK(singular.err.find("SingularOmega") != std::string::npos);

  CHECK(run("validate --suite additivity").code == 0);
  CHECK(run("validate --suite nonsense").code == 2);
  CHECK(run("analyze --input x.csv").code == 2);
}
