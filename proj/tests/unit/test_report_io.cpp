#include <catch_amalgamated.hpp>

#include <sstream>

#include "mediate/lsem.hpp"
#include "mediate/report_io.hpp"

using namespace mediate;

namespace {

EffectReport sample_report() { return analyze(simulate(random_spec(1, 2, 3), 20'000, 4)); }

std::vector<std::vector<std::string>> table_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::vector<std::string> row;
    for (std::string f; fields >> f;) row.push_back(f);
    if (!row.empty() && (row[0].rfind("GADE(", 0) == 0 || row[0].rfind("GACME(", 0) == 0 || row[0] == "ATE")) {
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("text and JSON reports agree after display rounding") {
  const auto report = sample_report();
  std::ostringstream text, json;
  write_report(text, report, OutputFormat::text);
  write_report(json, report, OutputFormat::json);
  const auto j = nlohmann::json::parse(json.str());
  const auto rows = table_rows(text.str());
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& e = j["effects"][std::string(kEffectKeys[i])];
    CHECK(rows[i][0] == kEffectLabels[i]);
    CHECK(rows[i][1] == format_percent(e["pct_change"].get<double>()) + "%");
    CHECK(rows[i][2] == format_sig6(e["value"].get<double>()));
    CHECK(rows[i][3] == format_sig6(e["std_error"].get<double>()));
    const std::string stars = e["stars"].get<std::string>();
    if (!stars.empty()) CHECK(rows[i].back() == stars);
  }
  CHECK(text.str().find("% Change = Effect/Mean of Control") != std::string::npos);
}

TEST_CASE("JSON report carries full-precision values, theta and covariance") {
  const auto report = sample_report();
  const auto j = report_json(report);
  CHECK(j["effects"]["ate"]["value"].get<double>() == report.ate.value);
  CHECK(j["effects"]["gade0"]["arm"].get<int>() == 0);
  CHECK_FALSE(j["effects"]["ate"].contains("arm"));
  CHECK(j["theta"]["theta_y3"].get<double>() == report.theta.y3);
  CHECK(j["covariance"].size() == 6);
  CHECK(j["covariance"][2][4].get<double>() == report.covariance(2, 4));
  CHECK(j["n"].get<std::size_t>() == 20'000);
  CHECK(j["estimator"]["kernel"] == "lag0");
  const double ate = j["effects"]["ate"]["value"].get<double>();
  const double parts = j["effects"]["gade0"]["value"].get<double>() + j["effects"]["gacme1"]["value"].get<double>();
  CHECK(std::fabs(ate - parts) < 1e-10);
}

TEST_CASE("CSV report has one row per effect") {
  std::ostringstream out;
  write_report(out, sample_report(), OutputFormat::csv);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "effect,value,std_error,z,p_value,pct_change,pct_std_error,stars");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
}

TEST_CASE("display formats") {
  CHECK(format_percent(0.004959) == "0.4959");
  CHECK(format_percent(-0.0037094) == "-0.3709");
  CHECK(format_sig6(0.000123456789) == "0.000123457");
  CHECK(format_sig6(1234567.0) == "1.23457e+06");
}
