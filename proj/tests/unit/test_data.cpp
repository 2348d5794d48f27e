#include <catch_amalgamated.hpp>

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include "mediate/data.hpp"
#include "mediate/lsem.hpp"

using namespace mediate;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected mediate::Error");
  return ErrorKind::InternalInconsistency;
}

ObservationTable from_text(const std::string& text, const ColumnMapping& mapping = {}) {
  std::istringstream in(text);
  return ingest(in, mapping);
}

}  // namespace

TEST_CASE("table construction validates its columns") {
  CHECK(kind_of([] { ObservationTable::from_columns({0, 0, 1, 1}, {1, 2, 3}, {1, 2, 3, 4}); }) ==
        ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { ObservationTable::from_columns({0, 0, 1, 2}, {1, 2, 3, 4}, {1, 2, 3, 4}); }) ==
        ErrorKind::BadTreatmentValue);
  CHECK(kind_of([] {
          ObservationTable::from_columns({0, 0, 1, 1}, {1, 2, std::numeric_limits<double>::quiet_NaN(), 4},
                                         {1, 2, 3, 4});
        }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([] { ObservationTable::from_columns({0, 1, 1, 1}, {1, 2, 3, 4}, {1, 2, 3, 4}); }) ==
        ErrorKind::DegenerateArm);
  const auto t = ObservationTable::from_columns({0, 1, 0, 1}, {1, 2, 3, 4}, {5, 6, 7, 8});
  CHECK(t.size() == 4);
  CHECK(t.n_treated() == 2);
  CHECK(t.n_control() == 2);
  CHECK(t.max_abs_value() == 8.0);
  CHECK(t.record(1).treatment == 1);
  CHECK(t.record(1).mediator == 2.0);
  CHECK(t.record(1).outcome == 6.0);
}

TEST_CASE("arm summaries match direct averages") {
  const auto table = simulate(random_spec(1, 1, 3), 5000, 9);
  double sy[2] = {0, 0}, sm[2] = {0, 0};
  std::size_t n[2] = {0, 0};
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto r = table.record(i);
    sy[r.treatment] += r.outcome;
    sm[r.treatment] += r.mediator;
    ++n[r.treatment];
  }
  const auto [control, treated] = summarize(table);
  CHECK(control.arm == Arm::control);
  CHECK(treated.arm == Arm::treatment);
  CHECK(control.count == n[0]);
  CHECK(treated.count == n[1]);
  CHECK(control.mean_outcome == Catch::Approx(sy[0] / n[0]).epsilon(1e-12));
  CHECK(treated.mean_outcome == Catch::Approx(sy[1] / n[1]).epsilon(1e-12));
  CHECK(control.mean_mediator == Catch::Approx(sm[0] / n[0]).epsilon(1e-12));
  CHECK(treated.mean_mediator == Catch::Approx(sm[1] / n[1]).epsilon(1e-12));
}

TEST_CASE("CSV field splitting") {
  using csv::split_line;
  CHECK(split_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_line(" a , b ,c\r") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_line(R"("x,y","say ""hi""",)") == std::vector<std::string>{"x,y", "say \"hi\"", ""});
  CHECK(split_line("") == std::vector<std::string>{""});
}

TEST_CASE("CSV number parsing classifies every field") {
  double v = 0.0;
  CHECK(csv::parse_number("1.5e3", v) == csv::NumberStatus::ok);
  CHECK(v == 1500.0);
  CHECK(csv::parse_number("+2", v) == csv::NumberStatus::ok);
  CHECK(v == 2.0);
  CHECK(csv::parse_number("", v) == csv::NumberStatus::missing);
  CHECK(csv::parse_number("NA", v) == csv::NumberStatus::missing);
  CHECK(csv::parse_number("inf", v) == csv::NumberStatus::non_finite);
  CHECK(csv::parse_number("nan", v) == csv::NumberStatus::non_finite);
  CHECK(csv::parse_number("1.2.3", v) == csv::NumberStatus::malformed);
  CHECK(csv::parse_number("abc", v) == csv::NumberStatus::malformed);
}

TEST_CASE("ingestion binds named columns in any order") {
  ColumnMapping mapping{"arm", "sessions", "revenue", "id"};
  const auto t = from_text("\xEF\xBB\xBFid,revenue,arm,sessions\nu1,10,0,1\nu2,11,1,2\nu3,9,0,3\nu4,12,1,4\n", mapping);
  CHECK(t.size() == 4);
  CHECK(t.has_unit_ids());
  CHECK(t.record(1).unit_id == "u2");
  CHECK(t.record(1).treatment == 1);
  CHECK(t.record(1).mediator == 2.0);
  CHECK(t.record(1).outcome == 11.0);
}

TEST_CASE("ingestion errors are typed") {
  CHECK(kind_of([] { from_text(""); }) == ErrorKind::ParseError);
  CHECK(kind_of([] { from_text("T,M,Y\n0,1,2\n"); }) == ErrorKind::MissingColumn);
  CHECK(kind_of([] { from_text("T,M1,Y\n0,1,2\n1,1\n"); }) == ErrorKind::ParseError);
  CHECK(kind_of([] { from_text("T,M1,Y\n2,1,2\n"); }) == ErrorKind::BadTreatmentValue);
  CHECK(kind_of([] { from_text("T,M1,Y\n0.0,1,2\n"); }) == ErrorKind::BadTreatmentValue);
  CHECK(kind_of([] { from_text("T,M1,Y\n,1,2\n"); }) == ErrorKind::MissingValue);
  CHECK(kind_of([] { from_text("T,M1,Y\n0,NA,2\n"); }) == ErrorKind::MissingValue);
  CHECK(kind_of([] { from_text("T,M1,Y\n0,1,inf\n"); }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([] { from_text("T,M1,Y\n0,1,x\n"); }) == ErrorKind::ParseError);
  CHECK(kind_of([] { from_text("T,M1,Y\n0,1,2\n0,1,2\n1,1,2\n"); }) == ErrorKind::DegenerateArm);
  CHECK(kind_of([] { read_csv_file("/nonexistent/file.csv", {}); }) == ErrorKind::IoError);
}

TEST_CASE("CSV round trip is exact") {
  const auto table = simulate(random_spec(3, 1, 4), 2000, 5);
  std::ostringstream out;
  write_csv(out, table);
  const auto back = from_text(out.str());
  REQUIRE(back.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(back.treatment()[i] == table.treatment()[i]);
    CHECK(back.mediator()[i] == table.mediator()[i]);
    CHECK(back.outcome()[i] == table.outcome()[i]);
  }
}

TEST_CASE("gzip input is read transparently") {
  const auto table = simulate(random_spec(0, 0, 6), 1000, 7);
  std::ostringstream out;
  write_csv(out, table);
  const std::string text = out.str();

  const auto dir = std::filesystem::temp_directory_path();
  const auto gz_path = (dir / "mediate_test_input.csv.gz").string();
  gzFile f = gzopen(gz_path.c_str(), "wb");
  REQUIRE(f != nullptr);
  REQUIRE(gzwrite(f, text.data(), static_cast<unsigned>(text.size())) == static_cast<int>(text.size()));
  gzclose(f);

  const auto back = read_csv_file(gz_path, {});
  std::filesystem::remove(gz_path);
  REQUIRE(back.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) CHECK(back.outcome()[i] == table.outcome()[i]);
}
