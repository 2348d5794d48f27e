// mediate: mediation analysis of two-arm experiments.
//
//   mediate analyze  --input data.csv --treatment-col T --mediator-col M1 --outcome-col Y
//   mediate simulate --spec spec.json --n 10000 --seed 1 --out run1
//   mediate validate --suite coverage --reps 500 --seed 1
//
// Exit status: 0 ok, 1 validation failure, 2 input error, 3 estimation error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <charconv>
#include <string>

#include "CLI11.hpp"
#include "mediate/mediate.hpp"
#include "mediate/validation.hpp"

namespace {

enum ExitCode { kOk = 0, kValidationFailed = 1, kInputError = 2, kEstimationError = 3 };

struct AnalyzeOptions {
  std::string input;
  mediate::ColumnMapping columns;
  std::string kernel = "lag0";
  std::string bandwidth = "auto";
  double tol = 1e-8;
  int max_iter = 100;
  std::string format = "text";
};

struct SimulateOptions {
  std::string spec;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

struct ValidateOptions {
  std::string suite;
  int reps = 0;
  std::uint64_t seed = 1;
};

mediate::HacConfig hac_config(const AnalyzeOptions& o) {
  mediate::HacConfig config;
  config.kernel = o.kernel == "bartlett" ? mediate::Kernel::bartlett : mediate::Kernel::lag0;
  if (o.bandwidth == "auto") {
    config.bandwidth = mediate::AutoBandwidth{};
  } else {
    std::size_t lags = 0;
    const auto* end = o.bandwidth.data() + o.bandwidth.size();
    const auto [ptr, ec] = std::from_chars(o.bandwidth.data(), end, lags);
    if (ec != std::errc() || ptr != end) {
      throw mediate::Error(mediate::ErrorKind::InvalidArgument, "--bandwidth must be 'auto' or a nonnegative integer");
    }
    config.bandwidth = mediate::FixedBandwidth{lags};
  }
  return config;
}

int run_analyze(const AnalyzeOptions& o) {
  const auto table = mediate::read_csv_file(o.input, o.columns);
  const auto report = mediate::analyze(table, hac_config(o), o.tol, o.max_iter);
  const auto format = o.format == "json"  ? mediate::OutputFormat::json
                      : o.format == "csv" ? mediate::OutputFormat::csv
                                          : mediate::OutputFormat::text;
  mediate::write_report(std::cout, report, format);
  return kOk;
}

int run_simulate(const SimulateOptions& o) {
  std::ifstream in(o.spec);
  if (!in) throw mediate::Error(mediate::ErrorKind::IoError, "cannot open spec file " + o.spec);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw mediate::Error(mediate::ErrorKind::SpecParseError, e.what());
  }
  const auto spec = mediate::spec_from_json(j);
  const auto truth = mediate::true_effects_from_structural(spec);
  const auto table = mediate::simulate(spec, o.n, o.seed);

  std::ofstream csv_out(o.out + ".csv", std::ios::binary);
  if (!csv_out) throw mediate::Error(mediate::ErrorKind::IoError, "cannot write " + o.out + ".csv");
  mediate::write_csv(csv_out, table);

  std::ofstream truth_out(o.out + ".truth.json", std::ios::binary);
  if (!truth_out) throw mediate::Error(mediate::ErrorKind::IoError, "cannot write " + o.out + ".truth.json");
  truth_out << mediate::json_io::truth_json(truth).dump(2) << '\n';
  return kOk;
}

int run_validate(const ValidateOptions& o) {
  namespace v = mediate::validation;
  const std::uint64_t seed = o.seed;
  auto reps_or = [&](int fallback) { return o.reps > 0 ? o.reps : fallback; };
  v::SuiteResult result;
  if (o.suite == "identity") {
    result = v::identity_suite(reps_or(50), 5000, seed);
  } else if (o.suite == "additivity") {
    result = v::additivity_suite();
  } else if (o.suite == "consistency") {
    result = v::consistency_suite(reps_or(20), 1'000'000, seed);
  } else if (o.suite == "coverage") {
    result = v::filter_suite(v::sampling_suite(reps_or(500), 10'000, seed), "coverage", "coverage:");
  } else if (o.suite == "delta") {
    result = v::filter_suite(v::sampling_suite(reps_or(500), 10'000, seed), "delta", "delta:");
  } else if (o.suite == "oracle") {
    result = v::oracle_suite(reps_or(10), 200'000, seed);
  } else if (o.suite == "exact") {
    result = v::exact_identification_suite(reps_or(20), 20'000, seed);
  } else if (o.suite == "null") {
    result = v::null_calibration_suite(reps_or(500), 10'000, seed);
  } else if (o.suite == "residuals") {
    result = v::residual_suite(1'000'000, seed);
  } else {
    throw mediate::Error(mediate::ErrorKind::InvalidArgument, "unknown suite " + o.suite);
  }
  v::print_suite(stdout, result);
  return result.passed() ? kOk : kValidationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mediation analysis for two-arm experiments"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: MEDIATE_THREADS or all cores)");

  AnalyzeOptions analyze;
  auto* a = app.add_subcommand("analyze", "Estimate GADE, GACME and ATE from a CSV file");
  a->add_option("--input", analyze.input, "CSV file (.csv or .csv.gz)")->required();
  a->add_option("--treatment-col", analyze.columns.treatment)->required();
  a->add_option("--mediator-col", analyze.columns.mediator)->required();
  a->add_option("--outcome-col", analyze.columns.outcome)->required();
  a->add_option("--kernel", analyze.kernel)->check(CLI::IsMember({"lag0", "bartlett"}));
  a->add_option("--bandwidth", analyze.bandwidth, "auto or number of lags");
  a->add_option("--tol", analyze.tol)->check(CLI::PositiveNumber);
  a->add_option("--max-iter", analyze.max_iter)->check(CLI::Range(1, 1'000'000));
  a->add_option("--format", analyze.format)->check(CLI::IsMember({"text", "json", "csv"}));

  SimulateOptions simulate;
  auto* s = app.add_subcommand("simulate", "Draw data and ground truth from a structural spec");
  s->add_option("--spec", simulate.spec, "Spec JSON file")->required();
  s->add_option("--n", simulate.n, "Number of units")->required();
  s->add_option("--seed", simulate.seed)->required();
  s->add_option("--out", simulate.out, "Output prefix")->required();

  ValidateOptions validate;
  auto* v = app.add_subcommand("validate", "Run a self-checking Monte Carlo suite");
  v->add_option("--suite", validate.suite, "identity, consistency, coverage, delta, additivity, oracle, exact, null, residuals")
      ->required();
  v->add_option("--reps", validate.reps, "Replications (0 = suite default)");
  v->add_option("--seed", validate.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }
  if (threads > 0) mediate::set_thread_count(threads);

  try {
    if (*a) return run_analyze(analyze);
    if (*s) return run_simulate(simulate);
    return run_validate(validate);
  } catch (const mediate::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mediate::is_input_error(e.kind()) ? kInputError : kEstimationError;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << '\n';
    return kEstimationError;
  }
}
