#pragma once

#include <zlib.h>

#include <algorithm>
#include <concepts>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "mediate/error.hpp"
#include "mediate/numeric.hpp"

namespace mediate {

/// One user in an A/B test: assignment, measured mediator and outcome.
/// Binary outcomes are carried as 0.0/1.0 and modeled linearly.
struct ObservationRecord {
  std::string_view unit_id;
  int treatment = 0;
  double mediator = 0.0;
  double outcome = 0.0;
};

enum class Arm { control = 0, treatment = 1 };

struct ArmSummary {
  Arm arm = Arm::control;
  double mean_outcome = 0.0;
  double mean_mediator = 0.0;
  std::size_t count = 0;
};

/// Validated, immutable column store of observations. Row order is the input
/// order; it only matters for HAC lags.
class ObservationTable {
 public:
  static ObservationTable from_columns(std::vector<std::uint8_t> treatment, std::vector<double> mediator,
                                       std::vector<double> outcome, std::vector<std::string> unit_ids = {}) {
    const std::size_t n = treatment.size();
    if (mediator.size() != n || outcome.size() != n || (!unit_ids.empty() && unit_ids.size() != n)) {
      throw Error(ErrorKind::DimensionMismatch, "observation columns have different lengths");
    }
    std::size_t treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (treatment[i] > 1) {
        throw Error(ErrorKind::BadTreatmentValue, "row " + std::to_string(i) + ": treatment must be 0 or 1");
      }
      if (!std::isfinite(mediator[i]) || !std::isfinite(outcome[i])) {
        throw Error(ErrorKind::NonFiniteValue, "row " + std::to_string(i) + ": mediator/outcome not finite");
      }
      treated += treatment[i];
    }
    const std::size_t control = n - treated;
    if (treated < 2 || control < 2) {
      throw Error(ErrorKind::DegenerateArm, "each arm needs at least 2 rows (control=" + std::to_string(control) +
                                                ", treated=" + std::to_string(treated) + ")");
    }
    ObservationTable table;
    table.treatment_ = std::move(treatment);
    table.mediator_ = std::move(mediator);
    table.outcome_ = std::move(outcome);
    table.unit_ids_ = std::move(unit_ids);
    table.n_treated_ = treated;
    table.n_control_ = control;
    return table;
  }

  std::size_t size() const noexcept { return treatment_.size(); }
  std::size_t n_treated() const noexcept { return n_treated_; }
  std::size_t n_control() const noexcept { return n_control_; }
  bool has_unit_ids() const noexcept { return !unit_ids_.empty(); }

  std::span<const std::uint8_t> treatment() const noexcept { return treatment_; }
  std::span<const double> mediator() const noexcept { return mediator_; }
  std::span<const double> outcome() const noexcept { return outcome_; }

  ObservationRecord record(std::size_t i) const {
    ObservationRecord r;
    if (has_unit_ids()) r.unit_id = unit_ids_[i];
    r.treatment = treatment_[i];
    r.mediator = mediator_[i];
    r.outcome = outcome_[i];
    return r;
  }

  /// Largest absolute mediator or outcome value; scales numerical tolerances.
  double max_abs_value() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max({m, std::fabs(mediator_[i]), std::fabs(outcome_[i])});
    return m;
  }

 private:
  ObservationTable() = default;

  std::vector<std::uint8_t> treatment_;
  std::vector<double> mediator_;
  std::vector<double> outcome_;
  std::vector<std::string> unit_ids_;
  std::size_t n_treated_ = 0;
  std::size_t n_control_ = 0;
};

/// Per-arm means and counts, (control, treatment).
inline std::pair<ArmSummary, ArmSummary> summarize(const ObservationTable& table) {
  struct Partial {
    CompensatedArray<4> sums;  // outcome/mediator per arm
    void merge(const Partial& o) { sums.merge(o.sums); }
  };
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto y = table.outcome();
  const Partial total = reduce_chunks<Partial>(table.size(), [&](std::size_t b, std::size_t e) {
    Partial p;
    for (std::size_t i = b; i < e; ++i) {
      const std::size_t arm = t[i];
      p.sums.add(2 * arm, y[i]);
      p.sums.add(2 * arm + 1, m[i]);
    }
    return p;
  });

  ArmSummary control{Arm::control, total.sums[0] / static_cast<double>(table.n_control()),
                     total.sums[1] / static_cast<double>(table.n_control()), table.n_control()};
  ArmSummary treated{Arm::treatment, total.sums[2] / static_cast<double>(table.n_treated()),
                     total.sums[3] / static_cast<double>(table.n_treated()), table.n_treated()};
  return {control, treated};
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct ColumnMapping {
  std::string treatment = "T";
  std::string mediator = "M1";
  std::string outcome = "Y";
  std::optional<std::string> unit_id;
};

namespace csv {

/// Splits one CSV line. Supports double-quoted fields with "" escapes;
/// surrounding whitespace is trimmed from unquoted fields.
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  auto flush = [&] {
    if (!was_quoted) {
      const auto first = field.find_first_not_of(" \t");
      const auto last = field.find_last_not_of(" \t");
      field = first == std::string::npos ? std::string() : field.substr(first, last - first + 1);
    }
    fields.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
      field.clear();
    } else if (c == ',') {
      flush();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  flush();
  return fields;
}

enum class NumberStatus { ok, missing, non_finite, malformed };

inline NumberStatus parse_number(std::string_view text, double& out) {
  if (text.empty() || text == "NA" || text == "na" || text == "null") return NumberStatus::missing;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) return NumberStatus::malformed;
  return std::isfinite(out) ? NumberStatus::ok : NumberStatus::non_finite;
}

/// Shortest round-trip representation of a double.
inline std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

class StreamLines {
 public:
  explicit StreamLines(std::istream& in) : in_(in) {}
  bool next(std::string& line) { return static_cast<bool>(std::getline(in_, line)); }

 private:
  std::istream& in_;
};

class GzipLines {
 public:
  explicit GzipLines(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (file_ == nullptr) throw Error(ErrorKind::IoError, "cannot open " + path);
  }
  GzipLines(const GzipLines&) = delete;
  GzipLines& operator=(const GzipLines&) = delete;
  ~GzipLines() {
    if (file_ != nullptr) gzclose(file_);
  }

  bool next(std::string& line) {
    line.clear();
    char buf[8192];
    while (gzgets(file_, buf, sizeof(buf)) != nullptr) {
      line.append(buf);
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        return true;
      }
    }
    int err = Z_OK;
    gzerror(file_, &err);
    if (err != Z_OK && err != Z_STREAM_END) throw Error(ErrorKind::IoError, "gzip stream is corrupt");
    return !line.empty();
  }

 private:
  gzFile file_;
};

}  // namespace csv

/// Reads a header-led CSV from any line source and binds the mapped columns.
/// Rows with missing or unparseable values are rejected, never imputed.
template <class LineSource>
  requires requires(LineSource& s, std::string& l) { { s.next(l) } -> std::convertible_to<bool>; }
ObservationTable ingest(LineSource& source, const ColumnMapping& mapping) {
  std::string line;
  if (!source.next(line)) throw Error(ErrorKind::ParseError, "input is empty (no header row)");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  const auto header = csv::split_line(line);
  auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorKind::MissingColumn, "column '" + name + "' not in header");
  };
  const std::size_t t_col = column_of(mapping.treatment);
  const std::size_t m_col = column_of(mapping.mediator);
  const std::size_t y_col = column_of(mapping.outcome);
  const std::optional<std::size_t> id_col =
      mapping.unit_id ? std::optional<std::size_t>(column_of(*mapping.unit_id)) : std::nullopt;

  std::vector<std::uint8_t> treatment;
  std::vector<double> mediator;
  std::vector<double> outcome;
  std::vector<std::string> ids;

  std::size_t line_no = 1;
  while (source.next(line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split_line(line);
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::ParseError, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    const std::string& t = fields[t_col];
    if (t == "0") {
      treatment.push_back(0);
    } else if (t == "1") {
      treatment.push_back(1);
    } else if (t.empty()) {
      throw Error(ErrorKind::MissingValue, where + ": treatment is empty");
    } else {
      throw Error(ErrorKind::BadTreatmentValue, where + ": treatment '" + t + "' is not 0 or 1");
    }
    for (const auto& [col, dest, label] : {std::tuple{m_col, &mediator, "mediator"}, std::tuple{y_col, &outcome, "outcome"}}) {
      double v = 0.0;
      switch (csv::parse_number(fields[col], v)) {
        case csv::NumberStatus::ok: dest->push_back(v); break;
        case csv::NumberStatus::missing:
          throw Error(ErrorKind::MissingValue, where + ": " + label + " is missing");
        case csv::NumberStatus::non_finite:
          throw Error(ErrorKind::NonFiniteValue, where + ": " + label + " is not finite");
        case csv::NumberStatus::malformed:
          throw Error(ErrorKind::ParseError, where + ": " + label + " '" + fields[col] + "' is not a number");
      }
    }
    if (id_col) ids.push_back(fields[*id_col]);
  }
  return ObservationTable::from_columns(std::move(treatment), std::move(mediator), std::move(outcome), std::move(ids));
}

inline ObservationTable ingest(std::istream& in, const ColumnMapping& mapping) {
  csv::StreamLines lines(in);
  return ingest(lines, mapping);
}

/// Reads a CSV file; names ending in ".gz" are decompressed on the fly.
inline ObservationTable read_csv_file(const std::string& path, const ColumnMapping& mapping) {
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    csv::GzipLines lines(path);
    return ingest(lines, mapping);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return ingest(in, mapping);
}

/// Writes (T, M1, Y) with a header row and round-trip precision.
inline void write_csv(std::ostream& out, const ObservationTable& table, const ColumnMapping& mapping = {}) {
  out << mapping.treatment << ',' << mapping.mediator << ',' << mapping.outcome << '\n';
  const auto t = table.treatment();
  const auto m = table.mediator();
  const auto y = table.outcome();
  std::string row;
  for (std::size_t i = 0; i < table.size(); ++i) {
    row.clear();
    row += t[i] ? '1' : '0';
    row += ',';
    row += csv::format_number(m[i]);
    row += ',';
    row += csv::format_number(y[i]);
    row += '\n';
    out << row;
  }
}

}  // namespace mediate
