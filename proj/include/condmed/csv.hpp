#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "condmed/estimator.hpp"
#include "condmed/point.hpp"

namespace condmed {

struct IngestStats {
  std::int64_t records = 0;  // rows delivered to the sink
  std::int64_t skipped = 0;  // malformed or non-finite rows
  int dim = 0;               // response dimension declared by the header
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view field, double& out) {
  field = trim(field);
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace detail

/// Streams `x,y1,...,yd` CSV records into the sink in file order, one pass,
/// constant memory. The header fixes the dimension. Rows with the wrong
/// field count, unparseable numbers, or non-finite values are skipped and
/// counted; more than 10% skipped rows is a fatal input error, as is a
/// missing or malformed header.
inline IngestStats ingest_stream(std::istream& in, const RecordFn& sink) {
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("ingest: empty input, expected a header row");

  const auto header = detail::split_fields(line);
  if (header.size() < 2 || detail::trim(header[0]) != "x")
    throw std::invalid_argument("ingest: header must be x,y1,...,yd");
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (detail::trim(header[i]) != "y" + std::to_string(i))
      throw std::invalid_argument("ingest: header must be x,y1,...,yd");
  }

  IngestStats stats;
  stats.dim = static_cast<int>(header.size()) - 1;
  Point y(stats.dim);

  while (std::getline(in, line)) {
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto fields = detail::split_fields(view);
    bool ok = fields.size() == header.size();
    double x = 0.0;
    if (ok) ok = detail::parse_double(fields[0], x) && std::isfinite(x);
    for (int j = 0; ok && j < stats.dim; ++j) {
      ok = detail::parse_double(fields[static_cast<std::size_t>(j) + 1], y[j]) &&
           std::isfinite(y[j]);
    }
    if (!ok) {
      ++stats.skipped;
      continue;
    }
    sink(x, y);
    ++stats.records;
  }

  if (stats.skipped * 10 > stats.records + stats.skipped)
    throw std::invalid_argument("ingest: more than 10% of data rows are malformed");
  return stats;
}

/// Replayable record source backed by a CSV file: each invocation re-opens
/// and re-parses the file, so multi-start drivers can take several passes.
inline RecordSource make_file_source(std::string path) {
  return [path = std::move(path)](const RecordFn& sink) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("ingest: cannot open file: " + path);
    ingest_stream(in, sink);
  };
}

/// Numbers are emitted with 9 significant digits: compact, and stable
/// enough for bit-identical determinism checks on one platform.
inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline void write_csv_header(std::ostream& out, const std::string& prefix, int d,
                             const std::string& first = "") {
  bool sep = false;
  if (!first.empty()) {
    out << first;
    sep = true;
  }
  for (int j = 1; j <= d; ++j) {
    if (sep) out << ',';
    out << prefix << j;
    sep = true;
  }
  out << '\n';
}

inline void write_csv_row(std::ostream& out, const Point& y, const double* x = nullptr) {
  bool sep = false;
  if (x != nullptr) {
    out << format_g9(*x);
    sep = true;
  }
  for (int j = 0; j < y.size(); ++j) {
    if (sep) out << ',';
    out << format_g9(y[j]);
    sep = true;
  }
  out << '\n';
}

}  // namespace condmed
