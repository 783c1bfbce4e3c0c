#include "meterdown/ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "meterdown/error.hpp"

namespace meterdown {

namespace {

using namespace std::chrono;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

[[noreturn]] void fail_row(std::string code, std::size_t line, std::size_t column,
                           std::string_view column_name, const std::string& detail) {
  throw Error(std::move(code),
              "line " + std::to_string(line) + ", column " + std::to_string(column) + " (" +
                  std::string(column_name) + "): " + detail,
              {{"line", line}, {"column", column}, {"column_name", column_name}});
}

bool parse_flag(std::string_view field, bool& out) {
  if (field == "1") {
    out = true;
    return true;
  }
  if (field == "0") {
    out = false;
    return true;
  }
  return false;
}

template <typename Int>
bool parse_int(std::string_view field, Int& out) {
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc{} && ptr == end && !field.empty();
}

// Reads the header line and every non-blank data line with its 1-based line number.
std::vector<std::pair<std::size_t, std::string>> read_rows(std::istream& source,
                                                           std::string_view expected_header) {
  std::string line;
  if (!std::getline(source, line)) {
    throw Error("csv.missing_header", "missing header, expected '" + std::string(expected_header) + "'",
                {{"line", 1}, {"expected", expected_header}});
  }
  std::string_view header = strip_cr(line);
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (header != expected_header) {
    throw Error("csv.bad_header", "unexpected header '" + std::string(header) + "'",
                {{"line", 1}, {"expected", expected_header}, {"found", header}});
  }
  std::vector<std::pair<std::size_t, std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    const auto stripped = strip_cr(line);
    if (stripped.empty()) continue;
    rows.emplace_back(line_no, std::string(stripped));
  }
  return rows;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) ||
      !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::string format_date(Date date) {
  const year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int days_between(Date from, Date to) { return static_cast<int>((to - from).count()); }

int current_utc_year() {
  const year_month_day today{floor<days>(system_clock::now())};
  return static_cast<int>(today.year());
}

std::string format_value(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::vector<RawReading> parse_readings(std::istream& source) {
  std::vector<RawReading> out;
  for (const auto& [line_no, text] : read_rows(source, kReadingsHeader)) {
    const auto fields = split_fields(text);
    if (fields.size() != 5) {
      fail_row("csv.field_count", line_no, std::min<std::size_t>(fields.size(), 5) + 1, "row",
               "expected 5 fields, found " + std::to_string(fields.size()));
    }
    RawReading r;
    if (fields[0].empty()) fail_row("csv.meter_id", line_no, 1, "meter_id", "empty meter id");
    r.meter_id = std::string(fields[0]);

    const auto date = parse_date(fields[1]);
    if (!date) fail_row("csv.timestamp", line_no, 2, "timestamp", "unparsable date '" + std::string(fields[1]) + "'");
    r.timestamp = *date;

    const auto* end = fields[2].data() + fields[2].size();
    auto [ptr, ec] = std::from_chars(fields[2].data(), end, r.value);
    if (ec != std::errc{} || ptr != end || fields[2].empty() || !std::isfinite(r.value)) {
      fail_row("csv.value", line_no, 3, "value", "not a decimal number '" + std::string(fields[2]) + "'");
    }
    if (r.value < 0.0) fail_row("csv.value", line_no, 3, "value", "negative value " + std::string(fields[2]));

    if (!parse_flag(fields[3], r.process_ok)) fail_row("csv.flag", line_no, 4, "process_ok", "expected 0 or 1");
    if (!parse_flag(fields[4], r.congruent)) fail_row("csv.flag", line_no, 5, "congruent", "expected 0 or 1");
    out.push_back(std::move(r));
  }
  return out;
}

MeterTable parse_meters(std::istream& source, int current_year) {
  MeterTable out;
  for (const auto& [line_no, text] : read_rows(source, kMetersHeader)) {
    const auto fields = split_fields(text);
    if (fields.size() != 6) {
      fail_row("csv.field_count", line_no, std::min<std::size_t>(fields.size(), 6) + 1, "row",
               "expected 6 fields, found " + std::to_string(fields.size()));
    }
    MeterRecord m;
    if (fields[0].empty()) fail_row("csv.meter_id", line_no, 1, "meter_id", "empty meter id");
    m.meter_id = std::string(fields[0]);
    m.producer = std::string(fields[1]);
    m.meter_type = std::string(fields[2]);
    if (!parse_int(fields[3], m.year_of_construction)) {
      fail_row("csv.year", line_no, 4, "year", "not an integer year '" + std::string(fields[3]) + "'");
    }
    if (m.year_of_construction < 1900 || m.year_of_construction > current_year) {
      fail_row("csv.year", line_no, 4, "year",
               "year " + std::to_string(m.year_of_construction) + " outside [1900, " +
                   std::to_string(current_year) + "]");
    }
    m.contract_type = std::string(fields[4]);
    if (!parse_flag(fields[5], m.defective)) fail_row("csv.flag", line_no, 6, "defective", "expected 0 or 1");

    const auto id = m.meter_id;
    if (!out.emplace(id, std::move(m)).second) {
      throw Error("csv.duplicate_meter", "duplicate meter id " + id + " at line " + std::to_string(line_no),
                  {{"line", line_no}, {"meter_id", id}});
    }
  }
  return out;
}

void write_readings(std::ostream& out, std::span<const RawReading> readings) {
  out << kReadingsHeader << '\n';
  for (const auto& r : readings) {
    out << r.meter_id << ',' << format_date(r.timestamp) << ',' << format_value(r.value) << ','
        << (r.process_ok ? '1' : '0') << ',' << (r.congruent ? '1' : '0') << '\n';
  }
}

void write_meters(std::ostream& out, std::span<const MeterRecord> meters) {
  out << kMetersHeader << '\n';
  for (const auto& m : meters) {
    out << m.meter_id << ',' << m.producer << ',' << m.meter_type << ',' << m.year_of_construction << ','
        << m.contract_type << ',' << (m.defective ? '1' : '0') << '\n';
  }
}

void write_meters(std::ostream& out, const MeterTable& meters) {
  std::vector<MeterRecord> rows;
  rows.reserve(meters.size());
  for (const auto& [id, m] : meters) rows.push_back(m);
  write_meters(out, rows);
}

std::vector<RawReading> read_readings_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.open", "cannot open " + path.string(), {{"path", path.string()}});
  return parse_readings(in);
}

MeterTable read_meters_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.open", "cannot open " + path.string(), {{"path", path.string()}});
  return parse_meters(in);
}

}  // namespace meterdown
