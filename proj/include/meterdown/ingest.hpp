#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meterdown {

/// Calendar day, UTC.
using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DD`; rejects impossible dates such as 2019-02-30.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date date);
/// Signed number of days from `from` to `to`.
int days_between(Date from, Date to);
int current_utc_year();

struct RawReading {
  std::string meter_id;
  Date timestamp{};
  double value = 0.0;  ///< cumulative counter, cubic meters
  bool process_ok = true;
  bool congruent = true;

  friend bool operator==(const RawReading&, const RawReading&) = default;
};

struct MeterRecord {
  std::string meter_id;
  std::string producer;
  std::string meter_type;
  int year_of_construction = 0;
  std::string contract_type;
  bool defective = false;

  friend bool operator==(const MeterRecord&, const MeterRecord&) = default;
};

using MeterTable = std::map<std::string, MeterRecord>;

inline constexpr std::string_view kReadingsHeader = "meter_id,timestamp,value,process_ok,congruent";
inline constexpr std::string_view kMetersHeader = "meter_id,producer,meter_type,year,contract,defective";

/// Parses the readings CSV. Rows come back in file order. Errors carry
/// `line` (1-based, header is line 1) and `column` in their context.
std::vector<RawReading> parse_readings(std::istream& source);

/// Parses the meters CSV; duplicate ids and years outside
/// [1900, current_year] are rejected.
MeterTable parse_meters(std::istream& source, int current_year = current_utc_year());

void write_readings(std::ostream& out, std::span<const RawReading> readings);
void write_meters(std::ostream& out, std::span<const MeterRecord> meters);
void write_meters(std::ostream& out, const MeterTable& meters);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_value(double value);

std::vector<RawReading> read_readings_file(const std::filesystem::path& path);
MeterTable read_meters_file(const std::filesystem::path& path);

}  // namespace meterdown
