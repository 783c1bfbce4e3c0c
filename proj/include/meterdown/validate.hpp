#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "meterdown/ingest.hpp"

namespace meterdown {

/// Seven months expressed in days (7 x 30.5, rounded).
inline constexpr int kDefaultGapLimitDays = 214;

struct SeriesPoint {
  Date timestamp{};
  double value = 0.0;

  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

/// Gap-free run of valid readings for one meter: strictly increasing
/// timestamps, every consecutive gap within the limit, never empty.
struct ValidSeries {
  std::string meter_id;
  std::vector<SeriesPoint> points;

  std::size_t size() const { return points.size(); }
  friend bool operator==(const ValidSeries&, const ValidSeries&) = default;
};

/// Keeps readings that met the process requirements and are congruent.
/// All readings must belong to one meter.
std::vector<RawReading> filter_valid(std::span<const RawReading> readings);

/// Splits a time-sorted single-meter history into maximal runs whose
/// consecutive gaps are all <= gap_limit_days. Same-day readings collapse
/// to the last one.
std::vector<ValidSeries> segment(std::span<const RawReading> readings, int gap_limit_days);

struct ValidationSummary {
  int gap_limit_days = kDefaultGapLimitDays;
  std::size_t meters_in = 0;
  std::size_t readings_in = 0;
  std::size_t dropped_process_requirements = 0;
  std::size_t dropped_incongruent = 0;  ///< process ok but timestamp not congruent
  std::size_t duplicates_collapsed = 0;
  std::size_t readings_kept = 0;
  std::size_t meters_with_valid_series = 0;
  std::size_t segments = 0;
  std::size_t gap_splits = 0;
  std::map<std::size_t, std::size_t> segment_lengths;  ///< length -> number of segments
};

nlohmann::json to_json(const ValidationSummary& summary);

using SeriesByMeter = std::map<std::string, std::vector<ValidSeries>>;

struct ValidatedFleet {
  SeriesByMeter series;  ///< meters without any valid reading are absent
  ValidationSummary summary;
};

/// Groups raw readings by meter, sorts each history by date (file order
/// breaks ties), then applies filter_valid and segment per meter.
ValidatedFleet validate_fleet(std::span<const RawReading> readings, int gap_limit_days = kDefaultGapLimitDays);

}  // namespace meterdown
