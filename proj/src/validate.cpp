#include "meterdown/validate.hpp"

#include <algorithm>

#include "meterdown/error.hpp"

namespace meterdown {

namespace {

void require_single_meter(std::span<const RawReading> readings) {
  for (const auto& r : readings) {
    if (r.meter_id != readings.front().meter_id) {
      throw Error("validate.mixed_meters",
                  "readings of meters " + readings.front().meter_id + " and " + r.meter_id + " mixed",
                  {{"expected", readings.front().meter_id}, {"found", r.meter_id}});
    }
  }
}

}  // namespace

std::vector<RawReading> filter_valid(std::span<const RawReading> readings) {
  require_single_meter(readings);
  std::vector<RawReading> kept;
  std::copy_if(readings.begin(), readings.end(), std::back_inserter(kept),
               [](const RawReading& r) { return r.process_ok && r.congruent; });
  return kept;
}

std::vector<ValidSeries> segment(std::span<const RawReading> readings, int gap_limit_days) {
  if (gap_limit_days <= 0) {
    throw Error("validate.gap_limit", "gap_limit_days must be positive", {{"gap_limit_days", gap_limit_days}});
  }
  require_single_meter(readings);
  std::vector<ValidSeries> out;
  if (readings.empty()) return out;

  std::vector<SeriesPoint> points;
  points.reserve(readings.size());
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const SeriesPoint p{readings[i].timestamp, readings[i].value};
    if (!points.empty()) {
      if (p.timestamp < points.back().timestamp) {
        throw Error("validate.unsorted", "readings of meter " + readings[i].meter_id + " are not time-sorted",
                    {{"meter_id", readings[i].meter_id}, {"index", i}});
      }
      if (p.timestamp == points.back().timestamp) {
        points.back() = p;
        continue;
      }
    }
    points.push_back(p);
  }

  ValidSeries current{readings.front().meter_id, {}};
  for (const auto& p : points) {
    if (!current.points.empty() && days_between(current.points.back().timestamp, p.timestamp) > gap_limit_days) {
      out.push_back(std::move(current));
      current = ValidSeries{readings.front().meter_id, {}};
    }
    current.points.push_back(p);
  }
  out.push_back(std::move(current));
  return out;
}

ValidatedFleet validate_fleet(std::span<const RawReading> readings, int gap_limit_days) {
  ValidatedFleet fleet;
  auto& s = fleet.summary;
  s.gap_limit_days = gap_limit_days;
  s.readings_in = readings.size();

  std::map<std::string, std::vector<RawReading>> by_meter;
  for (const auto& r : readings) by_meter[r.meter_id].push_back(r);
  s.meters_in = by_meter.size();

  for (auto& [id, history] : by_meter) {
    std::stable_sort(history.begin(), history.end(),
                     [](const RawReading& a, const RawReading& b) { return a.timestamp < b.timestamp; });
    for (const auto& r : history) {
      if (!r.process_ok) {
        ++s.dropped_process_requirements;
      } else if (!r.congruent) {
        ++s.dropped_incongruent;
      }
    }
    const auto valid = filter_valid(history);
    auto segments = segment(valid, gap_limit_days);
    if (segments.empty()) continue;

    std::size_t kept = 0;
    for (const auto& seg : segments) {
      kept += seg.size();
      ++s.segment_lengths[seg.size()];
    }
    s.readings_kept += kept;
    s.duplicates_collapsed += valid.size() - kept;
    s.segments += segments.size();
    s.gap_splits += segments.size() - 1;
    ++s.meters_with_valid_series;
    fleet.series.emplace(id, std::move(segments));
  }
  return fleet;
}

nlohmann::json to_json(const ValidationSummary& s) {
  nlohmann::json histogram = nlohmann::json::object();
  for (const auto& [length, count] : s.segment_lengths) histogram[std::to_string(length)] = count;
  return {
      {"gap_limit_days", s.gap_limit_days},
      {"meters_in", s.meters_in},
      {"readings_in", s.readings_in},
      {"readings_kept", s.readings_kept},
      {"dropped",
       {{"process_requirements", s.dropped_process_requirements},
        {"incongruent", s.dropped_incongruent},
        {"duplicate_timestamp", s.duplicates_collapsed}}},
      {"meters_with_valid_series", s.meters_with_valid_series},
      {"segments", s.segments},
      {"gap_splits", s.gap_splits},
      {"segment_length_histogram", histogram},
  };
}

}  // namespace meterdown
