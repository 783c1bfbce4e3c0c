#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "meterdown/ingest.hpp"
#include "meterdown/validate.hpp"

namespace meterdown {

/// First maximal run of >= 2 exactly equal consecutive values.
struct PlateauSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  friend bool operator==(const PlateauSpan&, const PlateauSpan&) = default;
};

/// Window layout `<p>P+<k>`: the k readings preceding a plateau followed by
/// its first p readings. Negatives use windows of the same total length.
struct Scheme {
  int plateau_readings = 1;
  int preceding = 1;

  std::size_t window_length() const { return static_cast<std::size_t>(plateau_readings + preceding); }
  std::string name() const;  ///< "1P+2"
  /// Accepts "1p+2", "1P+2", "2p+1", ... (p in {1,2}, k >= 1).
  static Scheme parse(std::string_view text);

  friend bool operator==(const Scheme&, const Scheme&) = default;
};

/// Parses a comma-separated scheme list.
std::vector<Scheme> parse_schemes(std::string_view text);

struct Example {
  std::string meter_id;
  std::vector<SeriesPoint> window;
  bool label = false;  ///< true = defective
  MeterRecord meter;   ///< categorical source, attached by label_fleet
};

std::optional<PlateauSpan> find_plateau(std::span<const SeriesPoint> points);

/// Positive window for the series, or nullopt when it has no plateau or
/// fewer than `scheme.preceding` readings before the plateau.
std::optional<Example> build_positive(const ValidSeries& series, const Scheme& scheme);

/// Most recent `window_length` readings labelled negative, or nullopt when
/// the series is too short.
std::optional<Example> build_negative(const ValidSeries& series, std::size_t window_length);

struct LabelOptions {
  bool exclude_plateau_negatives = false;
};

struct CountsReport {
  Scheme scheme;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t defective_meters = 0;
  std::size_t non_defective_meters = 0;
  std::size_t defective_without_plateau = 0;
  std::size_t defective_insufficient_history = 0;
  std::size_t non_defective_too_short = 0;
  std::size_t negatives_excluded_for_plateau = 0;
  std::size_t meters_without_metadata = 0;
  std::size_t meters_without_valid_series = 0;
  std::size_t windows_with_decreasing_counter = 0;
};

nlohmann::json to_json(const CountsReport& counts);

struct LabeledDataset {
  Scheme scheme;
  std::vector<Example> examples;  ///< ordered by meter id
  CountsReport counts;

  std::size_t positives() const { return counts.positives; }
  std::size_t negatives() const { return counts.negatives; }
};

/// Builds at most one example per meter: defective meters contribute the
/// window at the first plateau of their history, healthy meters the most
/// recent window of their longest eligible segment (ties: most recent).
LabeledDataset label_fleet(const SeriesByMeter& series, const MeterTable& meters, const Scheme& scheme,
                           const LabelOptions& options = {});

/// label_fleet, rejecting datasets that lack either class.
LabeledDataset build_dataset(const SeriesByMeter& series, const MeterTable& meters, const Scheme& scheme,
                             const LabelOptions& options = {});

/// Long format: meter_id,label,position,timestamp,value (one row per window reading).
void write_dataset(std::ostream& out, const LabeledDataset& dataset);

}  // namespace meterdown
