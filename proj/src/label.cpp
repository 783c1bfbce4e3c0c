#include "meterdown/label.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ostream>

#include "meterdown/error.hpp"

namespace meterdown {

std::string Scheme::name() const {
  return std::to_string(plateau_readings) + "P+" + std::to_string(preceding);
}

Scheme Scheme::parse(std::string_view text) {
  const auto bad = [&] {
    return Error("label.scheme", "invalid scheme '" + std::string(text) + "', expected e.g. 1p+2",
                 {{"scheme", text}});
  };
  const auto plus = text.find('+');
  if (plus == std::string_view::npos || plus < 2) throw bad();
  const char marker = static_cast<char>(std::tolower(static_cast<unsigned char>(text[plus - 1])));
  if (marker != 'p') throw bad();
  Scheme s;
  const auto head = text.substr(0, plus - 1);
  const auto tail = text.substr(plus + 1);
  auto r1 = std::from_chars(head.data(), head.data() + head.size(), s.plateau_readings);
  auto r2 = std::from_chars(tail.data(), tail.data() + tail.size(), s.preceding);
  if (r1.ec != std::errc{} || r1.ptr != head.data() + head.size() || r2.ec != std::errc{} ||
      r2.ptr != tail.data() + tail.size() || tail.empty()) {
    throw bad();
  }
  if (s.plateau_readings < 1 || s.plateau_readings > 2 || s.preceding < 1) throw bad();
  return s;
}

std::vector<Scheme> parse_schemes(std::string_view text) {
  std::vector<Scheme> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, comma - start);
    if (!item.empty()) out.push_back(Scheme::parse(item));
    start = comma + 1;
  }
  if (out.empty()) throw Error("label.scheme", "empty scheme list");
  return out;
}

std::optional<PlateauSpan> find_plateau(std::span<const SeriesPoint> points) {
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i].value != points[i + 1].value) continue;
    std::size_t end = i + 1;
    while (end < points.size() && points[end].value == points[i].value) ++end;
    return PlateauSpan{i, end - i};
  }
  return std::nullopt;
}

std::optional<Example> build_positive(const ValidSeries& series, const Scheme& scheme) {
  const auto plateau = find_plateau(series.points);
  if (!plateau) return std::nullopt;
  const auto p = static_cast<std::size_t>(scheme.plateau_readings);
  const auto k = static_cast<std::size_t>(scheme.preceding);
  if (plateau->length < p || plateau->start < k) return std::nullopt;
  const auto first = series.points.begin() + static_cast<std::ptrdiff_t>(plateau->start - k);
  Example e;
  e.meter_id = series.meter_id;
  e.window.assign(first, first + static_cast<std::ptrdiff_t>(k + p));
  e.label = true;
  return e;
}

std::optional<Example> build_negative(const ValidSeries& series, std::size_t window_length) {
  if (window_length == 0 || series.size() < window_length) return std::nullopt;
  Example e;
  e.meter_id = series.meter_id;
  e.window.assign(series.points.end() - static_cast<std::ptrdiff_t>(window_length), series.points.end());
  e.label = false;
  return e;
}

namespace {

bool has_decrease(std::span<const SeriesPoint> window) {
  for (std::size_t i = 1; i < window.size(); ++i) {
    if (window[i].value < window[i - 1].value) return true;
  }
  return false;
}

}  // namespace

LabeledDataset label_fleet(const SeriesByMeter& series, const MeterTable& meters, const Scheme& scheme,
                           const LabelOptions& options) {
  LabeledDataset ds;
  ds.scheme = scheme;
  auto& c = ds.counts;
  c.scheme = scheme;

  for (const auto& [id, segments] : series) {
    if (!meters.contains(id)) ++c.meters_without_metadata;
  }

  for (const auto& [id, meter] : meters) {
    meter.defective ? ++c.defective_meters : ++c.non_defective_meters;
    const auto it = series.find(id);
    if (it == series.end() || it->second.empty()) {
      ++c.meters_without_valid_series;
      continue;
    }
    const auto& segments = it->second;
    std::optional<Example> example;

    if (meter.defective) {
      const auto with_plateau = std::find_if(segments.begin(), segments.end(),
                                             [](const ValidSeries& s) { return find_plateau(s.points).has_value(); });
      if (with_plateau == segments.end()) {
        ++c.defective_without_plateau;
        continue;
      }
      example = build_positive(*with_plateau, scheme);
      if (!example) {
        ++c.defective_insufficient_history;
        continue;
      }
    } else {
      const ValidSeries* chosen = nullptr;
      bool excluded = false;
      for (const auto& seg : segments) {
        if (seg.size() < scheme.window_length()) continue;
        if (options.exclude_plateau_negatives && find_plateau(seg.points)) {
          excluded = true;
          continue;
        }
        // Segments are chronological, so >= lets the most recent one win ties.
        if (chosen == nullptr || seg.size() >= chosen->size()) chosen = &seg;
      }
      if (chosen == nullptr) {
        excluded ? ++c.negatives_excluded_for_plateau : ++c.non_defective_too_short;
        continue;
      }
      example = build_negative(*chosen, scheme.window_length());
    }

    example->meter = meter;
    if (has_decrease(example->window)) ++c.windows_with_decreasing_counter;
    example->label ? ++c.positives : ++c.negatives;
    ds.examples.push_back(std::move(*example));
  }
  return ds;
}

LabeledDataset build_dataset(const SeriesByMeter& series, const MeterTable& meters, const Scheme& scheme,
                             const LabelOptions& options) {
  auto ds = label_fleet(series, meters, scheme, options);
  if (ds.counts.positives == 0 || ds.counts.negatives == 0) {
    throw Error("label.untrainable",
                "scheme " + scheme.name() + " yields " + std::to_string(ds.counts.positives) + " positives and " +
                    std::to_string(ds.counts.negatives) + " negatives",
                {{"scheme", scheme.name()}, {"positives", ds.counts.positives}, {"negatives", ds.counts.negatives}});
  }
  return ds;
}

nlohmann::json to_json(const CountsReport& c) {
  return {
      {"scheme", c.scheme.name()},
      {"window_length", c.scheme.window_length()},
      {"positives", c.positives},
      {"negatives", c.negatives},
      {"defective_meters", c.defective_meters},
      {"non_defective_meters", c.non_defective_meters},
      {"defective_without_plateau", c.defective_without_plateau},
      {"defective_insufficient_history", c.defective_insufficient_history},
      {"non_defective_too_short", c.non_defective_too_short},
      {"negatives_excluded_for_plateau", c.negatives_excluded_for_plateau},
      {"meters_without_metadata", c.meters_without_metadata},
      {"meters_without_valid_series", c.meters_without_valid_series},
      {"warnings", {{"windows_with_decreasing_counter", c.windows_with_decreasing_counter}}},
  };
}

void write_dataset(std::ostream& out, const LabeledDataset& dataset) {
  out << "meter_id,label,position,timestamp,value\n";
  for (const auto& e : dataset.examples) {
    for (std::size_t i = 0; i < e.window.size(); ++i) {
      out << e.meter_id << ',' << (e.label ? 1 : 0) << ',' << i << ',' << format_date(e.window[i].timestamp) << ','
          << format_value(e.window[i].value) << '\n';
    }
  }
}

}  // namespace meterdown
