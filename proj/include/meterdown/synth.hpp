#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "meterdown/ingest.hpp"
#include "meterdown/validate.hpp"

namespace meterdown {

enum class CategoricalMode { informative, noise };

std::string_view mode_name(CategoricalMode mode);
CategoricalMode parse_mode(std::string_view text);

/// Synthetic fleet parameters. Consumption is a per-meter log-normal daily
/// rate with multiplicative per-interval noise; defective meters
/// under-register over the last `precursor_intervals` intervals (rate scaled
/// geometrically down to `precursor_floor`) and then freeze, producing a
/// plateau that lasts until the end of the series.
struct FleetConfig {
  std::size_t meters = 1000;
  double defective_fraction = 0.2;
  int min_readings = 6;
  int max_readings = 14;
  double interval_mean_days = 60.0;
  double interval_jitter_days = 20.0;  ///< intervals uniform in mean +- jitter
  double daily_rate_median = 0.3;      ///< cubic meters per day
  double daily_rate_sigma = 0.5;       ///< log-normal spread across meters
  double consumption_noise = 0.15;     ///< log-normal per-interval noise
  int onset_min_preceding = 1;         ///< fewest readings before the plateau
  int precursor_intervals = 3;
  double precursor_floor = 0.15;
  double benign_zero_run_probability = 0.02;  ///< healthy meters only
  CategoricalMode mode = CategoricalMode::noise;
  double flip_probability = 0.1;  ///< informative mode: producer drawn from the other group
  int gap_limit_days = kDefaultGapLimitDays;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const FleetConfig& config);
/// Missing keys keep their defaults.
FleetConfig fleet_config_from_json(const nlohmann::json& j);

struct Fleet {
  std::vector<RawReading> readings;  ///< by meter, then date
  std::vector<MeterRecord> meters;   ///< by meter id
};

/// Category pools used by the generator. In informative mode the first two
/// producers are the failure-prone group.
inline constexpr std::array<std::string_view, 4> kProducers = {"AQUALUX", "HYDRAMET", "NORDFLOW", "VERTEX"};
inline constexpr std::array<std::string_view, 3> kMeterTypes = {"multi-jet", "single-jet", "volumetric"};
inline constexpr std::array<std::string_view, 3> kContracts = {"commercial", "public", "residential"};
inline constexpr int kFirstYear = 2000;
inline constexpr int kLastYear = 2011;

Fleet generate(const FleetConfig& config);

struct QualityNoise {
  double process_fail_rate = 0.0;
  double incongruent_rate = 0.0;
  double gap_rate = 0.0;  ///< per consecutive pair of a meter
  int gap_limit_days = kDefaultGapLimitDays;
  std::uint64_t seed = 0;
};

struct InjectionCounts {
  std::size_t process_flags_flipped = 0;
  std::size_t congruent_flags_flipped = 0;
  std::size_t gaps_inserted = 0;
};

struct NoisyReadings {
  std::vector<RawReading> readings;
  InjectionCounts counts;
};

/// Flips process_ok / congruent flags and stretches gaps past the limit,
/// each at its own rate. Uniform draws are taken for every reading whatever
/// the rates, so with a fixed seed a higher rate corrupts a superset.
/// Input must be grouped by meter and date-sorted within each meter.
NoisyReadings inject_quality_noise(std::span<const RawReading> readings, const QualityNoise& noise);

}  // namespace meterdown
