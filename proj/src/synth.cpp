#include "meterdown/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "meterdown/error.hpp"

namespace meterdown {

std::string_view mode_name(CategoricalMode mode) {
  return mode == CategoricalMode::informative ? "informative" : "noise";
}

CategoricalMode parse_mode(std::string_view text) {
  if (text == "informative") return CategoricalMode::informative;
  if (text == "noise") return CategoricalMode::noise;
  throw Error("synth.mode", "unknown categorical mode '" + std::string(text) + "', expected informative or noise",
              {{"mode", text}});
}

void FleetConfig::validate() const {
  const auto bad = [](const std::string& what, nlohmann::json ctx) {
    return Error("synth.config", "invalid fleet config: " + what, std::move(ctx));
  };
  if (meters < 1) throw bad("meters must be >= 1", {{"meters", meters}});
  if (!(defective_fraction > 0.0 && defective_fraction < 1.0)) {
    throw bad("defective_fraction must be in (0, 1)", {{"defective_fraction", defective_fraction}});
  }
  if (onset_min_preceding < 1) throw bad("onset_min_preceding must be >= 1", {{"onset_min_preceding", onset_min_preceding}});
  if (min_readings < onset_min_preceding + 2 || max_readings < min_readings) {
    throw bad("need onset_min_preceding + 2 <= min_readings <= max_readings",
              {{"min_readings", min_readings}, {"max_readings", max_readings}});
  }
  if (gap_limit_days < 1) throw bad("gap_limit_days must be positive", {{"gap_limit_days", gap_limit_days}});
  if (!(interval_jitter_days >= 0.0) || !(interval_mean_days - interval_jitter_days >= 1.0) ||
      !(interval_mean_days + interval_jitter_days <= gap_limit_days)) {
    throw bad("reading intervals must stay within [1, gap_limit_days]",
              {{"interval_mean_days", interval_mean_days},
               {"interval_jitter_days", interval_jitter_days},
               {"gap_limit_days", gap_limit_days}});
  }
  if (!(daily_rate_median > 0.0) || !(daily_rate_sigma >= 0.0) || !(consumption_noise >= 0.0)) {
    throw bad("consumption parameters must be non-negative (median > 0)", {});
  }
  if (precursor_intervals < 0 || !(precursor_floor > 0.0 && precursor_floor <= 1.0)) {
    throw bad("precursor_intervals >= 0 and precursor_floor in (0, 1] required",
              {{"precursor_intervals", precursor_intervals}, {"precursor_floor", precursor_floor}});
  }
  if (!(benign_zero_run_probability >= 0.0 && benign_zero_run_probability <= 1.0) ||
      !(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw bad("probabilities must be in [0, 1]", {});
  }
}

nlohmann::json to_json(const FleetConfig& c) {
  return {{"meters", c.meters},
          {"defective_fraction", c.defective_fraction},
          {"min_readings", c.min_readings},
          {"max_readings", c.max_readings},
          {"interval_mean_days", c.interval_mean_days},
          {"interval_jitter_days", c.interval_jitter_days},
          {"daily_rate_median", c.daily_rate_median},
          {"daily_rate_sigma", c.daily_rate_sigma},
          {"consumption_noise", c.consumption_noise},
          {"onset_min_preceding", c.onset_min_preceding},
          {"precursor_intervals", c.precursor_intervals},
          {"precursor_floor", c.precursor_floor},
          {"benign_zero_run_probability", c.benign_zero_run_probability},
          {"mode", mode_name(c.mode)},
          {"flip_probability", c.flip_probability},
          {"gap_limit_days", c.gap_limit_days},
          {"seed", c.seed}};
}

FleetConfig fleet_config_from_json(const nlohmann::json& j) {
  FleetConfig c;
  try {
    c.meters = j.value("meters", c.meters);
    c.defective_fraction = j.value("defective_fraction", c.defective_fraction);
    c.min_readings = j.value("min_readings", c.min_readings);
    c.max_readings = j.value("max_readings", c.max_readings);
    c.interval_mean_days = j.value("interval_mean_days", c.interval_mean_days);
    c.interval_jitter_days = j.value("interval_jitter_days", c.interval_jitter_days);
    c.daily_rate_median = j.value("daily_rate_median", c.daily_rate_median);
    c.daily_rate_sigma = j.value("daily_rate_sigma", c.daily_rate_sigma);
    c.consumption_noise = j.value("consumption_noise", c.consumption_noise);
    c.onset_min_preceding = j.value("onset_min_preceding", c.onset_min_preceding);
    c.precursor_intervals = j.value("precursor_intervals", c.precursor_intervals);
    c.precursor_floor = j.value("precursor_floor", c.precursor_floor);
    c.benign_zero_run_probability = j.value("benign_zero_run_probability", c.benign_zero_run_probability);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.flip_probability = j.value("flip_probability", c.flip_probability);
    c.gap_limit_days = j.value("gap_limit_days", c.gap_limit_days);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error("synth.config", std::string("malformed fleet config: ") + e.what());
  }
  return c;
}

namespace {

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& pool, std::size_t first, std::size_t count,
                 std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(first, first + count - 1);
  return std::string(pool[d(rng)]);
}

std::string meter_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "M%06zu", index + 1);
  return buf;
}

}  // namespace

Fleet generate(const FleetConfig& config) {
  config.validate();
  using namespace std::chrono;
  const Date epoch = sys_days{year{2015} / January / 1};

  Fleet fleet;
  fleet.meters.reserve(config.meters);
  for (std::size_t i = 0; i < config.meters; ++i) {
    std::mt19937_64 rng(derive_seed(config.seed, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    MeterRecord m;
    m.meter_id = meter_id(i);
    m.defective = unit(rng) < config.defective_fraction;
    if (config.mode == CategoricalMode::informative) {
      const bool failure_prone = m.defective != (unit(rng) < config.flip_probability);
      m.producer = pick(kProducers, failure_prone ? 0 : 2, 2, rng);
    } else {
      m.producer = pick(kProducers, 0, kProducers.size(), rng);
    }
    m.meter_type = pick(kMeterTypes, 0, kMeterTypes.size(), rng);
    m.year_of_construction = std::uniform_int_distribution<int>(kFirstYear, kLastYear)(rng);
    m.contract_type = pick(kContracts, 0, kContracts.size(), rng);

    const int n = std::uniform_int_distribution<int>(config.min_readings, config.max_readings)(rng);
    const int onset = m.defective ? std::uniform_int_distribution<int>(config.onset_min_preceding, n - 2)(rng) : n;
    const double rate = config.daily_rate_median * std::exp(config.daily_rate_sigma * gauss(rng));

    // Consumption factor of the interval ending at reading j; 0 means no registered flow.
    std::vector<double> factor(static_cast<std::size_t>(n), 1.0);
    if (m.defective) {
      for (int j = 1; j < n; ++j) {
        if (j > onset) {
          factor[static_cast<std::size_t>(j)] = 0.0;
        } else if (const int d = onset - j; d < config.precursor_intervals) {
          const double depth = static_cast<double>(config.precursor_intervals - d) / config.precursor_intervals;
          factor[static_cast<std::size_t>(j)] = std::pow(config.precursor_floor, depth);
        }
      }
    } else if (unit(rng) < config.benign_zero_run_probability) {
      const int start = std::uniform_int_distribution<int>(1, n - 1)(rng);
      const int length = std::uniform_int_distribution<int>(1, 2)(rng);
      for (int j = start; j < std::min(n, start + length); ++j) factor[static_cast<std::size_t>(j)] = 0.0;
    }

    Date day = epoch + days{std::uniform_int_distribution<int>(0, 364)(rng)};
    std::int64_t liters = std::uniform_int_distribution<std::int64_t>(0, 2'000'000)(rng);
    std::uniform_real_distribution<double> jitter(-config.interval_jitter_days, config.interval_jitter_days);
    for (int j = 0; j < n; ++j) {
      if (j > 0) {
        const int gap = std::max(1, static_cast<int>(std::lround(config.interval_mean_days + jitter(rng))));
        day += days{gap};
        const double noise = std::exp(config.consumption_noise * gauss(rng));
        const double f = factor[static_cast<std::size_t>(j)];
        if (f > 0.0) {
          liters += std::max<std::int64_t>(1, std::llround(rate * 1000.0 * gap * f * noise));
        }
      }
      fleet.readings.push_back({m.meter_id, day, static_cast<double>(liters) / 1000.0, true, true});
    }
    fleet.meters.push_back(std::move(m));
  }
  return fleet;
}

NoisyReadings inject_quality_noise(std::span<const RawReading> readings, const QualityNoise& noise) {
  for (double rate : {noise.process_fail_rate, noise.incongruent_rate, noise.gap_rate}) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
      throw Error("synth.noise", "noise rates must be in [0, 1]", {{"rate", rate}});
    }
  }
  NoisyReadings out;
  out.readings.assign(readings.begin(), readings.end());
  std::size_t meter_ordinal = 0;
  std::mt19937_64 rng;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int shift = 0;
  for (std::size_t i = 0; i < out.readings.size(); ++i) {
    auto& r = out.readings[i];
    const bool first_of_meter = i == 0 || r.meter_id != out.readings[i - 1].meter_id;
    if (first_of_meter) {
      rng.seed(derive_seed(noise.seed, meter_ordinal++));
      shift = 0;
    }
    const double u_process = unit(rng);
    const double u_congruent = unit(rng);
    const double u_gap = unit(rng);
    if (!first_of_meter && u_gap < noise.gap_rate) {
      shift += noise.gap_limit_days + 1;
      ++out.counts.gaps_inserted;
    }
    r.timestamp += std::chrono::days{shift};
    if (u_process < noise.process_fail_rate) {
      r.process_ok = !r.process_ok;
      ++out.counts.process_flags_flipped;
    }
    if (u_congruent < noise.incongruent_rate) {
      r.congruent = !r.congruent;
      ++out.counts.congruent_flags_flipped;
    }
  }
  return out;
}

}  // namespace meterdown
