#include <gtest/gtest.h>

#include <sstream>

#include "meterdown/error.hpp"
#include "meterdown/label.hpp"
#include "meterdown/synth.hpp"
#include "oracles.hpp"

using namespace meterdown;

namespace {

std::string dump(const Fleet& f) {
  std::ostringstream out;
  write_readings(out, f.readings);
  write_meters(out, f.meters);
  return out.str();
}

MeterTable table(const Fleet& f) {
  MeterTable t;
  for (const auto& m : f.meters) t.emplace(m.meter_id, m);
  return t;
}

}  // namespace

TEST(Generate, ByteIdenticalForSameSeed) {
  FleetConfig c;
  c.meters = 10;
  c.defective_fraction = 0.5;
  c.seed = 7;
  EXPECT_EQ(dump(generate(c)), dump(generate(c)));
  auto other = c;
  other.seed = 8;
  EXPECT_NE(dump(generate(c)), dump(generate(other)));
}

TEST(Generate, RejectsInvalidConfig) {
  FleetConfig c;
  c.defective_fraction = 0.0;
  EXPECT_THROW(generate(c), Error);
  c = {};
  c.interval_mean_days = 300;
  EXPECT_THROW(generate(c), Error);
  c = {};
  c.min_readings = 2;
  EXPECT_THROW(generate(c), Error);
}

TEST(Generate, DefectiveSeriesPlateauAfterAtLeastOneReading) {
  FleetConfig c;
  c.meters = 400;
  c.seed = 2;
  const auto f = generate(c);
  const auto v = validate_fleet(f.readings, c.gap_limit_days);
  std::size_t defective = 0;
  for (const auto& m : f.meters) {
    const auto& segs = v.series.at(m.meter_id);
    ASSERT_EQ(segs.size(), 1u);
    const auto& pts = segs[0].points;
    for (std::size_t i = 1; i < pts.size(); ++i) ASSERT_GE(pts[i].value, pts[i - 1].value);
    if (!m.defective) continue;
    ++defective;
    const auto span = find_plateau(pts);
    ASSERT_TRUE(span);
    EXPECT_GE(span->start, 1u);
    EXPECT_EQ(span->start + span->length, pts.size());
  }
  EXPECT_GT(defective, 40u);
}

TEST(Generate, NoiseModeCategoricalsCarryNoLabelInformation) {
  FleetConfig c;
  c.meters = 5000;
  c.seed = 21;
  c.mode = CategoricalMode::noise;
  const auto f = generate(c);
  std::vector<int> y;
  std::vector<std::string> producer, type, year, contract;
  for (const auto& m : f.meters) {
    y.push_back(m.defective ? 1 : 0);
    producer.push_back(m.producer);
    type.push_back(m.meter_type);
    year.push_back(std::to_string(m.year_of_construction));
    contract.push_back(m.contract_type);
  }
  for (const auto* x : {&producer, &type, &year, &contract}) {
    EXPECT_LT(oracle::plugin_mutual_information(*x, y), 0.01);
  }

  c.mode = CategoricalMode::informative;
  const auto g = generate(c);
  std::vector<int> gy;
  std::vector<std::string> gp;
  for (const auto& m : g.meters) {
    gy.push_back(m.defective ? 1 : 0);
    gp.push_back(m.producer);
  }
  EXPECT_GT(oracle::plugin_mutual_information(gp, gy), 0.1);
}

TEST(QualityNoise, ZeroRatesAreIdentity) {
  FleetConfig c;
  c.meters = 50;
  const auto f = generate(c);
  const auto out = inject_quality_noise(f.readings, {});
  EXPECT_EQ(out.readings, f.readings);
  EXPECT_EQ(out.counts.gaps_inserted, 0u);
}

TEST(QualityNoise, FullGapRateIsolatesEveryReading) {
  std::vector<RawReading> r;
  for (int i = 0; i < 10; ++i) r.push_back({"m", Date{std::chrono::days{i * 30}}, 1.0 * i, true, true});
  QualityNoise n;
  n.gap_rate = 1.0;
  const auto out = inject_quality_noise(r, n);
  const auto segs = segment(out.readings, kDefaultGapLimitDays);
  EXPECT_EQ(segs.size(), 10u);
  for (const auto& s : segs) EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(out.counts.gaps_inserted, 9u);
}

TEST(QualityNoise, InjectedFlagCountMatchesRecount) {
  FleetConfig c;
  c.meters = 300;
  const auto f = generate(c);
  QualityNoise n;
  n.process_fail_rate = 0.07;
  n.incongruent_rate = 0.11;
  n.gap_rate = 0.03;
  n.seed = 99;
  const auto out = inject_quality_noise(f.readings, n);
  std::size_t process = 0, congruent = 0;
  for (std::size_t i = 0; i < f.readings.size(); ++i) {
    process += f.readings[i].process_ok != out.readings[i].process_ok;
    congruent += f.readings[i].congruent != out.readings[i].congruent;
  }
  EXPECT_EQ(process, out.counts.process_flags_flipped);
  EXPECT_EQ(congruent, out.counts.congruent_flags_flipped);
  EXPECT_GT(process, 0u);
  EXPECT_THROW(inject_quality_noise(f.readings, {1.5, 0, 0, 214, 0}), Error);
}

TEST(Pipeline, CleanFleetLosesNoMeters) {
  FleetConfig c;
  c.meters = 500;
  c.seed = 12;
  const auto f = generate(c);
  const auto v = validate_fleet(f.readings, c.gap_limit_days);
  EXPECT_EQ(v.summary.readings_kept, f.readings.size());
  EXPECT_EQ(v.summary.gap_splits, 0u);
  const auto ds = label_fleet(v.series, table(f), {1, 1});
  EXPECT_EQ(ds.counts.positives + ds.counts.negatives, f.meters.size());
}

TEST(Pipeline, NoiseReducesCountsMonotonically) {
  FleetConfig c;
  c.meters = 800;
  c.seed = 13;
  const auto f = generate(c);
  const auto meters = table(f);
  for (const auto& scheme : {Scheme{1, 1}, Scheme{1, 3}, Scheme{2, 2}}) {
    std::size_t prev_pos = SIZE_MAX, prev_neg = SIZE_MAX;
    for (double rate : {0.0, 0.05, 0.15, 0.3}) {
      QualityNoise n{rate, rate, rate, kDefaultGapLimitDays, 5};
      const auto v = validate_fleet(inject_quality_noise(f.readings, n).readings);
      const auto ds = label_fleet(v.series, meters, scheme);
      EXPECT_LE(ds.counts.positives, prev_pos) << scheme.name() << " rate " << rate;
      EXPECT_LE(ds.counts.negatives, prev_neg) << scheme.name() << " rate " << rate;
      prev_pos = ds.counts.positives;
      prev_neg = ds.counts.negatives;
    }
  }
}

TEST(Pipeline, PositiveCountsShrinkWithK) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    FleetConfig c;
    c.meters = 600;
    c.seed = seed;
    const auto f = generate(c);
    const auto v = validate_fleet(f.readings);
    const auto meters = table(f);
    for (int p = 1; p <= 2; ++p) {
      std::size_t prev = SIZE_MAX;
      for (int k = 1; k <= 6; ++k) {
        const auto n = label_fleet(v.series, meters, {p, k}).counts.positives;
        EXPECT_LE(n, prev);
        prev = n;
      }
    }
  }
}

TEST(FleetConfigJson, RoundTripAndDefaults) {
  FleetConfig c;
  c.meters = 17;
  c.mode = CategoricalMode::informative;
  c.precursor_floor = 0.5;
  const auto back = fleet_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(fleet_config_from_json(nlohmann::json::object()).meters, FleetConfig{}.meters);
  EXPECT_THROW(fleet_config_from_json({{"mode", "loud"}}), Error);
}
