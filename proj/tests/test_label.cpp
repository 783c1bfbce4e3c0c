#include <gtest/gtest.h>

#include <sstream>

#include "meterdown/error.hpp"
#include "meterdown/label.hpp"
#include "meterdown/synth.hpp"
#include "oracles.hpp"

using namespace meterdown;

namespace {

ValidSeries make_series(const std::vector<double>& values, std::string id = "m1", int step = 30) {
  ValidSeries s{std::move(id), {}};
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.points.push_back({Date{std::chrono::days{static_cast<int>(i) * step}}, values[i]});
  }
  return s;
}

std::vector<double> window_values(const Example& e) {
  std::vector<double> out;
  for (const auto& p : e.window) out.push_back(p.value);
  return out;
}

MeterRecord meter(std::string id, bool defective) { return {std::move(id), "A", "t", 2005, "res", defective}; }

}  // namespace

TEST(Scheme, ParsesAndNames) {
  const auto s = Scheme::parse("1p+2");
  EXPECT_EQ(s.plateau_readings, 1);
  EXPECT_EQ(s.preceding, 2);
  EXPECT_EQ(s.window_length(), 3u);
  EXPECT_EQ(s.name(), "1P+2");
  EXPECT_EQ(Scheme::parse("2P+3"), (Scheme{2, 3}));
  EXPECT_THROW(Scheme::parse("3p+1"), Error);
  EXPECT_THROW(Scheme::parse("1p+0"), Error);
  EXPECT_THROW(Scheme::parse("1x+1"), Error);
  EXPECT_THROW(Scheme::parse("p+1"), Error);
  EXPECT_EQ(parse_schemes("1p+1,1p+2").size(), 2u);
}

TEST(FindPlateau, Definition) {
  EXPECT_EQ(find_plateau(make_series({10, 12, 12, 12, 15}).points), (PlateauSpan{1, 3}));
  EXPECT_FALSE(find_plateau(make_series({1, 2, 3}).points));
  EXPECT_EQ(find_plateau(make_series({5, 5}).points), (PlateauSpan{0, 2}));
  EXPECT_FALSE(find_plateau(make_series({5}).points));
  // Only the first plateau counts.
  EXPECT_EQ(find_plateau(make_series({1, 2, 2, 3, 4, 4, 4}).points), (PlateauSpan{1, 2}));
}

TEST(FindPlateau, ExactEqualityOnly) {
  EXPECT_FALSE(find_plateau(make_series({1.0, 1.0 + 1e-12, 2.0}).points));
}

TEST(BuildPositive, OnePlateauReadingPlusTwoPreceding) {
  const auto e = build_positive(make_series({8, 9, 11, 11, 11}), {1, 2});
  ASSERT_TRUE(e);
  EXPECT_EQ(window_values(*e), (std::vector<double>{8, 9, 11}));
  EXPECT_TRUE(e->label);
}

TEST(BuildPositive, TwoPlateauReadings) {
  const auto e = build_positive(make_series({8, 9, 11, 11, 11}), {2, 1});
  ASSERT_TRUE(e);
  EXPECT_EQ(window_values(*e), (std::vector<double>{9, 11, 11}));
}

TEST(BuildPositive, InsufficientHistory) {
  EXPECT_FALSE(build_positive(make_series({11, 11, 11}), {1, 1}));
  EXPECT_FALSE(build_positive(make_series({8, 9, 11, 11}), {1, 3}));
  EXPECT_FALSE(build_positive(make_series({8, 9, 10}), {1, 1}));
}

TEST(BuildNegative, MostRecentWindow) {
  const auto e = build_negative(make_series({1, 2, 3, 4, 5, 6}), 4);
  ASSERT_TRUE(e);
  EXPECT_EQ(window_values(*e), (std::vector<double>{3, 4, 5, 6}));
  EXPECT_FALSE(e->label);
  EXPECT_FALSE(build_negative(make_series({1, 2, 3}), 4));
}

TEST(LabelFleet, OneNegativePerMeterFromLongestThenMostRecentSegment) {
  SeriesByMeter series;
  series["a"] = {make_series({1, 2, 3, 4, 5}, "a"), make_series({10, 11, 12}, "a")};
  series["b"] = {make_series({1, 2, 3}, "b"), make_series({7, 8, 9}, "b")};
  MeterTable meters{{"a", meter("a", false)}, {"b", meter("b", false)}};
  const auto ds = label_fleet(series, meters, {1, 1});
  ASSERT_EQ(ds.examples.size(), 2u);
  EXPECT_EQ(window_values(ds.examples[0]), (std::vector<double>{4, 5}));
  EXPECT_EQ(window_values(ds.examples[1]), (std::vector<double>{8, 9}));
  EXPECT_EQ(ds.examples[0].meter.meter_id, "a");
}

TEST(LabelFleet, PlateauNegativesFlag) {
  SeriesByMeter series;
  series["a"] = {make_series({1, 2, 2, 3}, "a")};
  MeterTable meters{{"a", meter("a", false)}};
  EXPECT_EQ(label_fleet(series, meters, {1, 1}).counts.negatives, 1u);
  const auto excluded = label_fleet(series, meters, {1, 1}, {true});
  EXPECT_EQ(excluded.counts.negatives, 0u);
  EXPECT_EQ(excluded.counts.negatives_excluded_for_plateau, 1u);
}

TEST(LabelFleet, CountsBookkeeping) {
  SeriesByMeter series;
  series["d1"] = {make_series({1, 2, 3, 3}, "d1")};
  series["d2"] = {make_series({1, 2, 3}, "d2")};
  series["d3"] = {make_series({4, 4}, "d3")};
  series["h1"] = {make_series({1}, "h1")};
  series["orphan"] = {make_series({1, 2}, "orphan")};
  series["h2"] = {make_series({3, 5, 4}, "h2")};
  MeterTable meters{{"d1", meter("d1", true)}, {"d2", meter("d2", true)}, {"d3", meter("d3", true)},
                    {"h1", meter("h1", false)}, {"h2", meter("h2", false)}, {"h3", meter("h3", false)}};
  const auto c = label_fleet(series, meters, {1, 1}).counts;
  EXPECT_EQ(c.positives, 1u);
  EXPECT_EQ(c.negatives, 1u);
  EXPECT_EQ(c.defective_without_plateau, 1u);
  EXPECT_EQ(c.defective_insufficient_history, 1u);
  EXPECT_EQ(c.non_defective_too_short, 1u);
  EXPECT_EQ(c.meters_without_metadata, 1u);
  EXPECT_EQ(c.meters_without_valid_series, 1u);
  EXPECT_EQ(c.windows_with_decreasing_counter, 1u);
  EXPECT_EQ(to_json(c).at("warnings").at("windows_with_decreasing_counter"), 1);
}

TEST(BuildDataset, RejectsSingleClass) {
  SeriesByMeter series;
  series["a"] = {make_series({1, 2, 3}, "a")};
  MeterTable meters{{"a", meter("a", false)}};
  EXPECT_THROW(build_dataset(series, meters, {1, 1}), Error);
}

TEST(BuildDataset, CsvIsLongFormat) {
  SeriesByMeter series;
  series["a"] = {make_series({1, 2, 3}, "a")};
  series["b"] = {make_series({1, 2, 2}, "b")};
  MeterTable meters{{"a", meter("a", false)}, {"b", meter("b", true)}};
  const auto ds = build_dataset(series, meters, {1, 1});
  std::ostringstream out;
  write_dataset(out, ds);
  EXPECT_EQ(out.str(),
            "meter_id,label,position,timestamp,value\n"
            "a,0,0,1970-01-31,2\na,0,1,1970-03-02,3\n"
            "b,1,0,1970-01-01,1\nb,1,1,1970-01-31,2\n");
}

// A generated fleet of 500 defective meters: per-(p, k) positive counts equal
// the brute-force enumeration, windows end with the plateau opening, and no
// window straddles a segment boundary.
TEST(BuildDataset, PositiveCountsMatchBruteForceEnumeration) {
  FleetConfig cfg;
  cfg.meters = 500;
  cfg.defective_fraction = 0.999;
  cfg.min_readings = 3;
  cfg.max_readings = 9;
  cfg.seed = 17;
  auto fleet = generate(cfg);
  QualityNoise noise;
  noise.process_fail_rate = 0.05;
  noise.gap_rate = 0.05;
  noise.seed = 5;
  const auto noisy = inject_quality_noise(fleet.readings, noise).readings;
  const auto validated = validate_fleet(noisy);
  MeterTable meters;
  std::size_t defective = 0;
  for (const auto& m : fleet.meters) {
    meters.emplace(m.meter_id, m);
    defective += m.defective;
  }
  ASSERT_GE(defective, 490u);

  for (int p = 1; p <= 2; ++p) {
    for (int k = 1; k <= 5; ++k) {
      const auto ds = label_fleet(validated.series, meters, {p, k});
      EXPECT_EQ(ds.counts.positives, oracle::count_positives(noisy, fleet.meters, p, k, kDefaultGapLimitDays))
          << "scheme " << p << "P+" << k;
      for (const auto& e : ds.examples) {
        if (!e.label) continue;
        ASSERT_EQ(e.window.size(), static_cast<std::size_t>(p + k));
        const double plateau_value = e.window[static_cast<std::size_t>(k)].value;
        EXPECT_NE(e.window[static_cast<std::size_t>(k) - 1].value, plateau_value);
        for (std::size_t i = static_cast<std::size_t>(k); i < e.window.size(); ++i) {
          EXPECT_EQ(e.window[i].value, plateau_value);
        }
        for (std::size_t i = 1; i < e.window.size(); ++i) {
          EXPECT_LE(days_between(e.window[i - 1].timestamp, e.window[i].timestamp), kDefaultGapLimitDays);
        }
      }
    }
  }
}
