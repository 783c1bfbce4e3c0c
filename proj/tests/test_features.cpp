#include <gtest/gtest.h>

#include <random>

#include "meterdown/error.hpp"
#include "meterdown/features.hpp"
#include "oracles.hpp"

using namespace meterdown;

namespace {

std::vector<SeriesPoint> window(const std::vector<double>& values, const std::vector<int>& days) {
  std::vector<SeriesPoint> w;
  for (std::size_t i = 0; i < values.size(); ++i) w.push_back({Date{std::chrono::days{days[i]}}, values[i]});
  return w;
}

MeterRecord meter(std::string producer, std::string type = "t", int year = 2005, std::string contract = "res") {
  return {"m", std::move(producer), std::move(type), year, std::move(contract), false};
}

}  // namespace

TEST(EncodeContinuous, RawDeltasWithIdentityScaler) {
  const auto m = encode_continuous(window({100, 103, 103}, {0, 30, 60}), Scaler::identity());
  ASSERT_EQ(m.rows(), 2u);
  EXPECT_EQ(m(0, 0), 3.0);
  EXPECT_EQ(m(0, 1), 30.0);
  EXPECT_EQ(m(1, 0), 0.0);
  EXPECT_EQ(m(1, 1), 30.0);
}

TEST(EncodeContinuous, ShortWindowRejected) {
  EXPECT_THROW(encode_continuous(window({1}, {0}), Scaler::identity()), Error);
}

TEST(EncodeContinuous, DestandardizingRecoversRawDeltas) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> val(0.0, 500.0);
  std::uniform_int_distribution<int> gap(1, 200);
  std::vector<Matrix> raws;
  std::vector<std::vector<SeriesPoint>> windows;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v{val(rng)};
    std::vector<int> d{0};
    for (int i = 0; i < 4; ++i) {
      v.push_back(v.back() + val(rng));
      d.push_back(d.back() + gap(rng));
    }
    windows.push_back(window(v, d));
    raws.push_back(raw_continuous(windows.back()));
  }
  const auto scaler = fit_scaler(raws);
  for (std::size_t t = 0; t < windows.size(); ++t) {
    const auto back = scaler.invert(encode_continuous(windows[t], scaler));
    for (std::size_t i = 0; i < back.rows(); ++i) {
      for (std::size_t f = 0; f < 2; ++f) {
        EXPECT_LE(std::abs(back(i, f) - raws[t](i, f)), 1e-9 * std::max(1.0, std::abs(raws[t](i, f))));
      }
    }
  }
}

TEST(FitScaler, ConstantFeatureGetsUnitStd) {
  std::vector<Matrix> raws;
  for (int i = 0; i < 5; ++i) raws.push_back(raw_continuous(window({0, 1.0 + i, 2.0 + 2 * i}, {0, 30, 60})));
  const auto s = fit_scaler(raws);
  EXPECT_EQ(s.stddev[1], 1.0);
  EXPECT_EQ(s.mean[1], 30.0);
  for (const auto& r : raws) {
    const auto z = s.apply(r);
    for (std::size_t i = 0; i < z.rows(); ++i) EXPECT_EQ(z(i, 1), 0.0);
  }
  EXPECT_GT(s.stddev[0], 0.0);
}

TEST(FitScaler, EmptyTrainingRejected) {
  EXPECT_THROW(fit_scaler(std::vector<Matrix>{}), Error);
  EXPECT_THROW(build_vocab(std::vector<MeterRecord>{}), Error);
}

TEST(Vocab, LexicographicOrder) {
  const std::vector<MeterRecord> ms{meter("ZETA"), meter("ACME"), meter("ZETA")};
  const auto v = build_vocab(ms);
  ASSERT_EQ(v.attributes.size(), 4u);
  EXPECT_EQ(v.categories[0], (std::vector<std::string>{"ACME", "ZETA"}));
  EXPECT_EQ(v.dimension(), 2u + 1u + 1u + 1u);
}

TEST(Vocab, MatchesDistinctAndSortOracle) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> pick(0, 25);
  std::uniform_int_distribution<int> year(1950, 2020);
  std::vector<MeterRecord> ms;
  for (int i = 0; i < 1000; ++i) {
    ms.push_back(meter(std::string(1, static_cast<char>('A' + pick(rng))) + std::to_string(pick(rng)),
                       "type" + std::to_string(pick(rng) % 7), year(rng), "c" + std::to_string(pick(rng) % 3)));
  }
  const auto v = build_vocab(ms);
  for (std::size_t a = 0; a < v.attributes.size(); ++a) {
    std::vector<std::string> labels;
    for (const auto& m : ms) labels.push_back(attribute_label(m, v.attributes[a]));
    EXPECT_EQ(v.categories[a], oracle::distinct_sorted(labels));
  }
}

TEST(EncodeCategorical, OneHotBlocksAndUnknownCategory) {
  const std::vector<Attribute> producer_only{Attribute::producer};
  const auto v = build_vocab(std::vector<MeterRecord>{meter("ACME"), meter("ZETA")}, producer_only);
  EXPECT_EQ(encode_categorical(meter("ZETA"), v), (std::vector<double>{0, 1}));
  EXPECT_EQ(encode_categorical(meter("NOVA"), v), (std::vector<double>{0, 0}));
}

TEST(EncodeCategorical, StructureHoldsForEveryMeter) {
  std::vector<MeterRecord> train{meter("A", "x", 2001, "r"), meter("B", "y", 2002, "c"), meter("C", "x", 2003, "p")};
  const auto v = build_vocab(train);
  const std::vector<MeterRecord> probe{meter("A", "y", 2003, "r"), meter("Q", "q", 1999, "q"), meter("C", "x", 2002, "c")};
  for (const auto& m : probe) {
    const auto enc = encode_categorical(m, v);
    ASSERT_EQ(enc.size(), v.dimension());
    std::size_t offset = 0;
    for (const auto& block : v.categories) {
      double ones = 0;
      for (std::size_t i = 0; i < block.size(); ++i) ones += enc[offset + i];
      EXPECT_LE(ones, 1.0);
      offset += block.size();
    }
  }
}

TEST(Encoders, NoLeakageFromTestSet) {
  std::vector<Example> train;
  for (int i = 0; i < 10; ++i) {
    Example e;
    e.window = window({0, 1.0 + i, 3.0 + i}, {0, 20 + i, 50});
    e.meter = meter(i % 2 ? "A" : "B");
    train.push_back(e);
  }
  Example test_a;
  test_a.window = window({0, 1000, 5000}, {0, 5, 400});
  test_a.meter = meter("ZZZ");
  Example test_b = test_a;
  test_b.meter = meter("A");

  const auto enc = fit_encoders(train);
  const auto again = fit_encoders(train);
  EXPECT_EQ(enc.scaler, again.scaler);
  EXPECT_EQ(enc.vocab, again.vocab);
  const auto a = encode_example(train[3], enc);
  EXPECT_EQ(a.sequence, encode_continuous(train[3].window, enc.scaler));
  EXPECT_EQ(encode_example(test_a, enc).categorical.size(), encode_example(test_b, enc).categorical.size());
}

TEST(Encoders, JsonRoundTrip) {
  Scaler s;
  s.mean = {1.25, 60.0};
  s.stddev = {0.1, 17.5};
  EXPECT_EQ(scaler_from_json(to_json(s)), s);
  const auto v = build_vocab(std::vector<MeterRecord>{meter("A"), meter("B", "z", 2010, "q")});
  EXPECT_EQ(vocab_from_json(to_json(v)), v);
  EXPECT_THROW(parse_attributes("producer,colour"), Error);
  EXPECT_EQ(parse_attributes("producer,year").size(), 2u);
}
