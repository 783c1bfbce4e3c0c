#include "meterdown/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "meterdown/error.hpp"

namespace meterdown {

Matrix Scaler::apply(const Matrix& raw) const {
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t t = 0; t < raw.rows(); ++t) {
    for (std::size_t f = 0; f < kContinuousFeatures; ++f) out(t, f) = (raw(t, f) - mean[f]) / stddev[f];
  }
  return out;
}

Matrix Scaler::invert(const Matrix& standardized) const {
  Matrix out(standardized.rows(), standardized.cols());
  for (std::size_t t = 0; t < standardized.rows(); ++t) {
    for (std::size_t f = 0; f < kContinuousFeatures; ++f) out(t, f) = standardized(t, f) * stddev[f] + mean[f];
  }
  return out;
}

Matrix raw_continuous(std::span<const SeriesPoint> window) {
  if (window.size() < 2) {
    throw Error("features.window", "continuous encoding needs at least 2 readings", {{"length", window.size()}});
  }
  Matrix out(window.size() - 1, kContinuousFeatures);
  for (std::size_t t = 0; t + 1 < window.size(); ++t) {
    out(t, 0) = window[t + 1].value - window[t].value;
    out(t, 1) = static_cast<double>(days_between(window[t].timestamp, window[t + 1].timestamp));
  }
  return out;
}

Matrix encode_continuous(std::span<const SeriesPoint> window, const Scaler& scaler) {
  return scaler.apply(raw_continuous(window));
}

Scaler fit_scaler(std::span<const Matrix> raw_inputs) {
  std::array<double, kContinuousFeatures> sum{};
  std::size_t n = 0;
  for (const auto& m : raw_inputs) {
    for (std::size_t t = 0; t < m.rows(); ++t) {
      for (std::size_t f = 0; f < kContinuousFeatures; ++f) sum[f] += m(t, f);
    }
    n += m.rows();
  }
  if (n == 0) throw Error("features.empty_training", "cannot fit a scaler on an empty training set");

  Scaler s;
  std::array<double, kContinuousFeatures> sq{};
  for (std::size_t f = 0; f < kContinuousFeatures; ++f) s.mean[f] = sum[f] / static_cast<double>(n);
  for (const auto& m : raw_inputs) {
    for (std::size_t t = 0; t < m.rows(); ++t) {
      for (std::size_t f = 0; f < kContinuousFeatures; ++f) {
        const double d = m(t, f) - s.mean[f];
        sq[f] += d * d;
      }
    }
  }
  for (std::size_t f = 0; f < kContinuousFeatures; ++f) {
    const double sd = std::sqrt(sq[f] / static_cast<double>(n));
    s.stddev[f] = (sd > 1e-12 && std::isfinite(sd)) ? sd : 1.0;
  }
  return s;
}

std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::producer:
      return "producer";
    case Attribute::meter_type:
      return "meter_type";
    case Attribute::year_of_construction:
      return "year";
    case Attribute::contract_type:
      return "contract";
  }
  return "?";
}

std::vector<Attribute> parse_attributes(std::string_view text) {
  std::vector<Attribute> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, comma - start);
    start = comma + 1;
    if (item.empty()) continue;
    const auto it = std::find_if(kAllAttributes.begin(), kAllAttributes.end(),
                                 [&](Attribute a) { return attribute_name(a) == item; });
    if (it == kAllAttributes.end()) {
      throw Error("features.attribute", "unknown categorical attribute '" + std::string(item) + "'",
                  {{"attribute", item}, {"allowed", {"producer", "meter_type", "year", "contract"}}});
    }
    if (std::find(out.begin(), out.end(), *it) == out.end()) out.push_back(*it);
  }
  if (out.empty()) throw Error("features.attribute", "empty categorical attribute list");
  return out;
}

std::string attribute_label(const MeterRecord& meter, Attribute a) {
  switch (a) {
    case Attribute::producer:
      return meter.producer;
    case Attribute::meter_type:
      return meter.meter_type;
    case Attribute::year_of_construction:
      return std::to_string(meter.year_of_construction);
    case Attribute::contract_type:
      return meter.contract_type;
  }
  return {};
}

std::size_t CategoricalVocab::dimension() const {
  std::size_t d = 0;
  for (const auto& c : categories) d += c.size();
  return d;
}

CategoricalVocab build_vocab(std::span<const MeterRecord> training, std::span<const Attribute> attributes) {
  if (training.empty()) throw Error("features.empty_training", "cannot build a vocabulary from no meters");
  CategoricalVocab vocab;
  vocab.attributes.assign(attributes.begin(), attributes.end());
  for (const auto a : attributes) {
    std::set<std::string> distinct;
    for (const auto& m : training) distinct.insert(attribute_label(m, a));
    vocab.categories.emplace_back(distinct.begin(), distinct.end());
  }
  return vocab;
}

std::vector<double> encode_categorical(const MeterRecord& meter, const CategoricalVocab& vocab) {
  std::vector<double> out(vocab.dimension(), 0.0);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < vocab.attributes.size(); ++i) {
    const auto& cats = vocab.categories[i];
    const auto label = attribute_label(meter, vocab.attributes[i]);
    const auto it = std::lower_bound(cats.begin(), cats.end(), label);
    if (it != cats.end() && *it == label) out[offset + static_cast<std::size_t>(it - cats.begin())] = 1.0;
    offset += cats.size();
  }
  return out;
}

FeatureEncoders fit_encoders(std::span<const Example> training, std::span<const Attribute> attributes) {
  if (training.empty()) throw Error("features.empty_training", "cannot fit encoders on an empty training set");
  std::vector<Matrix> raw;
  std::vector<MeterRecord> meters;
  raw.reserve(training.size());
  meters.reserve(training.size());
  for (const auto& e : training) {
    raw.push_back(raw_continuous(e.window));
    meters.push_back(e.meter);
  }
  return {fit_scaler(raw), build_vocab(meters, attributes)};
}

EncodedExample encode_example(const Example& example, const FeatureEncoders& encoders) {
  return {encode_continuous(example.window, encoders.scaler), encode_categorical(example.meter, encoders.vocab),
          example.label ? 1.0 : 0.0};
}

std::vector<EncodedExample> encode_examples(std::span<const Example> examples, const FeatureEncoders& encoders) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(encode_example(e, encoders));
  return out;
}

nlohmann::json to_json(const Scaler& s) {
  return {{"features", {"consumption_delta", "gap_days"}}, {"mean", s.mean}, {"stddev", s.stddev}};
}

Scaler scaler_from_json(const nlohmann::json& j) {
  Scaler s;
  s.mean = j.at("mean").get<std::array<double, kContinuousFeatures>>();
  s.stddev = j.at("stddev").get<std::array<double, kContinuousFeatures>>();
  for (double sd : s.stddev) {
    if (!(sd > 0.0) || !std::isfinite(sd)) throw Error("features.scaler", "scaler stddev must be positive");
  }
  return s;
}

nlohmann::json to_json(const CategoricalVocab& v) {
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t i = 0; i < v.attributes.size(); ++i) {
    blocks.push_back({{"attribute", attribute_name(v.attributes[i])}, {"categories", v.categories[i]}});
  }
  return {{"blocks", blocks}};
}

CategoricalVocab vocab_from_json(const nlohmann::json& j) {
  CategoricalVocab v;
  for (const auto& block : j.at("blocks")) {
    v.attributes.push_back(parse_attributes(block.at("attribute").get<std::string>()).front());
    auto cats = block.at("categories").get<std::vector<std::string>>();
    if (!std::is_sorted(cats.begin(), cats.end()) || std::adjacent_find(cats.begin(), cats.end()) != cats.end()) {
      throw Error("features.vocab", "vocabulary categories must be sorted and unique");
    }
    v.categories.push_back(std::move(cats));
  }
  return v;
}

}  // namespace meterdown
