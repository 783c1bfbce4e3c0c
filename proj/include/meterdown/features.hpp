#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "meterdown/ingest.hpp"
#include "meterdown/label.hpp"
#include "meterdown/matrix.hpp"

namespace meterdown {

/// Per step: (consumption delta, gap in days).
inline constexpr std::size_t kContinuousFeatures = 2;

/// Per-feature z-score. Degenerate features get std 1.
struct Scaler {
  std::array<double, kContinuousFeatures> mean{0.0, 0.0};
  std::array<double, kContinuousFeatures> stddev{1.0, 1.0};

  static Scaler identity() { return {}; }
  Matrix apply(const Matrix& raw) const;
  Matrix invert(const Matrix& standardized) const;

  friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// Unscaled (delta, gap-days) steps; (window length - 1) x 2.
Matrix raw_continuous(std::span<const SeriesPoint> window);
Matrix encode_continuous(std::span<const SeriesPoint> window, const Scaler& scaler);

/// Fits mean/std over every step of every raw training input.
Scaler fit_scaler(std::span<const Matrix> raw_inputs);

enum class Attribute { producer, meter_type, year_of_construction, contract_type };

inline constexpr std::array<Attribute, 4> kAllAttributes = {Attribute::producer, Attribute::meter_type,
                                                            Attribute::year_of_construction,
                                                            Attribute::contract_type};

std::string_view attribute_name(Attribute a);
/// Comma-separated attribute names, e.g. "producer,contract".
std::vector<Attribute> parse_attributes(std::string_view text);
std::string attribute_label(const MeterRecord& meter, Attribute a);

/// One sorted category list per enabled attribute.
struct CategoricalVocab {
  std::vector<Attribute> attributes;
  std::vector<std::vector<std::string>> categories;

  std::size_t dimension() const;
  friend bool operator==(const CategoricalVocab&, const CategoricalVocab&) = default;
};

CategoricalVocab build_vocab(std::span<const MeterRecord> training,
                             std::span<const Attribute> attributes = kAllAttributes);

/// Concatenated one-hot blocks; unknown categories give an all-zero block.
std::vector<double> encode_categorical(const MeterRecord& meter, const CategoricalVocab& vocab);

/// Model-ready example.
struct EncodedExample {
  Matrix sequence;
  std::vector<double> categorical;
  double label = 0.0;
};

struct FeatureEncoders {
  Scaler scaler;
  CategoricalVocab vocab;
};

/// Fits scaler and vocab on the given training examples only.
FeatureEncoders fit_encoders(std::span<const Example> training, std::span<const Attribute> attributes = kAllAttributes);

EncodedExample encode_example(const Example& example, const FeatureEncoders& encoders);
std::vector<EncodedExample> encode_examples(std::span<const Example> examples, const FeatureEncoders& encoders);

nlohmann::json to_json(const Scaler& scaler);
Scaler scaler_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CategoricalVocab& vocab);
CategoricalVocab vocab_from_json(const nlohmann::json& j);

}  // namespace meterdown
