#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "meterdown/features.hpp"
#include "meterdown/label.hpp"
#include "meterdown/models.hpp"
#include "meterdown/validate.hpp"

namespace meterdown {

/// Mann-Whitney AUC: P(score of a random positive > score of a random
/// negative), ties counted as 1/2. Labels are 0/1.
double auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double false_positive_rate = 0.0;
  double true_positive_rate = 0.0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// One point per distinct score threshold (descending), from (0,0) to (1,1).
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(std::span<const RocPoint> curve);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split; round(fraction * n) indices go to train.
Split holdout_split(std::span<const int> labels, double fraction, std::uint64_t seed);

/// Stratified k-fold partition of positions 0..labels.size()-1. Fold sizes
/// differ by at most one, and so do per-class counts.
std::vector<std::vector<std::size_t>> kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// Runs fn(0..count-1) on up to `threads` worker threads.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Trains a fresh model on `train` (encoders fit on `train` only) and returns
/// the AUC on `test`.
double train_and_score(Arch arch, std::span<const Example> train, std::span<const Example> test,
                       const TrainConfig& config, std::span<const Attribute> attributes);

struct ExperimentConfig {
  Arch arch = Arch::dnn1;
  std::vector<Scheme> schemes;
  TrainConfig train;
  std::vector<Attribute> attributes{kAllAttributes.begin(), kAllAttributes.end()};
  double train_fraction = 0.8;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  LabelOptions label;
};

nlohmann::json to_json(const ExperimentConfig& config);

struct SchemeResult {
  Scheme scheme;
  CountsReport counts;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<double> fold_aucs;
  double cv_auc = 0.0;
  double test_auc = 0.0;
  std::uint64_t split_seed = 0;
  std::uint64_t fold_seed = 0;
  std::vector<std::uint64_t> fold_train_seeds;
  std::uint64_t final_train_seed = 0;
};

inline constexpr int kReportSchemaVersion = 1;

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SchemeResult> results;
};

/// Per scheme: label, 80/20 stratified holdout, k-fold CV on the training
/// part (encoders refit per fold), then a model retrained on the whole
/// training part scored on the held-out part.
ExperimentReport run_experiment(const ExperimentConfig& config, const SeriesByMeter& series,
                                const MeterTable& meters);

nlohmann::json to_json(const ExperimentReport& report);
/// Aligned text table: Readings | Cross-validation | Testing.
std::string format_table(const ExperimentReport& report);

}  // namespace meterdown
