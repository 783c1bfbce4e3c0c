#include "meterdown/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "meterdown/error.hpp"

namespace meterdown {

namespace {

struct ClassTotals {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

ClassTotals check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error("evaluate.size", "scores and labels differ in length",
                {{"scores", scores.size()}, {"labels", labels.size()}});
  }
  ClassTotals t;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++t.positives;
    } else if (labels[i] == 0) {
      ++t.negatives;
    } else {
      throw Error("evaluate.label", "labels must be 0 or 1", {{"index", i}, {"label", labels[i]}});
    }
    if (std::isnan(scores[i])) throw Error("evaluate.score", "NaN score", {{"index", i}});
  }
  if (t.positives == 0 || t.negatives == 0) {
    throw Error("evaluate.single_class", "AUC needs at least one positive and one negative",
                {{"positives", t.positives}, {"negatives", t.negatives}});
  }
  return t;
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  const auto totals = check_binary(scores, labels);
  const auto order = order_by_score_desc(scores);
  // Walk tie groups from the highest score; every negative in a later group
  // is outranked by each positive of the current group.
  double wins = 0.0;
  std::size_t negatives_above = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    std::size_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] == 1 ? ++pos : ++neg;
      ++j;
    }
    const std::size_t negatives_below = totals.negatives - negatives_above - neg;
    wins += static_cast<double>(pos) * (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(neg));
    negatives_above += neg;
    i = j;
  }
  return wins / (static_cast<double>(totals.positives) * static_cast<double>(totals.negatives));
}

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels) {
  const auto totals = check_binary(scores, labels);
  const auto order = order_by_score_desc(scores);
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] == 1 ? ++tp : ++fp;
      ++j;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(totals.negatives),
                     static_cast<double>(tp) / static_cast<double>(totals.positives)});
    i = j;
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].false_positive_rate - curve[i - 1].false_positive_rate) *
            (curve[i].true_positive_rate + curve[i - 1].true_positive_rate) * 0.5;
  }
  return area;
}

// ---------------------------------------------------------------------------

namespace {

std::array<std::vector<std::size_t>, 2> shuffled_classes(std::span<const int> labels, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw Error("evaluate.label", "labels must be 0 or 1", {{"index", i}, {"label", labels[i]}});
    }
    classes[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::mt19937_64 rng(seed);
  // Positives first so a dataset's split does not depend on how the
  // classes interleave in the input.
  std::shuffle(classes[1].begin(), classes[1].end(), rng);
  std::shuffle(classes[0].begin(), classes[0].end(), rng);
  return classes;
}

}  // namespace

Split holdout_split(std::span<const int> labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error("evaluate.fraction", "train fraction must be in (0, 1)", {{"fraction", fraction}});
  }
  auto classes = shuffled_classes(labels, seed);
  for (int c = 0; c < 2; ++c) {
    if (classes[static_cast<std::size_t>(c)].size() < 2) {
      throw Error("evaluate.small_class", "each class needs at least 2 examples for a holdout split",
                  {{"class", c}, {"count", classes[static_cast<std::size_t>(c)].size()}});
    }
  }
  const auto n = static_cast<double>(labels.size());
  const auto total_train = static_cast<std::size_t>(std::llround(fraction * n));

  // Largest-remainder apportionment of the training quota across classes.
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double exact = fraction * static_cast<double>(classes[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  while (assigned < total_train) {
    const std::size_t c = remainder[1] >= remainder[0] ? 1 : 0;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }
  for (std::size_t c = 0; c < 2; ++c) {
    quota[c] = std::clamp<std::size_t>(quota[c], 1, classes[c].size() - 1);
  }

  Split s;
  for (std::size_t c : {std::size_t{1}, std::size_t{0}}) {
    s.train.insert(s.train.end(), classes[c].begin(), classes[c].begin() + static_cast<std::ptrdiff_t>(quota[c]));
    s.test.insert(s.test.end(), classes[c].begin() + static_cast<std::ptrdiff_t>(quota[c]), classes[c].end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<std::vector<std::size_t>> kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("evaluate.folds", "k-fold needs k >= 2", {{"k", k}});
  auto classes = shuffled_classes(labels, seed);
  for (int c = 0; c < 2; ++c) {
    if (classes[static_cast<std::size_t>(c)].size() < k) {
      throw Error("evaluate.small_class",
                  "class " + std::to_string(c) + " has fewer examples than folds",
                  {{"class", c}, {"count", classes[static_cast<std::size_t>(c)].size()}, {"k", k}});
    }
  }
  std::vector<std::vector<std::size_t>> folds(k);
  // Deal positives then negatives round-robin with one running counter.
  std::size_t next = 0;
  for (std::size_t c : {std::size_t{1}, std::size_t{0}}) {
    for (std::size_t idx : classes[c]) folds[next++ % k].push_back(idx);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

double train_and_score(Arch arch, std::span<const Example> train_set, std::span<const Example> test_set,
                       const TrainConfig& config, std::span<const Attribute> attributes) {
  const auto encoders = fit_encoders(train_set, attributes);
  const auto train_encoded = encode_examples(train_set, encoders);
  const auto test_encoded = encode_examples(test_set, encoders);
  ModelDims dims;
  dims.hidden = config.hidden;
  dims.categorical = arch == Arch::dnn2 ? encoders.vocab.dimension() : 0;
  auto model = Model::init(arch, dims, config.seed);
  train(model, train_encoded, config);
  const auto scores = predict(model, test_encoded);
  std::vector<int> labels;
  labels.reserve(test_encoded.size());
  for (const auto& e : test_encoded) labels.push_back(e.label == 1.0 ? 1 : 0);
  return auc(scores, labels);
}

namespace {

template <typename T>
std::vector<T> pick(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items[i]);
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const SeriesByMeter& series,
                                const MeterTable& meters) {
  config.train.validate();
  if (config.schemes.empty()) throw Error("evaluate.config", "no schemes requested");
  if (config.folds < 2) throw Error("evaluate.config", "folds must be >= 2", {{"folds", config.folds}});

  ExperimentReport report;
  report.config = config;
  for (std::size_t si = 0; si < config.schemes.size(); ++si) {
    const auto& scheme = config.schemes[si];
    const auto dataset = build_dataset(series, meters, scheme, config.label);
    std::vector<int> labels;
    for (const auto& e : dataset.examples) labels.push_back(e.label ? 1 : 0);

    SchemeResult r;
    r.scheme = scheme;
    r.counts = dataset.counts;
    const std::uint64_t scheme_seed = derive_seed(config.seed, si);
    r.split_seed = derive_seed(scheme_seed, 0);
    r.fold_seed = derive_seed(scheme_seed, 1);
    r.final_train_seed = derive_seed(scheme_seed, 2);

    const auto split = holdout_split(labels, config.train_fraction, r.split_seed);
    r.train_size = split.train.size();
    r.test_size = split.test.size();
    const std::span<const Example> all(dataset.examples);
    const auto train_examples = pick(all, split.train);
    const auto test_examples = pick(all, split.test);

    std::vector<int> train_labels;
    for (const auto& e : train_examples) train_labels.push_back(e.label ? 1 : 0);
    const auto folds = kfold(train_labels, config.folds, r.fold_seed);
    for (std::size_t f = 0; f < folds.size(); ++f) r.fold_train_seeds.push_back(derive_seed(scheme_seed, 100 + f));

    // Fold jobs plus the final retrain run together; slot `folds.size()` is the final model.
    std::vector<double> scores(folds.size() + 1, 0.0);
    parallel_for(folds.size() + 1, config.threads, [&](std::size_t job) {
      auto cfg = config.train;
      if (job == folds.size()) {
        cfg.seed = r.final_train_seed;
        scores[job] = train_and_score(config.arch, train_examples, test_examples, cfg, config.attributes);
        return;
      }
      cfg.seed = r.fold_train_seeds[job];
      std::vector<std::size_t> fit_idx;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != job) fit_idx.insert(fit_idx.end(), folds[g].begin(), folds[g].end());
      }
      std::sort(fit_idx.begin(), fit_idx.end());
      const std::span<const Example> tr(train_examples);
      scores[job] = train_and_score(config.arch, pick(tr, fit_idx), pick(tr, std::span<const std::size_t>(folds[job])),
                                    cfg, config.attributes);
    });
    r.fold_aucs.assign(scores.begin(), scores.end() - 1);
    r.cv_auc = std::accumulate(r.fold_aucs.begin(), r.fold_aucs.end(), 0.0) / static_cast<double>(r.fold_aucs.size());
    r.test_auc = scores.back();
    report.results.push_back(std::move(r));
  }
  return report;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json schemes = nlohmann::json::array();
  for (const auto& s : c.schemes) schemes.push_back(s.name());
  nlohmann::json attributes = nlohmann::json::array();
  for (const auto a : c.attributes) attributes.push_back(attribute_name(a));
  return {{"arch", arch_name(c.arch)},
          {"schemes", schemes},
          {"train", to_json(c.train)},
          {"categorical_attributes", c.arch == Arch::dnn2 ? attributes : nlohmann::json::array()},
          {"train_fraction", c.train_fraction},
          {"folds", c.folds},
          {"seed", c.seed},
          {"exclude_plateau_negatives", c.label.exclude_plateau_negatives}};
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.results) {
    rows.push_back({{"scheme", r.scheme.name()},
                    {"positives", r.counts.positives},
                    {"negatives", r.counts.negatives},
                    {"train_size", r.train_size},
                    {"test_size", r.test_size},
                    {"cv_auc", r.cv_auc},
                    {"test_auc", r.test_auc},
                    {"fold_aucs", r.fold_aucs},
                    {"seeds",
                     {{"split", r.split_seed},
                      {"folds", r.fold_seed},
                      {"fold_training", r.fold_train_seeds},
                      {"final_training", r.final_train_seed}}},
                    {"counts", to_json(r.counts)}});
  }
  return {{"schema_version", kReportSchemaVersion}, {"config", to_json(report.config)}, {"results", rows}};
}

std::string format_table(const ExperimentReport& report) {
  const auto pct = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%", v * 100.0);
    return std::string(buf);
  };
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s  %-16s  %s\n", "Readings", "Cross-validation", "Testing");
  out += line;
  for (const auto& r : report.results) {
    std::snprintf(line, sizeof line, "%-10s  %-16s  %s\n", r.scheme.name().c_str(), pct(r.cv_auc).c_str(),
                  pct(r.test_auc).c_str());
    out += line;
  }
  return out;
}

}  // namespace meterdown
