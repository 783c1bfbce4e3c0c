// Independent reference computations used only by the tests. None of these
// call into the code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "meterdown/ingest.hpp"
#include "meterdown/matrix.hpp"
#include "meterdown/neuralcore.hpp"

namespace oracle {

/// Lengths of the runs obtained by cutting wherever day[i] - day[i-1] > limit.
inline std::vector<std::size_t> cut_scan_lengths(const std::vector<int>& days, int limit) {
  std::vector<std::size_t> lengths;
  if (days.empty()) return lengths;
  std::size_t run = 1;
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (days[i] - days[i - 1] > limit) {
      lengths.push_back(run);
      run = 0;
    }
    ++run;
  }
  lengths.push_back(run);
  return lengths;
}

/// Re-derives, from raw readings, how many defective meters yield a
/// pP+k positive window.
inline std::size_t count_positives(const std::vector<meterdown::RawReading>& readings,
                                   const std::vector<meterdown::MeterRecord>& meters, int p, int k, int limit) {
  std::map<std::string, std::vector<std::pair<int, double>>> by_meter;
  for (const auto& r : readings) {
    if (!(r.process_ok && r.congruent)) continue;
    by_meter[r.meter_id].emplace_back(static_cast<int>(r.timestamp.time_since_epoch().count()), r.value);
  }
  std::size_t count = 0;
  for (const auto& m : meters) {
    if (!m.defective) continue;
    auto it = by_meter.find(m.meter_id);
    if (it == by_meter.end()) continue;
    auto pts = it->second;
    std::stable_sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, double>> dedup;
    for (const auto& pt : pts) {
      if (!dedup.empty() && dedup.back().first == pt.first) {
        dedup.back() = pt;
      } else {
        dedup.push_back(pt);
      }
    }
    // Split into runs, take the first run that holds two equal neighbours.
    std::vector<std::vector<double>> runs{{}};
    for (std::size_t i = 0; i < dedup.size(); ++i) {
      if (i > 0 && dedup[i].first - dedup[i - 1].first > limit) runs.emplace_back();
      runs.back().push_back(dedup[i].second);
    }
    for (const auto& run : runs) {
      std::size_t first_equal = run.size();
      for (std::size_t i = 0; i + 1 < run.size(); ++i) {
        if (run[i] == run[i + 1]) {
          first_equal = i;
          break;
        }
      }
      if (first_equal == run.size()) continue;
      std::size_t plateau_len = 1;
      while (first_equal + plateau_len < run.size() && run[first_equal + plateau_len] == run[first_equal]) {
        ++plateau_len;
      }
      if (first_equal >= static_cast<std::size_t>(k) && plateau_len >= static_cast<std::size_t>(p)) ++count;
      break;
    }
  }
  return count;
}

inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Unit-by-unit evaluation of the GRU recurrence.
inline std::vector<double> scalar_gru(const meterdown::GruParams& p, const meterdown::Matrix& xs,
                                      std::vector<double> h) {
  const std::size_t H = p.hidden;
  for (std::size_t t = 0; t < xs.rows(); ++t) {
    std::vector<double> z(H), r(H), c(H), next(H);
    for (std::size_t j = 0; j < H; ++j) {
      double az = p.update.bias(0, j);
      double ar = p.reset.bias(0, j);
      for (std::size_t i = 0; i < p.input_dim; ++i) {
        az += xs(t, i) * p.update.input_weight(i, j);
        ar += xs(t, i) * p.reset.input_weight(i, j);
      }
      for (std::size_t i = 0; i < H; ++i) {
        az += h[i] * p.update.recurrent_weight(i, j);
        ar += h[i] * p.reset.recurrent_weight(i, j);
      }
      z[j] = logistic(az);
      r[j] = logistic(ar);
    }
    for (std::size_t j = 0; j < H; ++j) {
      double ac = p.candidate.bias(0, j);
      for (std::size_t i = 0; i < p.input_dim; ++i) ac += xs(t, i) * p.candidate.input_weight(i, j);
      for (std::size_t i = 0; i < H; ++i) ac += r[i] * h[i] * p.candidate.recurrent_weight(i, j);
      c[j] = std::tanh(ac);
      next[j] = z[j] * h[j] + (1.0 - z[j]) * c[j];
    }
    h = next;
  }
  return h;
}

/// Unit-by-unit dense layer: act(x W + b).
inline std::vector<double> scalar_dense(const meterdown::Matrix& w, const meterdown::Matrix& b,
                                        const std::vector<double>& x, bool relu) {
  std::vector<double> y(w.cols());
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (std::size_t i = 0; i < w.rows(); ++i) s += x[i] * w(i, j);
    y[j] = relu ? std::max(0.0, s) : s;
  }
  return y;
}

/// Central difference of f at every entry of `block`.
inline meterdown::Matrix central_difference(meterdown::Matrix& block, const std::function<double()>& f,
                                            double step = 1e-5) {
  meterdown::Matrix g(block.rows(), block.cols());
  auto v = block.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + step;
    const double up = f();
    v[i] = keep - step;
    const double down = f();
    v[i] = keep;
    g.values()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

/// Plug-in mutual information (nats) between two discrete samples.
inline double plugin_mutual_information(const std::vector<std::string>& x, const std::vector<int>& y) {
  std::map<std::pair<std::string, int>, double> joint;
  std::map<std::string, double> px;
  std::map<int, double> py;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[{x[i], y[i]}] += 1.0;
    px[x[i]] += 1.0;
    py[y[i]] += 1.0;
  }
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = c / n;
    mi += pxy * std::log(pxy / ((px[key.first] / n) * (py[key.second] / n)));
  }
  return mi;
}

inline std::vector<std::string> distinct_sorted(const std::vector<std::string>& labels) {
  std::unordered_set<std::string> seen(labels.begin(), labels.end());
  std::vector<std::string> out(seen.begin(), seen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace oracle
