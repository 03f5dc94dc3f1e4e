#pragma once

#include <boost/math/distributions/beta.hpp>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qbc/strategies.hpp"

namespace qbc {

inline constexpr std::uint64_t kDefaultTrials = 100000;
inline constexpr std::uint64_t kTrialHardCap = 100000000;

struct ExperimentSpec {
  ProtocolConfig protocol;
  std::string adamId = "honest";
  Json adamParams = Json::object();
  std::string babeId = "honest";
  Json babeParams = Json::object();
  std::uint64_t trials = kDefaultTrials;
  std::uint64_t masterSeed = 0;
  std::vector<std::string> metrics;

  void validate() const {
    protocol.validate();
    if (trials < 1) throw ValidationError("trials-range", "need at least one trial");
    if (trials > kTrialHardCap) throw ValidationError("trials-range", "trial cap exceeded");
  }
};

struct MetricStat {
  std::uint64_t trials = 0;
  std::uint64_t count = 0;
  double mean = 0.0;
  double stdErr = 0.0;  // sample standard deviation / sqrt(trials)
  double ciLow = 0.0;   // exact binomial (Clopper-Pearson) 95% interval
  double ciHigh = 1.0;
};

struct Prediction {
  double value = 0.0;
  std::string formula;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::map<std::string, MetricStat> estimates;
  std::map<std::string, Prediction> predictions;
  std::map<std::string, double> agreement;  // z-scores where a prediction exists
};

// ---------------------------------------------------------------------------
// statistics helpers

inline MetricStat proportion_stat(std::uint64_t count, std::uint64_t trials) {
  MetricStat s;
  s.trials = trials;
  s.count = count;
  s.mean = static_cast<double>(count) / static_cast<double>(trials);
  if (trials > 1) {
    double varNumer = s.mean * (1.0 - s.mean) * static_cast<double>(trials);
    s.stdErr = std::sqrt(varNumer / static_cast<double>(trials - 1)) /
               std::sqrt(static_cast<double>(trials));
  }
  // exact tails matter for proportions near 0 or 1
  const double alpha = 0.05;
  auto n = static_cast<double>(trials);
  auto x = static_cast<double>(count);
  s.ciLow = count == 0 ? 0.0
                       : boost::math::quantile(boost::math::beta_distribution<>(x, n - x + 1),
                                               alpha / 2);
  s.ciHigh = count == trials
                 ? 1.0
                 : boost::math::quantile(boost::math::beta_distribution<>(x + 1, n - x),
                                         1 - alpha / 2);
  return s;
}

inline double z_score(const MetricStat& stat, double prediction) {
  double diff = stat.mean - prediction;
  if (stat.stdErr > 0.0) return diff / stat.stdErr;
  if (std::abs(diff) < 1e-15) return 0.0;
  return diff > 0 ? 1e300 : -1e300;
}

// ---------------------------------------------------------------------------
// metrics

/// Known binary metrics, evaluated from the episode record.
inline bool evaluate_metric(const std::string& name, const EpisodeResult& ep) {
  if (name == "accept") return ep.annotations.accepted;
  if (name == "bit_change_accept")
    return ep.annotations.openedBit != ep.annotations.intentBit && ep.annotations.accepted;
  if (name == "same_bit_accept")
    return ep.annotations.openedBit == ep.annotations.intentBit && ep.annotations.accepted;
  if (name == "predetermined_bit_accept" || name == "adaptive_bit_accept")
    return ep.annotations.accepted;
  if (name == "babe_majority_correct")
    return ep.annotations.babeGuess && *ep.annotations.babeGuess == ep.annotations.intentBit;
  throw ValidationError("unknown-metric", "no metric named " + name);
}

/// Closed-form prediction for a metric under a given spec, where one exists.
inline std::optional<Prediction> metric_prediction(const ExperimentSpec& spec,
                                                   const std::string& metric) {
  const auto& cfg = spec.protocol;
  if (metric == "accept" && spec.adamId == "honest")
    return Prediction{1.0, "honest-verification"};
  if (metric == "same_bit_accept" && spec.adamId == "honest")
    return Prediction{1.0, "honest-verification"};
  if (metric == "babe_majority_correct" && spec.adamId == "honest") {
    if (cfg.kind == ProtocolKind::QBCp3m && cfg.n % 2 == 1)
      return Prediction{concealing_closed_form(cfg.n, 1.0).closedForm, "concealing-closed-form"};
    if (cfg.kind == ProtocolKind::QBC3m2 && cfg.N % 2 == 1) {
      double p = concealing_closed_form(cfg.N, 1.0).closedForm;
      return Prediction{majority_vote_pbc(cfg.m, p), "majority-vote-composition"};
    }
    return std::nullopt;
  }
  if (metric == "bit_change_accept" && spec.adamId == "measure-resend" &&
      cfg.babeStateSet == StateSet::BB84)
    return Prediction{0.75, "basis-match-average"};
  if (metric == "predetermined_bit_accept" && spec.adamId == "entangle-delay")
    return Prediction{0.5, "register-outcome-coin"};
  if (metric == "adaptive_bit_accept" && spec.adamId == "entangle-delay")
    return Prediction{1.0, "register-readout"};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// the experiment engine

/// Runs `spec.trials` independent episodes. Trial t draws every random choice
/// from the stream derived from (masterSeed, t), so results are identical for
/// any shard layout; aggregation is integer counting.
inline ExperimentReport run_experiment(const ExperimentSpec& spec, int threads = 1) {
  spec.validate();
  AdamFactory adamFactory = resolve_adam_strategy(spec.adamId, spec.adamParams, spec.protocol);
  BabeFactory babeFactory = resolve_babe_strategy(spec.babeId, spec.babeParams, spec.protocol);
  OpenPolicy policy = open_policy_from_params(spec.adamParams);

  const std::size_t nMetrics = spec.metrics.size();
  auto runRange = [&](std::uint64_t lo, std::uint64_t hi, std::vector<std::uint64_t>& counts) {
    for (std::uint64_t t = lo; t < hi; ++t) {
      RngStream rng = RngStream::derive(spec.masterSeed, t);
      auto adam = adamFactory();
      auto babe = babeFactory();
      EpisodeResult ep = run_episode(spec.protocol, *adam, *babe, policy, rng);
      for (std::size_t k = 0; k < nMetrics; ++k)
        if (evaluate_metric(spec.metrics[k], ep)) ++counts[k];
    }
  };

  std::vector<std::uint64_t> totals(nMetrics, 0);
  if (threads <= 1) {
    runRange(0, spec.trials, totals);
  } else {
    auto t = static_cast<std::uint64_t>(threads);
    std::vector<std::vector<std::uint64_t>> parts(t, std::vector<std::uint64_t>(nMetrics, 0));
    std::vector<std::thread> pool;
    for (std::uint64_t w = 0; w < t; ++w) {
      std::uint64_t lo = spec.trials * w / t;
      std::uint64_t hi = spec.trials * (w + 1) / t;
      pool.emplace_back([&, w, lo, hi] { runRange(lo, hi, parts[w]); });
    }
    for (auto& th : pool) th.join();
    for (const auto& part : parts)
      for (std::size_t k = 0; k < nMetrics; ++k) totals[k] += part[k];
  }

  ExperimentReport report;
  report.spec = spec;
  for (std::size_t k = 0; k < nMetrics; ++k) {
    const std::string& name = spec.metrics[k];
    report.estimates[name] = proportion_stat(totals[k], spec.trials);
    if (auto pred = metric_prediction(spec, name)) {
      report.predictions[name] = *pred;
      report.agreement[name] = z_score(report.estimates[name], pred->value);
    }
  }
  // predictions are attached even when no trials measure them
  for (const auto& name : {std::string("babe_majority_correct"), std::string("accept")}) {
    if (report.predictions.count(name) || report.estimates.count(name)) continue;
    if (auto pred = metric_prediction(spec, name)) report.predictions[name] = *pred;
  }
  return report;
}

/// Bit-change estimate for a cheating committer: commit under one intention,
/// open the other bit, count verification passes.
inline MetricStat estimate_adam_cheat(ExperimentSpec spec, int threads = 1) {
  spec.adamParams["openMode"] = "other";
  spec.metrics = {"bit_change_accept"};
  return run_experiment(spec, threads).estimates.at("bit_change_accept");
}

// ---------------------------------------------------------------------------
// parameter sweeps

struct SweepAxis {
  std::string name;  // "n", "m", "N", "trials", "adamId", "openMode"
  std::vector<Json> values;
};

struct SweepRow {
  std::string key;
  ExperimentReport report;
};

inline void apply_override(ExperimentSpec& spec, const std::string& name, const Json& value) {
  if (name == "n") spec.protocol.n = value.get<int>();
  else if (name == "m") spec.protocol.m = value.get<int>();
  else if (name == "N") spec.protocol.N = value.get<int>();
  else if (name == "trials") spec.trials = value.get<std::uint64_t>();
  else if (name == "seed") spec.masterSeed = value.get<std::uint64_t>();
  else if (name == "adamId") spec.adamId = value.get<std::string>();
  else if (name == "openMode") spec.adamParams["openMode"] = value;
  else throw ValidationError("sweep-axis", "unknown sweep axis " + name);
}

/// Cartesian sweep in listed-axis order; rows come out in a stable order and
/// completed grid points can be checkpointed/resumed by the caller between
/// calls via the `completed` map.
inline std::vector<SweepRow> sweep(const ExperimentSpec& base, const std::vector<SweepAxis>& axes,
                                   std::map<std::string, ExperimentReport>* completed = nullptr,
                                   int threads = 1,
                                   const std::function<void(const SweepRow&)>& onRow = nullptr) {
  if (axes.empty()) throw ValidationError("sweep-grid", "grid must be nonempty");
  for (const auto& ax : axes)
    if (ax.values.empty()) throw ValidationError("sweep-grid", "grid must be nonempty");

  std::vector<std::size_t> idx(axes.size(), 0);
  std::vector<SweepRow> rows;
  for (;;) {
    ExperimentSpec spec = base;
    std::string key;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      apply_override(spec, axes[a].name, axes[a].values[idx[a]]);
      if (!key.empty()) key += ";";
      key += axes[a].name + "=" + axes[a].values[idx[a]].dump();
    }
    if (completed && completed->count(key)) {
      rows.push_back({key, completed->at(key)});
    } else {
      rows.push_back({key, run_experiment(spec, threads)});
      if (completed) (*completed)[key] = rows.back().report;
      if (onRow) onRow(rows.back());
    }
    // odometer, last axis fastest
    std::size_t a = axes.size();
    while (a > 0 && ++idx[a - 1] == axes[a - 1].values.size()) idx[--a] = 0;
    if (a == 0) return rows;
  }
}

}  // namespace qbc
