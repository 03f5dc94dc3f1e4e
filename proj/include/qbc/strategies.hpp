#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qbc/oracle.hpp"
#include "qbc/protocols.hpp"

namespace qbc {

// ---------------------------------------------------------------------------
// receiver side

class HonestBabe : public BabeStrategy {
 public:
  std::string id() const override { return "honest"; }

  std::vector<Ket> prepare(const ProtocolConfig& config, RngStream& rng) override {
    std::vector<Ket> out;
    StateSet set = config.kind == ProtocolKind::QBCp3u ? StateSet::BB84 : config.babeStateSet;
    for (int j = 0; j < config.anonymous_qubits(); ++j)
      out.push_back(sample_state(set, config.circle, rng));
    return out;
  }
};

// ---------------------------------------------------------------------------
// committer side

namespace detail {

inline std::vector<int> distinct_positions(int count, int wires, RngStream& rng) {
  std::vector<int> pos;
  while (static_cast<int>(pos.size()) < count) {
    int p = static_cast<int>(rng.below(static_cast<std::size_t>(wires))) + 1;
    bool dup = false;
    for (int q : pos) dup = dup || q == p;
    if (!dup) pos.push_back(p);
  }
  return pos;
}

inline void fill_decoys(CommitMessage& msg, const ProtocolConfig& config,
                        const std::vector<int>& taken, RngStream& rng) {
  int wires = config.wire_qubits();
  std::vector<bool> used(wires, false);
  for (int p : taken) used[p - 1] = true;
  for (int p = 1; p <= wires; ++p)
    if (!used[p - 1])
      msg.groups.push_back({sample_decoy(config.decoySet, config.circle, rng), {p}, 0});
}

inline void require_kind(const ProtocolConfig& config, std::initializer_list<ProtocolKind> kinds,
                         const char* who) {
  for (ProtocolKind k : kinds)
    if (config.kind == k) return;
  throw ValidationError("strategy-protocol", std::string(who) + " does not support this protocol");
}

}  // namespace detail

/// Faithful committer: modulates and places the anonymous qubits, opens the
/// committed bit at the true positions.
class HonestAdam : public AdamStrategy {
 public:
  std::string id() const override { return "honest"; }

  CommitMessage commit(const ProtocolConfig& config, int intentBit,
                       const std::vector<Ket>& anonymous, RngStream& rng) override {
    CommitMessage msg;
    positions_.clear();
    Mat u1 = circle_rotation(config.circle, M_PI);
    auto modulated = [&](const Ket& psi) { return intentBit == 0 ? psi : psi.applied(u1); };
    switch (config.kind) {
      case ProtocolKind::QBCp3m:
      case ProtocolKind::QBCp3u: {
        int pos = static_cast<int>(rng.below(static_cast<std::size_t>(config.n))) + 1;
        positions_ = {pos};
        msg.groups.push_back({modulated(anonymous[0]), {pos}, 0});
        if (config.kind == ProtocolKind::QBCp3u) {
          decoyAngles_.assign(config.n + 1, -1.0);
          for (int p = 1; p <= config.n; ++p) {
            if (p == pos) continue;
            double angle = rng.coin() ? M_PI : 0.0;  // two orthogonal decoy states
            decoyAngles_[p] = angle;
            msg.groups.push_back({circle_state(config.circle, angle), {p}, 0});
          }
          return msg;
        }
        break;
      }
      case ProtocolKind::QBC3m1: {
        int qumode = static_cast<int>(rng.below(static_cast<std::size_t>(config.N))) + 1;
        positions_ = {qumode};
        for (int j = 0; j < config.m; ++j)
          msg.groups.push_back({modulated(anonymous[j]), {(qumode - 1) * config.m + j + 1}, 0});
        std::vector<int> taken;
        for (int j = 0; j < config.m; ++j) taken.push_back((qumode - 1) * config.m + j + 1);
        detail::fill_decoys(msg, config, taken, rng);
        return msg;
      }
      case ProtocolKind::QBC3m2: {
        for (int j = 0; j < config.m; ++j) {
          int p = j * config.N + static_cast<int>(rng.below(static_cast<std::size_t>(config.N))) + 1;
          positions_.push_back(p);
          msg.groups.push_back({modulated(anonymous[j]), {p}, 0});
        }
        detail::fill_decoys(msg, config, positions_, rng);
        return msg;
      }
    }
    detail::fill_decoys(msg, config, positions_, rng);
    return msg;
  }

  OpenMessage open(const ProtocolConfig& config, int openBit, const PostCommitView&,
                   RngStream& rng) override {
    OpenMessage msg;
    msg.positions = positions_;
    msg.bit = openBit < 0 ? static_cast<int>(rng.coin()) : openBit;
    if (config.kind == ProtocolKind::QBCp3u) {
      for (int p = 1; p <= config.n; ++p)
        msg.claimedStates.push_back(
            circle_state(config.circle, decoyAngles_[p] < 0 ? 0.0 : decoyAngles_[p]));
    }
    return msg;
  }

 private:
  std::vector<int> positions_;
  std::vector<double> decoyAngles_;
};

/// Measures the anonymous qubit in a fixed (or coin-flipped) circle basis and
/// places the two conjugate candidates, postponing the bit choice.
class MeasureResendAdam : public AdamStrategy {
 public:
  explicit MeasureResendAdam(bool randomBasis = false) : randomBasis_(randomBasis) {}

  std::string id() const override { return "measure-resend"; }

  CommitMessage commit(const ProtocolConfig& config, int /*intentBit*/,
                       const std::vector<Ket>& anonymous, RngStream& rng) override {
    detail::require_kind(config, {ProtocolKind::QBCp3m}, "measure-resend");
    double base = randomBasis_ && rng.coin() ? M_PI / 2 : 0.0;
    MeasurementBasis basis({circle_state(config.circle, base),
                            circle_state(config.circle, base + M_PI)});
    std::size_t k = measure_sample(anonymous[0], basis, rng);
    Ket chi = basis.vector(k);
    auto pos = detail::distinct_positions(2, config.n, rng);
    candidate_ = pos;
    CommitMessage msg;
    msg.groups.push_back({chi, {pos[0]}, 0});
    msg.groups.push_back({rotate(config.circle, M_PI, chi), {pos[1]}, 0});
    detail::fill_decoys(msg, config, pos, rng);
    return msg;
  }

  OpenMessage open(const ProtocolConfig&, int openBit, const PostCommitView&,
                   RngStream& rng) override {
    int bit = openBit < 0 ? static_cast<int>(rng.coin()) : openBit;
    return {{candidate_[bit]}, bit, {}};
  }

 private:
  bool randomBasis_;
  std::vector<int> candidate_;
};

/// Keeps a register entangled with the modulated qubit; the receiver's
/// commit-time measurement fixes the register, which the committer can read
/// before opening but cannot steer.
class EntangleDelayAdam : public AdamStrategy {
 public:
  explicit EntangleDelayAdam(double lambda0 = M_SQRT1_2) : lambda0_(lambda0) {
    if (lambda0 <= 0.0 || lambda0 >= 1.0)
      throw ValidationError("strategy-params", "lambda0 must be in (0,1)");
  }

  std::string id() const override { return "entangle-delay"; }

  CommitMessage commit(const ProtocolConfig& config, int /*intentBit*/,
                       const std::vector<Ket>& anonymous, RngStream& rng) override {
    detail::require_kind(config, {ProtocolKind::QBCp3m}, "entangle-delay");
    const Vec& psi = anonymous[0].amplitudes();
    Vec rot = circle_rotation(config.circle, M_PI) * psi;
    double l1 = std::sqrt(1.0 - lambda0_ * lambda0_);
    Vec joint = Vec::Zero(4);
    // sent qubit first, register second: l0 (U0 psi)|0> + l1 (U1 psi)|1>
    joint(0) = lambda0_ * psi(0);
    joint(2) = lambda0_ * psi(1);
    joint(1) = l1 * rot(0);
    joint(3) = l1 * rot(1);
    pos_ = static_cast<int>(rng.below(static_cast<std::size_t>(config.n))) + 1;
    CommitMessage msg;
    msg.groups.push_back({Ket(joint, {2, 2}), {pos_}, 1});
    detail::fill_decoys(msg, config, {pos_}, rng);
    return msg;
  }

  OpenMessage open(const ProtocolConfig&, int openBit, const PostCommitView& view,
                   RngStream& rng) override {
    if (openBit >= 0) return {{pos_}, openBit, {}};
    // adaptive: read the collapsed register to learn the receiver's outcome
    if (!view.registerStates[0]) throw ValidationError("strategy-protocol");
    std::size_t k = measure_sample(*view.registerStates[0], MeasurementBasis::computational(2), rng);
    return {{pos_}, static_cast<int>(k), {}};
  }

 private:
  double lambda0_;
  int pos_ = 1;
};

/// Sends the anonymous qubit untouched at one position and a guessed
/// orthogonal partner at another.
class SplitPairAdam : public AdamStrategy {
 public:
  std::string id() const override { return "split-pair"; }

  CommitMessage commit(const ProtocolConfig& config, int /*intentBit*/,
                       const std::vector<Ket>& anonymous, RngStream& rng) override {
    detail::require_kind(config, {ProtocolKind::QBCp3m}, "split-pair");
    auto pos = detail::distinct_positions(2, config.n, rng);
    candidate_ = pos;
    Ket guess = circle_state(config.circle, rng.uniform(0.0, 2 * M_PI));
    CommitMessage msg;
    msg.groups.push_back({anonymous[0], {pos[0]}, 0});
    msg.groups.push_back({rotate(config.circle, M_PI, guess), {pos[1]}, 0});
    detail::fill_decoys(msg, config, pos, rng);
    return msg;
  }

  OpenMessage open(const ProtocolConfig&, int openBit, const PostCommitView&,
                   RngStream& rng) override {
    int bit = openBit < 0 ? static_cast<int>(rng.coin()) : openBit;
    return {{candidate_[bit]}, bit, {}};
  }

 private:
  std::vector<int> candidate_;
};

/// Applies a numerically found one-to-two cloning isometry and places the two
/// (generally entangled) clones at separate positions.
class NumericClonerAdam : public AdamStrategy {
 public:
  explicit NumericClonerAdam(std::shared_ptr<const Mat> isometry) : isometry_(std::move(isometry)) {
    if (!isometry_ || isometry_->rows() != 4 || isometry_->cols() != 2)
      throw ValidationError("strategy-params", "cloner needs a 4x2 isometry");
  }

  std::string id() const override { return "numeric-cloner"; }

  CommitMessage commit(const ProtocolConfig& config, int /*intentBit*/,
                       const std::vector<Ket>& anonymous, RngStream& rng) override {
    detail::require_kind(config, {ProtocolKind::QBCp3m}, "numeric-cloner");
    Vec out = (*isometry_) * anonymous[0].amplitudes();
    auto pos = detail::distinct_positions(2, config.n, rng);
    candidate_ = pos;
    CommitMessage msg;
    msg.groups.push_back({Ket(out / out.norm(), {2, 2}), {pos[0], pos[1]}, 0});
    detail::fill_decoys(msg, config, pos, rng);
    return msg;
  }

  OpenMessage open(const ProtocolConfig&, int openBit, const PostCommitView&,
                   RngStream& rng) override {
    int bit = openBit < 0 ? static_cast<int>(rng.coin()) : openBit;
    return {{candidate_[bit]}, bit, {}};
  }

 private:
  std::shared_ptr<const Mat> isometry_;
  std::vector<int> candidate_;
};

// ---------------------------------------------------------------------------
// registry

/// Per-episode strategy factory. Resolving an id performs any one-time setup
/// (e.g. the cloner's channel search); the returned factory is then cheap to
/// call once per trial.
using AdamFactory = std::function<std::unique_ptr<AdamStrategy>()>;
using BabeFactory = std::function<std::unique_ptr<BabeStrategy>()>;

inline AdamFactory resolve_adam_strategy(const std::string& strategyId, const Json& params,
                                         const ProtocolConfig& config) {
  auto get = [&](const char* key, double fallback) {
    return params.contains(key) ? params.at(key).get<double>() : fallback;
  };
  if (strategyId == "honest") return [] { return std::make_unique<HonestAdam>(); };
  if (strategyId == "measure-resend") {
    bool randomBasis = params.contains("randomBasis") && params.at("randomBasis").get<bool>();
    return [randomBasis] { return std::make_unique<MeasureResendAdam>(randomBasis); };
  }
  if (strategyId == "entangle-delay") {
    double l0 = get("lambda0", M_SQRT1_2);
    return [l0] { return std::make_unique<EntangleDelayAdam>(l0); };
  }
  if (strategyId == "split-pair") return [] { return std::make_unique<SplitPairAdam>(); };
  if (strategyId == "numeric-cloner") {
    auto budget = static_cast<int>(get("searchBudget", 20000));
    auto seed = static_cast<std::uint64_t>(get("searchSeed", 0x636c6f6e65ull));
    std::vector<Ket> psiSet = config.babeStateSet == StateSet::BB84
                                  ? bb84_states(config.circle)
                                  : circle_discretization(config.circle, 24);
    RngStream rng(seed);
    ClonerSearchResult found =
        cloner_channel_search(psiSet, circle_rotation(config.circle, M_PI), budget, rng);
    auto iso = std::make_shared<const Mat>(found.isometry);
    return [iso] { return std::make_unique<NumericClonerAdam>(iso); };
  }
  throw ValidationError("unknown-strategy", "no committer strategy named " + strategyId);
}

inline BabeFactory resolve_babe_strategy(const std::string& strategyId, const Json& /*params*/,
                                         const ProtocolConfig& /*config*/) {
  if (strategyId == "honest") return [] { return std::make_unique<HonestBabe>(); };
  throw ValidationError("unknown-strategy", "no receiver strategy named " + strategyId);
}

inline OpenPolicy open_policy_from_params(const Json& params) {
  OpenPolicy policy;
  std::string mode = params.contains("openMode") ? params.at("openMode").get<std::string>() : "same";
  if (mode == "same") policy.mode = OpenMode::same;
  else if (mode == "other") policy.mode = OpenMode::other;
  else if (mode == "fixed") policy.mode = OpenMode::fixedBit;
  else if (mode == "adaptive") policy.mode = OpenMode::adaptive;
  else if (mode == "random") policy.mode = OpenMode::randomBit;
  else throw ValidationError("open-mode", "unknown open mode " + mode);
  if (params.contains("bit")) policy.fixedBit = params.at("bit").get<int>();
  return policy;
}

}  // namespace qbc
