#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbc/closed_form.hpp"
#include "qbc/qcore.hpp"

namespace qbc {

using Json = nlohmann::json;

enum class ProtocolKind { QBCp3m, QBCp3u, QBC3m1, QBC3m2 };
enum class StateSet { greatCircle, BB84 };
enum class DecoySet { uniformSphere, greatCircle, BB84, twoOrthogonal };

struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::QBCp3m;
  int n = 3;  // qubits per sequence (QBCp3m / QBCp3u)
  int m = 1;  // anonymous qubits (QBC3m1 / QBC3m2)
  int N = 2;  // segments / segment length (QBC3m1 / QBC3m2)
  StateSet babeStateSet = StateSet::greatCircle;
  DecoySet decoySet = DecoySet::greatCircle;
  GreatCircle circle = GreatCircle::standard();

  void validate() const {
    switch (kind) {
      case ProtocolKind::QBCp3m:
      case ProtocolKind::QBCp3u:
        if (n < 1) throw ValidationError("config-n", "need n >= 1");
        break;
      case ProtocolKind::QBC3m1:
      case ProtocolKind::QBC3m2:
        if (m < 1 || m % 2 == 0) throw ValidationError("config-m", "need odd m >= 1");
        if (N < 2) throw ValidationError("config-N", "need N >= 2");
        break;
    }
  }

  /// Total wire qubits from committer to receiver.
  int wire_qubits() const {
    switch (kind) {
      case ProtocolKind::QBCp3m:
      case ProtocolKind::QBCp3u:
        return n;
      default:
        return m * N;
    }
  }

  /// Anonymous qubits from receiver to committer.
  int anonymous_qubits() const {
    return (kind == ProtocolKind::QBC3m1 || kind == ProtocolKind::QBC3m2) ? m : 1;
  }
};

/// Committer's secret placement record.
struct Commitment {
  std::vector<int> positions;  // 1-based
  int bit = 0;

  void validate(int wireCount) const {
    std::vector<int> seen;
    for (int p : positions) {
      if (p < 1 || p > wireCount) throw ValidationError("commitment-position");
      for (int s : seen)
        if (s == p) throw ValidationError("commitment-position", "positions must be distinct");
      seen.push_back(p);
    }
  }
};

enum class Phase { fresh, committed, opened, verified };

struct Message {
  std::string sender;
  std::string kind;
  Json payload;
};

struct Transcript {
  std::vector<Message> messages;
  Phase phase = Phase::fresh;
  std::vector<int> babeOutcomes;  // commit-time outcomes, wire order (may be empty)
  std::vector<int> openedPositions;
  int openedBit = -1;
  std::optional<bool> verdict;
};

// ---------------------------------------------------------------------------
// strategy interfaces

/// One group of wire qubits sharing a joint state. The first positions.size()
/// subsystems go on the wire (in listed order); any trailing subsystems are
/// registers the committer keeps.
struct WireGroup {
  Ket joint;
  std::vector<int> positions;
  int registers = 0;

  int subsystems() const { return static_cast<int>(joint.dims().size()); }
};

struct CommitMessage {
  std::vector<WireGroup> groups;
};

/// What the committer can see after the receiver's commit-time measurement:
/// the collapsed state of each group's kept registers.
struct PostCommitView {
  std::vector<std::optional<Ket>> registerStates;  // one entry per group
};

struct OpenMessage {
  std::vector<int> positions;
  int bit = 0;
  std::vector<Ket> claimedStates;  // QBCp3u: claimed state per wire position
};

class AdamStrategy {
 public:
  virtual ~AdamStrategy() = default;
  virtual std::string id() const = 0;
  virtual CommitMessage commit(const ProtocolConfig& config, int intentBit,
                               const std::vector<Ket>& anonymous, RngStream& rng) = 0;
  /// openBit < 0 means the strategy decides the bit itself (adaptive mode).
  virtual OpenMessage open(const ProtocolConfig& config, int openBit, const PostCommitView& view,
                           RngStream& rng) = 0;
};

class BabeStrategy {
 public:
  virtual ~BabeStrategy() = default;
  virtual std::string id() const = 0;
  virtual std::vector<Ket> prepare(const ProtocolConfig& config, RngStream& rng) = 0;
};

inline Ket sample_state(StateSet set, const GreatCircle& circle, RngStream& rng) {
  if (set == StateSet::BB84) {
    static const double angles[4] = {0.0, M_PI, M_PI / 2, 3 * M_PI / 2};
    return circle_state(circle, angles[rng.below(4)]);
  }
  return circle_state(circle, rng.uniform(0.0, 2 * M_PI));
}

inline Ket sample_decoy(DecoySet set, const GreatCircle& circle, RngStream& rng) {
  switch (set) {
    case DecoySet::uniformSphere: {
      double z = 2.0 * rng.uniform() - 1.0;
      double phi = rng.uniform(0.0, 2 * M_PI);
      double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      return bloch_to_ket({s * std::cos(phi), s * std::sin(phi), z});
    }
    case DecoySet::BB84: {
      static const double angles[4] = {0.0, M_PI, M_PI / 2, 3 * M_PI / 2};
      return circle_state(circle, angles[rng.below(4)]);
    }
    case DecoySet::twoOrthogonal:
      return circle_state(circle, rng.coin() ? M_PI : 0.0);
    case DecoySet::greatCircle:
    default:
      return circle_state(circle, rng.uniform(0.0, 2 * M_PI));
  }
}

// ---------------------------------------------------------------------------
// sequential measurement of a wire group

namespace detail {

inline Vec contract_axis(const Vec& amp, const std::vector<int>& dims, int axis, const Vec& bra) {
  std::size_t pre = 1, post = 1;
  for (int i = 0; i < axis; ++i) pre *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) post *= dims[i];
  std::size_t d = dims[axis];
  Vec out = Vec::Zero(static_cast<Eigen::Index>(pre * post));
  for (std::size_t a = 0; a < pre; ++a)
    for (std::size_t x = 0; x < d; ++x) {
      Cx w = std::conj(bra(static_cast<Eigen::Index>(x)));
      if (w == Cx(0, 0)) continue;
      for (std::size_t b = 0; b < post; ++b)
        out(static_cast<Eigen::Index>(a * post + b)) +=
            w * amp(static_cast<Eigen::Index>((a * d + x) * post + b));
    }
  return out;
}

/// Holds a group's state during sequential measurement; measured subsystems
/// are contracted away.
class GroupState {
 public:
  explicit GroupState(const WireGroup& g) : amp_(g.joint.amplitudes()), dims_(g.joint.dims()) {}

  /// Measures original subsystem `sys` in `basis`; returns the outcome.
  std::size_t measure(int sys, const MeasurementBasis& basis, RngStream& rng) {
    int axis = current_axis(sys);
    std::vector<double> probs(basis.size());
    std::vector<Vec> branches(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) {
      branches[k] = contract_axis(amp_, dims_, axis, basis.vector(k).amplitudes());
      probs[k] = branches[k].squaredNorm();
    }
    std::size_t k = sample_discrete(probs, rng);
    amp_ = branches[k] / std::sqrt(probs[k]);
    remove_axis(sys, axis);
    return k;
  }

  /// Projects original subsystem `sys` onto `target`; samples pass/fail.
  bool project(int sys, const Ket& target, RngStream& rng) {
    int axis = current_axis(sys);
    Vec branch = contract_axis(amp_, dims_, axis, target.amplitudes());
    double p = branch.squaredNorm();
    bool pass = rng.uniform() < p;
    if (pass) {
      amp_ = branch / std::sqrt(p);
      remove_axis(sys, axis);
    }
    return pass;
  }

  /// State of the unmeasured remainder (the committer's registers).
  std::optional<Ket> remainder() const {
    if (dims_.empty()) return std::nullopt;
    return Ket(amp_ / amp_.norm(), dims_);
  }

 private:
  int current_axis(int sys) const {
    int axis = sys;
    for (int seen : measured_)
      if (seen < sys) --axis;
    return axis;
  }
  void remove_axis(int sys, int axis) {
    dims_.erase(dims_.begin() + axis);
    measured_.push_back(sys);
  }

  Vec amp_;
  std::vector<int> dims_;
  std::vector<int> measured_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// the three-phase session

struct EpisodeAnnotations {
  int intentBit = 0;
  int openedBit = -1;
  bool accepted = false;
  std::optional<int> babeGuess;
};

/// Executes commit / open / verify in order, enforcing the phase discipline.
/// For the measure-before-open protocols the receiver measures at commit time
/// and verification is a classical comparison; for QBCp3u verification is
/// projective at open time.
class ProtocolSession {
 public:
  explicit ProtocolSession(ProtocolConfig config) : config_(std::move(config)) {
    config_.validate();
  }

  const Transcript& transcript() const { return transcript_; }
  const EpisodeAnnotations& annotations() const { return annotations_; }

  void commit(AdamStrategy& adam, BabeStrategy& babe, int intentBit, RngStream& rng) {
    require_phase(Phase::fresh, "commit");
    annotations_.intentBit = intentBit;
    anonymous_ = babe.prepare(config_, rng);
    if (static_cast<int>(anonymous_.size()) != config_.anonymous_qubits())
      throw ValidationError("anonymous-count");
    transcript_.messages.push_back(
        {"babe", "anonymous-qubits", Json{{"count", anonymous_.size()}}});

    commitMsg_ = adam.commit(config_, intentBit, anonymous_, rng);
    validate_commit_message();
    transcript_.messages.push_back(
        {"adam", "qubit-sequence", Json{{"count", config_.wire_qubits()}}});

    groupStates_.clear();
    for (const auto& g : commitMsg_.groups) groupStates_.emplace_back(g);

    if (config_.kind != ProtocolKind::QBCp3u) {
      measure_all(rng);
      transcript_.messages.push_back(
          {"babe", "measured", Json{{"outcomes", transcript_.babeOutcomes}}});
    }
    transcript_.phase = Phase::committed;
  }

  void open(AdamStrategy& adam, int openBit, RngStream& rng) {
    require_phase(Phase::committed, "open");
    PostCommitView view;
    if (config_.kind != ProtocolKind::QBCp3u)
      for (auto& gs : groupStates_) view.registerStates.push_back(gs.remainder());
    else
      view.registerStates.assign(groupStates_.size(), std::nullopt);

    openMsg_ = adam.open(config_, openBit, view, rng);
    annotations_.openedBit = openMsg_.bit;
    transcript_.openedPositions = openMsg_.positions;
    transcript_.openedBit = openMsg_.bit;
    Json payload{{"positions", openMsg_.positions}, {"bit", openMsg_.bit}};
    if (!openMsg_.claimedStates.empty())
      payload["claims"] = static_cast<int>(openMsg_.claimedStates.size());
    transcript_.messages.push_back({"adam", "open", std::move(payload)});
    transcript_.phase = Phase::opened;
  }

  bool verify(RngStream& rng) {
    require_phase(Phase::opened, "verify");
    if (transcript_.verdict.has_value())
      throw ValidationError("verdict-once", "verdict already recorded");
    bool accept = check_opening(rng);
    transcript_.verdict = accept;
    annotations_.accepted = accept;
    transcript_.messages.push_back({"babe", "verdict", Json{{"accept", accept}}});
    transcript_.phase = Phase::verified;
    return accept;
  }

  /// Receiver's early guess from her commit-time outcomes (majority votes).
  std::optional<int> majority_guess(RngStream& rng) const {
    const auto& out = transcript_.babeOutcomes;
    if (out.empty()) return std::nullopt;
    auto vote = [&](int from, int count) {
      int ones = 0;
      for (int i = 0; i < count; ++i) ones += out[from + i];
      if (2 * ones == count) return -1;
      return 2 * ones > count ? 1 : 0;
    };
    switch (config_.kind) {
      case ProtocolKind::QBCp3m: {
        int v = vote(0, config_.n);
        return v >= 0 ? v : static_cast<int>(rng.coin());
      }
      case ProtocolKind::QBC3m1: {
        // per-qumode patterns: unanimous qumodes vote, others abstain
        int votes[2] = {0, 0};
        for (int l = 0; l < config_.N; ++l) {
          int ones = 0;
          for (int j = 0; j < config_.m; ++j) ones += out[l * config_.m + j];
          if (ones == 0) ++votes[0];
          if (ones == config_.m) ++votes[1];
        }
        if (votes[0] == votes[1]) return static_cast<int>(rng.coin());
        return votes[1] > votes[0] ? 1 : 0;
      }
      case ProtocolKind::QBC3m2: {
        int ones = 0;
        for (int j = 0; j < config_.m; ++j) {
          int v = vote(j * config_.N, config_.N);
          if (v < 0) v = static_cast<int>(rng.coin());
          ones += v;
        }
        return 2 * ones > config_.m ? 1 : 0;
      }
      default:
        return std::nullopt;
    }
  }

  const std::vector<Ket>& anonymous_states() const { return anonymous_; }

 private:
  void require_phase(Phase expected, const char* step) const {
    if (transcript_.phase != expected)
      throw ValidationError("protocol-order", std::string("unexpected ") + step);
  }

  void validate_commit_message() const {
    int wires = config_.wire_qubits();
    std::vector<bool> covered(wires, false);
    for (const auto& g : commitMsg_.groups) {
      if (g.subsystems() != static_cast<int>(g.positions.size()) + g.registers)
        throw ValidationError("wire-group", "subsystem count mismatch");
      for (int d : g.joint.dims())
        if (d != 2) throw ValidationError("wire-group", "wire subsystems must be qubits");
      for (int p : g.positions) {
        if (p < 1 || p > wires || covered[p - 1])
          throw ValidationError("wire-group", "positions must cover the wire exactly once");
        covered[p - 1] = true;
      }
    }
    for (bool c : covered)
      if (!c) throw ValidationError("wire-group", "positions must cover the wire exactly once");
  }

  MeasurementBasis basis_for_position(int pos) const {
    switch (config_.kind) {
      case ProtocolKind::QBCp3m:
        return MeasurementBasis::conjugate_pair(config_.circle, anonymous_[0]);
      case ProtocolKind::QBC3m1: {
        int j = (pos - 1) % config_.m;
        return MeasurementBasis::conjugate_pair(config_.circle, anonymous_[j]);
      }
      case ProtocolKind::QBC3m2: {
        int j = (pos - 1) / config_.N;
        return MeasurementBasis::conjugate_pair(config_.circle, anonymous_[j]);
      }
      default:
        throw ValidationError("protocol-order", "no commit-time measurement in this protocol");
    }
  }

  void measure_all(RngStream& rng) {
    int wires = config_.wire_qubits();
    transcript_.babeOutcomes.assign(wires, -1);
    // wire order; groups own scattered positions, collapse is sequential
    std::vector<std::pair<int, int>> where(wires);  // position -> (group, subsystem)
    for (std::size_t g = 0; g < commitMsg_.groups.size(); ++g)
      for (std::size_t s = 0; s < commitMsg_.groups[g].positions.size(); ++s)
        where[commitMsg_.groups[g].positions[s] - 1] = {static_cast<int>(g), static_cast<int>(s)};
    for (int pos = 1; pos <= wires; ++pos) {
      auto [g, s] = where[pos - 1];
      transcript_.babeOutcomes[pos - 1] =
          static_cast<int>(groupStates_[g].measure(s, basis_for_position(pos), rng));
    }
  }

  bool check_opening(RngStream& rng) {
    int wires = config_.wire_qubits();
    const auto& pos = openMsg_.positions;
    if (openMsg_.bit != 0 && openMsg_.bit != 1) return false;
    for (int p : pos)
      if (p < 1 || p > wires) return false;

    switch (config_.kind) {
      case ProtocolKind::QBCp3m:
        if (pos.size() != 1) return false;
        return transcript_.babeOutcomes[pos[0] - 1] == openMsg_.bit;
      case ProtocolKind::QBC3m1: {
        if (pos.size() != 1) return false;  // opened qumode index
        int l = pos[0];
        if (l < 1 || l > config_.N) return false;
        for (int j = 0; j < config_.m; ++j)
          if (transcript_.babeOutcomes[(l - 1) * config_.m + j] != openMsg_.bit) return false;
        return true;
      }
      case ProtocolKind::QBC3m2: {
        if (static_cast<int>(pos.size()) != config_.m) return false;
        for (int j = 0; j < config_.m; ++j) {
          int p = pos[j];
          if (p < (j * config_.N) + 1 || p > (j + 1) * config_.N) return false;
          if (transcript_.babeOutcomes[p - 1] != openMsg_.bit) return false;
        }
        return true;
      }
      case ProtocolKind::QBCp3u: {
        if (pos.size() != 1) return false;
        if (static_cast<int>(openMsg_.claimedStates.size()) != wires) return false;
        int info = pos[0];
        std::vector<std::pair<int, int>> where(wires);
        for (std::size_t g = 0; g < commitMsg_.groups.size(); ++g)
          for (std::size_t s = 0; s < commitMsg_.groups[g].positions.size(); ++s)
            where[commitMsg_.groups[g].positions[s] - 1] = {static_cast<int>(g),
                                                            static_cast<int>(s)};
        Ket expectInfo = openMsg_.bit == 0 ? anonymous_[0]
                                           : rotate(config_.circle, M_PI, anonymous_[0]);
        for (int p = 1; p <= wires; ++p) {
          const Ket& target = (p == info) ? expectInfo : openMsg_.claimedStates[p - 1];
          auto [g, s] = where[p - 1];
          if (!groupStates_[g].project(s, target, rng)) return false;
        }
        return true;
      }
    }
    return false;
  }

  ProtocolConfig config_;
  Transcript transcript_;
  EpisodeAnnotations annotations_;
  std::vector<Ket> anonymous_;
  CommitMessage commitMsg_;
  OpenMessage openMsg_;
  std::vector<detail::GroupState> groupStates_;
};

/// Convenience wrapper: run all three phases with the episode's open policy.
struct EpisodeResult {
  Transcript transcript;
  EpisodeAnnotations annotations;
};

enum class OpenMode { same, other, fixedBit, adaptive, randomBit };

struct OpenPolicy {
  OpenMode mode = OpenMode::same;
  int fixedBit = 0;
};

inline EpisodeResult run_episode(const ProtocolConfig& config, AdamStrategy& adam,
                                 BabeStrategy& babe, const OpenPolicy& policy, RngStream& rng) {
  ProtocolSession session(config);
  int intent = static_cast<int>(rng.coin());
  session.commit(adam, babe, intent, rng);
  int openBit = -1;
  switch (policy.mode) {
    case OpenMode::same: openBit = intent; break;
    case OpenMode::other: openBit = 1 - intent; break;
    case OpenMode::fixedBit: openBit = policy.fixedBit; break;
    case OpenMode::randomBit: openBit = static_cast<int>(rng.coin()); break;
    case OpenMode::adaptive: openBit = -1; break;
  }
  session.open(adam, openBit, rng);
  session.verify(rng);
  EpisodeResult res{session.transcript(), session.annotations()};
  res.annotations.babeGuess = session.majority_guess(rng);
  return res;
}

}  // namespace qbc
