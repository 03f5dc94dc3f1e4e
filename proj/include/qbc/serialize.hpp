#pragma once

#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qbc/cheat.hpp"
#include "qbc/harness.hpp"
#include "qbc/protocols.hpp"

// JSON wire formats. States are arrays of [re, im] pairs; matrices are
// row-major arrays of such rows; probabilities are plain decimals. Config
// objects reject unknown fields.

namespace qbc {

namespace detail {

inline void expect_keys(const Json& j, const std::set<std::string>& required,
                        const std::set<std::string>& optional, const char* what) {
  if (!j.is_object()) throw ParseError(std::string(what) + ": expected an object");
  for (const auto& key : required)
    if (!j.contains(key)) throw ParseError(std::string(what) + ": missing field " + key);
  for (const auto& [key, value] : j.items())
    if (!required.count(key) && !optional.count(key))
      throw ParseError(std::string(what) + ": unknown field " + key);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// complex vectors and matrices

inline Json complex_to_json(const Cx& z) { return Json::array({z.real(), z.imag()}); }

inline Cx complex_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("complex number: expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

inline Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("vector: expected an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i]);
  return v;
}

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("matrix: expected a nonempty array of rows");
  auto rows = static_cast<Eigen::Index>(j.size());
  auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw ParseError("matrix: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = complex_from_json(j[r][c]);
  }
  return m;
}

inline Json ket_to_json(const Ket& k) {
  return Json{{"amplitudes", vec_to_json(k.amplitudes())}, {"dims", k.dims()}};
}

inline Ket ket_from_json(const Json& j) {
  detail::expect_keys(j, {"amplitudes"}, {"dims"}, "ket");
  std::vector<int> dims;
  if (j.contains("dims")) dims = j.at("dims").get<std::vector<int>>();
  return Ket(vec_from_json(j.at("amplitudes")), std::move(dims));
}

inline Json ensemble_to_json(const Ensemble& e) {
  Json states = Json::array();
  for (const Ket& s : e.states()) states.push_back(vec_to_json(s.amplitudes()));
  return Json{{"probs", e.probs()}, {"states", states}, {"dims", e.dims()}};
}

inline Ensemble ensemble_from_json(const Json& j) {
  detail::expect_keys(j, {"probs", "states"}, {"dims"}, "ensemble");
  auto probs = j.at("probs").get<std::vector<double>>();
  std::vector<int> dims;
  if (j.contains("dims")) dims = j.at("dims").get<std::vector<int>>();
  std::vector<Ket> states;
  for (const auto& s : j.at("states")) states.emplace_back(vec_from_json(s), dims);
  return Ensemble(std::move(probs), std::move(states));
}

inline Json weighted_ops_to_json(const WeightedOps& ops) {
  Json out = Json::array();
  for (const auto& [p, u] : ops) out.push_back(Json{{"prob", p}, {"op", mat_to_json(u)}});
  return out;
}

inline WeightedOps weighted_ops_from_json(const Json& j) {
  WeightedOps ops;
  for (const auto& item : j) {
    detail::expect_keys(item, {"prob", "op"}, {}, "weighted op");
    ops.emplace_back(item.at("prob").get<double>(), mat_from_json(item.at("op")));
  }
  return ops;
}

// ---------------------------------------------------------------------------
// protocol configuration

inline std::string to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::QBCp3m: return "QBCp3m";
    case ProtocolKind::QBCp3u: return "QBCp3u";
    case ProtocolKind::QBC3m1: return "QBC3m1";
    case ProtocolKind::QBC3m2: return "QBC3m2";
  }
  return "?";
}

inline ProtocolKind protocol_kind_from_string(const std::string& s) {
  if (s == "QBCp3m") return ProtocolKind::QBCp3m;
  if (s == "QBCp3u") return ProtocolKind::QBCp3u;
  if (s == "QBC3m1") return ProtocolKind::QBC3m1;
  if (s == "QBC3m2") return ProtocolKind::QBC3m2;
  throw ParseError("unknown protocol kind " + s);
}

inline std::string to_string(StateSet s) {
  return s == StateSet::BB84 ? "BB84" : "greatCircle";
}

inline StateSet state_set_from_string(const std::string& s) {
  if (s == "BB84") return StateSet::BB84;
  if (s == "greatCircle") return StateSet::greatCircle;
  throw ParseError("unknown state set " + s);
}

inline std::string to_string(DecoySet s) {
  switch (s) {
    case DecoySet::uniformSphere: return "uniformSphere";
    case DecoySet::greatCircle: return "greatCircle";
    case DecoySet::BB84: return "BB84";
    case DecoySet::twoOrthogonal: return "twoOrthogonal";
  }
  return "?";
}

inline DecoySet decoy_set_from_string(const std::string& s) {
  if (s == "uniformSphere") return DecoySet::uniformSphere;
  if (s == "greatCircle") return DecoySet::greatCircle;
  if (s == "BB84") return DecoySet::BB84;
  if (s == "twoOrthogonal") return DecoySet::twoOrthogonal;
  throw ParseError("unknown decoy set " + s);
}

inline Json circle_to_json(const GreatCircle& c) {
  return Json{{"axis", {c.axis.x(), c.axis.y(), c.axis.z()}}, {"phaseOrigin", c.phase_origin}};
}

inline GreatCircle circle_from_json(const Json& j) {
  detail::expect_keys(j, {"axis"}, {"phaseOrigin"}, "circle");
  auto ax = j.at("axis").get<std::vector<double>>();
  if (ax.size() != 3) throw ParseError("circle: axis must have 3 components");
  double origin = j.contains("phaseOrigin") ? j.at("phaseOrigin").get<double>() : 0.0;
  return GreatCircle(Eigen::Vector3d(ax[0], ax[1], ax[2]), origin);
}

inline Json config_to_json(const ProtocolConfig& c) {
  return Json{{"kind", to_string(c.kind)},         {"n", c.n},
              {"m", c.m},                          {"N", c.N},
              {"babeStateSet", to_string(c.babeStateSet)},
              {"decoySet", to_string(c.decoySet)}, {"circle", circle_to_json(c.circle)}};
}

inline ProtocolConfig config_from_json(const Json& j) {
  detail::expect_keys(j, {"kind"}, {"n", "m", "N", "babeStateSet", "decoySet", "circle"},
                      "protocol config");
  ProtocolConfig c;
  c.kind = protocol_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("m")) c.m = j.at("m").get<int>();
  if (j.contains("N")) c.N = j.at("N").get<int>();
  if (j.contains("babeStateSet"))
    c.babeStateSet = state_set_from_string(j.at("babeStateSet").get<std::string>());
  if (j.contains("decoySet")) c.decoySet = decoy_set_from_string(j.at("decoySet").get<std::string>());
  if (j.contains("circle")) c.circle = circle_from_json(j.at("circle"));
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// experiment specs and reports

inline Json spec_to_json(const ExperimentSpec& s) {
  return Json{{"protocol", config_to_json(s.protocol)},
              {"adam", Json{{"id", s.adamId}, {"params", s.adamParams}}},
              {"babe", Json{{"id", s.babeId}, {"params", s.babeParams}}},
              {"trials", s.trials},
              {"seed", s.masterSeed},
              {"metrics", s.metrics}};
}

inline ExperimentSpec spec_from_json(const Json& j) {
  detail::expect_keys(j, {"protocol", "trials", "seed"}, {"adam", "babe", "metrics"},
                      "experiment spec");
  ExperimentSpec s;
  s.protocol = config_from_json(j.at("protocol"));
  if (j.contains("adam")) {
    detail::expect_keys(j.at("adam"), {"id"}, {"params"}, "adam strategy");
    s.adamId = j.at("adam").at("id").get<std::string>();
    if (j.at("adam").contains("params")) s.adamParams = j.at("adam").at("params");
  }
  if (j.contains("babe")) {
    detail::expect_keys(j.at("babe"), {"id"}, {"params"}, "babe strategy");
    s.babeId = j.at("babe").at("id").get<std::string>();
    if (j.at("babe").contains("params")) s.babeParams = j.at("babe").at("params");
  }
  s.trials = j.at("trials").get<std::uint64_t>();
  s.masterSeed = j.at("seed").get<std::uint64_t>();
  if (j.contains("metrics")) s.metrics = j.at("metrics").get<std::vector<std::string>>();
  s.validate();
  return s;
}

inline Json metric_stat_to_json(const MetricStat& s) {
  return Json{{"trials", s.trials}, {"count", s.count},   {"mean", s.mean},
              {"stderr", s.stdErr}, {"ciLow", s.ciLow},   {"ciHigh", s.ciHigh}};
}

inline Json report_to_json(const ExperimentReport& r) {
  Json estimates = Json::object(), predictions = Json::object(), agreement = Json::object();
  for (const auto& [name, stat] : r.estimates) estimates[name] = metric_stat_to_json(stat);
  for (const auto& [name, pred] : r.predictions)
    predictions[name] = Json{{"value", pred.value}, {"formula", pred.formula}};
  for (const auto& [name, z] : r.agreement) agreement[name] = z;
  return Json{{"spec", spec_to_json(r.spec)},
              {"estimates", estimates},
              {"predictions", predictions},
              {"agreement", agreement}};
}

inline std::string compact_params(const ExperimentSpec& s) {
  std::ostringstream out;
  switch (s.protocol.kind) {
    case ProtocolKind::QBCp3m:
    case ProtocolKind::QBCp3u:
      out << "n=" << s.protocol.n;
      break;
    default:
      out << "m=" << s.protocol.m << " N=" << s.protocol.N;
      break;
  }
  out << " adam=" << s.adamId << " trials=" << s.trials << " seed=" << s.masterSeed;
  return out.str();
}

/// Flat metric table. Columns: protocol,params,metric,estimate,stderr,prediction,z
inline std::string report_to_csv_rows(const ExperimentReport& r, bool header) {
  std::ostringstream out;
  out.precision(17);
  if (header) out << "protocol,params,metric,estimate,stderr,prediction,z\n";
  for (const auto& [name, stat] : r.estimates) {
    out << to_string(r.spec.protocol.kind) << "," << compact_params(r.spec) << "," << name << ","
        << stat.mean << "," << stat.stdErr << ",";
    auto pred = r.predictions.find(name);
    if (pred != r.predictions.end()) out << pred->second.value;
    out << ",";
    auto z = r.agreement.find(name);
    if (z != r.agreement.end()) out << z->second;
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// transcripts

inline Json transcript_to_json(const Transcript& t) {
  Json messages = Json::array();
  for (const auto& m : t.messages)
    messages.push_back(Json{{"sender", m.sender}, {"kind", m.kind}, {"payload", m.payload}});
  Json out{{"messages", messages},
           {"openedPositions", t.openedPositions},
           {"openedBit", t.openedBit},
           {"outcomes", t.babeOutcomes}};
  const char* phase = t.phase == Phase::fresh      ? "fresh"
                      : t.phase == Phase::committed ? "committed"
                      : t.phase == Phase::opened    ? "opened"
                                                    : "verified";
  out["phase"] = phase;
  if (t.verdict) out["verdict"] = *t.verdict ? "accept" : "reject";
  return out;
}

// ---------------------------------------------------------------------------
// cheat-solver reports

inline Json cheat_solution_to_json(const CheatSolution& s) {
  Json tilde = Json::array();
  for (const auto& [p, k] : s.tildeStates)
    tilde.push_back(Json{{"prob", p}, {"state", vec_to_json(k.amplitudes())}});
  return Json{{"lambda", mat_to_json(s.lambda)},
              {"absLambda", mat_to_json(s.absLambda)},
              {"cheatU", mat_to_json(s.cheatU)},
              {"cheatV", mat_to_json(s.cheatV)},
              {"fidelity", s.fid},
              {"pAc", s.pAc},
              {"diagSquaredSum", s.diagSquaredSum},
              {"orientation", s.orientation},
              {"lowerBoundOk", s.pAc >= s.fid * s.fid - 1e-9},
              {"tildeStates", tilde}};
}

// ---------------------------------------------------------------------------
// sweep checkpoints

inline constexpr const char* kCheckpointSchema = "qbc-sweep-checkpoint-v1";

inline Json checkpoint_to_json(const std::map<std::string, ExperimentReport>& completed) {
  Json reports = Json::object();
  for (const auto& [key, report] : completed) reports[key] = report_to_json(report);
  return Json{{"schema", kCheckpointSchema}, {"completed", reports}};
}

inline std::map<std::string, ExperimentReport> checkpoint_reports_from_json(const Json& j) {
  detail::expect_keys(j, {"schema", "completed"}, {}, "checkpoint");
  if (j.at("schema").get<std::string>() != kCheckpointSchema)
    throw ParseError("checkpoint: unsupported schema tag");
  std::map<std::string, ExperimentReport> out;
  for (const auto& [key, rep] : j.at("completed").items()) {
    ExperimentReport r;
    r.spec = spec_from_json(rep.at("spec"));
    for (const auto& [name, stat] : rep.at("estimates").items()) {
      MetricStat s;
      s.trials = stat.at("trials").get<std::uint64_t>();
      s.count = stat.at("count").get<std::uint64_t>();
      s.mean = stat.at("mean").get<double>();
      s.stdErr = stat.at("stderr").get<double>();
      s.ciLow = stat.at("ciLow").get<double>();
      s.ciHigh = stat.at("ciHigh").get<double>();
      r.estimates[name] = s;
    }
    for (const auto& [name, pred] : rep.at("predictions").items())
      r.predictions[name] = {pred.at("value").get<double>(), pred.at("formula").get<std::string>()};
    for (const auto& [name, z] : rep.at("agreement").items()) r.agreement[name] = z.get<double>();
    out[key] = std::move(r);
  }
  return out;
}

}  // namespace qbc
