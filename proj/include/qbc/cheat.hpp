#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qbc/qcore.hpp"

namespace qbc {

// ---------------------------------------------------------------------------
// ensembles and purifications

/// Weighted list of pure states on a common space.
class Ensemble {
 public:
  Ensemble(std::vector<double> probs, std::vector<Ket> states)
      : probs_(std::move(probs)), states_(std::move(states)) {
    if (probs_.empty() || probs_.size() != states_.size())
      throw ValidationError("ensemble-shape", "need one probability per state");
    double sum = 0.0;
    for (double p : probs_) {
      if (p <= 0.0 || p > 1.0 + kValidationTol)
        throw ValidationError("ensemble-prob", "probabilities must lie in (0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kValidationTol)
      throw ValidationError("ensemble-prob-sum", "probabilities must sum to 1");
    for (const Ket& s : states_)
      if (s.dims() != states_[0].dims())
        throw ValidationError("ensemble-dims", "states must share dims");
  }

  static Ensemble single(Ket state) { return Ensemble({1.0}, {std::move(state)}); }

  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<Ket>& states() const { return states_; }
  const std::vector<int>& dims() const { return states_[0].dims(); }
  Eigen::Index dim() const { return states_[0].size(); }

  DensityOp average() const {
    Mat m = Mat::Zero(dim(), dim());
    for (std::size_t i = 0; i < size(); ++i) m += probs_[i] * projector(states_[i].amplitudes());
    return DensityOp(std::move(m), dims());
  }

 private:
  std::vector<double> probs_;
  std::vector<Ket> states_;
};

/// Entangled commitment sum_i sqrt(p_i) |e_i>|phi_i> on H^A (x) H^B together
/// with the keep basis {|e_i>} the committer retains.
struct PurifiedCommitment {
  Ket phi;
  MeasurementBasis keepBasis;
};

inline PurifiedCommitment commit_purify(const Ensemble& e, const MeasurementBasis& keepBasis) {
  if (keepBasis.size() < e.size())
    throw ValidationError("basis-too-small", "keep basis needs one vector per ensemble entry");
  auto dimA = keepBasis.dim();
  auto dimB = e.dim();
  Vec v = Vec::Zero(dimA * dimB);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const Vec& ei = keepBasis.vector(i).amplitudes();
    const Vec& fi = e.states()[i].amplitudes();
    double w = std::sqrt(e.probs()[i]);
    for (Eigen::Index a = 0; a < dimA; ++a) v.segment(a * dimB, dimB) += w * ei(a) * fi;
  }
  std::vector<int> dims = keepBasis.vector(0).dims();
  dims.insert(dims.end(), e.dims().begin(), e.dims().end());
  return {Ket(v / v.norm(), std::move(dims)), keepBasis};
}

// ---------------------------------------------------------------------------
// the optimal-overlap cheat

/// Cross-Gram matrix Lambda_ij = sqrt(p1_i p0_j) <phi1_i|phi0_j>. When the
/// ensembles differ in size, the smaller is padded with zero-weight entries,
/// so Lambda is always square.
inline Mat build_lambda(const Ensemble& e0, const Ensemble& e1) {
  if (e0.dims() != e1.dims()) throw ValidationError("dims-mismatch");
  auto m = static_cast<Eigen::Index>(std::max(e0.size(), e1.size()));
  Mat lambda = Mat::Zero(m, m);
  for (std::size_t i = 0; i < e1.size(); ++i)
    for (std::size_t j = 0; j < e0.size(); ++j)
      lambda(i, j) = std::sqrt(e1.probs()[i] * e0.probs()[j]) *
                     e1.states()[i].overlap(e0.states()[j]);
  return lambda;
}

/// Success probability of the basis-change cheat with mixing matrix V:
/// sqrt(pt_i)|phit_i> = sum_j sqrt(p0_j) V_ji |phi0_j>, then
/// sum_i pt_i |<phit_i|phi1_i>|^2. Tilde entries with (numerically) zero
/// weight, and entries beyond the b=1 ensemble, contribute 0.
inline double cheat_success(const Ensemble& e0, const Ensemble& e1, const Mat& V) {
  if (e0.dims() != e1.dims()) throw ValidationError("dims-mismatch");
  auto m = static_cast<Eigen::Index>(std::max(e0.size(), e1.size()));
  if (V.rows() != m || V.cols() != m)
    throw ValidationError("mixing-shape", "V must match the padded ensemble size");
  if (!is_unitary(V)) throw ValidationError("non-unitary", "mixing matrix must be unitary");
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<std::size_t>(i) >= e1.size()) continue;
    Vec tilde = Vec::Zero(e0.dim());
    for (std::size_t j = 0; j < e0.size(); ++j)
      tilde += std::sqrt(e0.probs()[j]) * V(static_cast<Eigen::Index>(j), i) *
               e0.states()[j].amplitudes();
    double pt = tilde.squaredNorm();
    if (pt < 1e-18) continue;
    Cx ov = e1.states()[i].amplitudes().dot(tilde) / std::sqrt(pt);
    total += pt * std::norm(ov);
  }
  return total;
}

struct CheatSolution {
  Mat lambda;
  Mat absLambda;
  Mat cheatU;    // Lambda * cheatU = |Lambda|
  Mat cheatV;    // mixing matrix actually applied to the b=0 ensemble
  double fid;    // tr|Lambda|
  double pAc;    // achieved success probability (via cheat_success)
  double diagSquaredSum;  // sum_i |Lambda|_ii^2, reported for inspection only
  std::string orientation;
  std::vector<std::pair<double, Ket>> tildeStates;
};

/// Optimal-overlap cheating transformation from the polar factorization of
/// the cross-Gram matrix. The transpose/conjugate orientation between the
/// polar factor and the applied mixing matrix is resolved empirically: among
/// the candidates consistent with Lambda*U = |Lambda| the one with the
/// highest achieved success is kept.
inline CheatSolution optimal_overlap_cheat(const Ensemble& e0, const Ensemble& e1) {
  Mat lambda = build_lambda(e0, e1);
  PolarResult polar = polar_unitary(lambda);
  double fid = polar.absL.trace().real();
  double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());

  struct Candidate {
    Mat v;
    const char* tag;
  };
  const Candidate candidates[] = {
      {polar.U.transpose(), "V=U^T"},
      {polar.U, "V=U"},
      {polar.U.adjoint(), "V=U^dagger"},
      {polar.U.conjugate(), "V=conj(U)"},
  };

  CheatSolution best;
  best.lambda = lambda;
  best.absLambda = polar.absL;
  best.cheatU = polar.U;
  best.fid = fid;
  best.pAc = -1.0;
  best.diagSquaredSum = polar.absL.diagonal().real().array().square().sum();

  for (const auto& cand : candidates) {
    Mat u = cand.v.transpose();  // mixing V corresponds to U = V^T
    if ((lambda * u - polar.absL).norm() > 1e-6 * scale * lambda.rows()) continue;
    double p = cheat_success(e0, e1, cand.v);
    if (p > best.pAc) {
      best.pAc = p;
      best.cheatV = cand.v;
      best.cheatU = u;
      best.orientation = cand.tag;
    }
  }

  auto m = lambda.rows();
  best.tildeStates.clear();
  for (Eigen::Index i = 0; i < m; ++i) {
    Vec tilde = Vec::Zero(e0.dim());
    for (std::size_t j = 0; j < e0.size(); ++j)
      tilde += std::sqrt(e0.probs()[j]) * best.cheatV(static_cast<Eigen::Index>(j), i) *
               e0.states()[j].amplitudes();
    double pt = tilde.squaredNorm();
    if (pt < 1e-18) continue;
    best.tildeStates.emplace_back(pt, Ket(tilde / std::sqrt(pt), e0.dims()));
  }
  return best;
}

/// Optimal probability of distinguishing two equally likely states.
inline double helstrom(const DensityOp& rho0, const DensityOp& rho1) {
  if (rho0.dims() != rho1.dims()) throw ValidationError("dims-mismatch");
  return 0.25 * (2.0 + trace_norm(rho0.matrix() - rho1.matrix()));
}

/// For two purifications of the same reduced state, the local unitary on
/// H^A carrying one onto the other (exactly, including degenerate spectra:
/// the shared eigenbasis of the averaged reduced state fixes the alignment).
inline Mat schmidt_switch(const PurifiedCommitment& phi0, const PurifiedCommitment& phi1) {
  const auto& dimsAll = phi0.phi.dims();
  if (phi1.phi.dims() != dimsAll) throw ValidationError("dims-mismatch");
  auto dimA = phi0.keepBasis.dim();
  auto dimB = phi0.phi.size() / dimA;

  std::vector<int> keepB;
  std::size_t nA = phi0.keepBasis.vector(0).dims().size();
  for (std::size_t i = nA; i < dimsAll.size(); ++i) keepB.push_back(static_cast<int>(i));
  DensityOp rb0 = partial_trace(DensityOp::pure(phi0.phi), keepB);
  DensityOp rb1 = partial_trace(DensityOp::pure(phi1.phi), keepB);
  if (trace_norm(rb0.matrix() - rb1.matrix()) > kValidationTol * 10)
    throw ValidationError("reduced-states-unequal",
                          "purifications must share the reduced state on H^B");

  Mat avg = (rb0.matrix() + rb1.matrix()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(avg);

  // A-side vectors a_k^(b) = (I (x) <bhat_k|) |Phi_b>; for eigenvalue > 0
  // they are orthogonal with norm sqrt(lambda_k)
  auto sideVector = [&](const Ket& phi, const Vec& bvec) {
    Vec a = Vec::Zero(dimA);
    const Vec& amp = phi.amplitudes();
    for (Eigen::Index ia = 0; ia < dimA; ++ia)
      a(ia) = bvec.dot(amp.segment(ia * dimB, dimB));
    return a;
  };

  std::vector<Vec> e0cols, e1cols;
  for (Eigen::Index kIdx = es.eigenvalues().size(); kIdx-- > 0;) {
    double lam = es.eigenvalues()(kIdx);
    if (lam < 1e-12) continue;
    Vec b = es.eigenvectors().col(kIdx);
    Vec a0 = sideVector(phi0.phi, b);
    Vec a1 = sideVector(phi1.phi, b);
    e0cols.push_back(a0 / a0.norm());
    e1cols.push_back(a1 / a1.norm());
  }
  auto r = static_cast<Eigen::Index>(e0cols.size());
  Mat E0(dimA, r), E1(dimA, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    E0.col(i) = e0cols[i];
    E1.col(i) = e1cols[i];
  }
  Mat u;
  if (r == dimA) {
    u = E1 * E0.adjoint();
  } else {
    auto complete = [&](const Mat& e) {
      Eigen::HouseholderQR<Mat> qr(e);
      Mat full = qr.householderQ();
      Mat out(dimA, dimA);
      out.leftCols(r) = e;
      out.rightCols(dimA - r) = full.rightCols(dimA - r);
      return out;
    };
    u = complete(E1) * complete(E0).adjoint();
  }
  return nearest_unitary(u);
}

// ---------------------------------------------------------------------------
// CP-map decomposition freedom

using WeightedOps = std::vector<std::pair<double, Mat>>;

struct KrausFreedomResult {
  bool equal = false;
  std::optional<Mat> mixV;   // present when equal and the mixing solve succeeded
  double choiDistance = 0.0;
  double residual = 0.0;     // Frobenius residual of the operator relation
  double worstStateDeviation = 0.0;
};

namespace detail {

inline void validate_weighted_ops(const WeightedOps& ops) {
  if (ops.empty()) throw ValidationError("ops-empty");
  double sum = 0.0;
  for (const auto& [p, u] : ops) {
    if (p <= 0.0) throw ValidationError("ops-prob", "weights must be positive");
    sum += p;
    if (u.rows() != ops[0].second.rows() || !is_unitary(u))
      throw ValidationError("non-unitary", "operations must be unitary on a common space");
  }
  if (std::abs(sum - 1.0) > kValidationTol) throw ValidationError("ops-prob-sum");
}

inline Mat choi_matrix(const WeightedOps& ops) {
  auto d = ops[0].second.rows();
  Vec omega = Vec::Zero(d * d);
  for (Eigen::Index i = 0; i < d; ++i) omega(i * d + i) = 1.0 / std::sqrt(static_cast<double>(d));
  Mat c = Mat::Zero(d * d, d * d);
  for (const auto& [p, u] : ops) {
    Vec v = kron(u, Mat::Identity(d, d)) * omega;
    c += p * projector(v);
  }
  return c;
}

}  // namespace detail

/// Decides whether the two random-unitary channels agree, and if so solves
/// for the unitary mixing matrix relating their decompositions:
///   sqrt(p1_i) U1_i = sum_j sqrt(p0_j) V_ji U0_j.
/// The state relation implied by the solve is spot-checked on random inputs.
inline KrausFreedomResult kraus_freedom(const WeightedOps& ops0, const WeightedOps& ops1,
                                        std::uint64_t checkSeed = 0x6b7261757366ull) {
  detail::validate_weighted_ops(ops0);
  detail::validate_weighted_ops(ops1);
  auto d = ops0[0].second.rows();
  if (ops1[0].second.rows() != d) throw ValidationError("dims-mismatch");

  KrausFreedomResult res;
  res.choiDistance = (detail::choi_matrix(ops0) - detail::choi_matrix(ops1)).norm();
  res.equal = res.choiDistance <= kValidationTol * static_cast<double>(d);
  if (!res.equal) return res;

  auto m = static_cast<Eigen::Index>(std::max(ops0.size(), ops1.size()));
  Mat A = Mat::Zero(d * d, m), B = Mat::Zero(d * d, m);
  for (std::size_t j = 0; j < ops0.size(); ++j)
    A.col(static_cast<Eigen::Index>(j)) =
        std::sqrt(ops0[j].first) * ops0[j].second.reshaped();
  for (std::size_t i = 0; i < ops1.size(); ++i)
    B.col(static_cast<Eigen::Index>(i)) =
        std::sqrt(ops1[i].first) * ops1[i].second.reshaped();

  Mat v = A.completeOrthogonalDecomposition().solve(B);
  Mat vu = nearest_unitary(v);
  res.residual = (A * vu - B).norm();
  if (res.residual > 1e-7) return res;  // equal channels but no clean mixing matrix
  res.mixV = vu;

  RngStream rng(checkSeed);
  std::vector<int> dims{static_cast<int>(d)};
  for (int t = 0; t < 50; ++t) {
    Ket psi = haar_ket(dims, rng);
    for (std::size_t i = 0; i < ops1.size(); ++i) {
      Vec lhs = std::sqrt(ops1[i].first) * (ops1[i].second * psi.amplitudes());
      Vec rhs = Vec::Zero(d);
      for (std::size_t j = 0; j < ops0.size(); ++j)
        rhs += std::sqrt(ops0[j].first) * vu(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) *
               (ops0[j].second * psi.amplitudes());
      res.worstStateDeviation = std::max(res.worstStateDeviation, (lhs - rhs).norm());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// anonymous-state scans

inline Ensemble modulated_ensemble(const WeightedOps& ops, const Ket& psi) {
  std::vector<double> probs;
  std::vector<Ket> states;
  for (const auto& [p, u] : ops) {
    probs.push_back(p);
    states.push_back(psi.applied(u));
  }
  return Ensemble(std::move(probs), std::move(states));
}

inline DensityOp channel_output(const WeightedOps& ops, const Ket& psi) {
  return modulated_ensemble(ops, psi).average();
}

struct ScanResult {
  double worstDistance = 0.0;
  std::optional<Ket> worstInput;
};

/// Haar-samples inputs (optionally entangled with an ancilla of equal
/// dimension) and returns the largest trace distance between the two channel
/// outputs, with optional hill-climbing refinement around the worst sample.
inline ScanResult uniform_concealing_scan(
    const WeightedOps& ops0, const WeightedOps& ops1, int samples, RngStream& rng,
    bool entangled = false,
    const std::function<Ket(RngStream&)>& sampler = nullptr, int refineSteps = 0) {
  detail::validate_weighted_ops(ops0);
  detail::validate_weighted_ops(ops1);
  auto d = ops0[0].second.rows();
  std::vector<int> dims{static_cast<int>(d)};
  if (entangled) dims.push_back(static_cast<int>(d));

  auto distance = [&](const Ket& input) {
    if (!entangled) return trace_distance(channel_output(ops0, input), channel_output(ops1, input));
    Mat rho = projector(input.amplitudes());
    Mat out0 = Mat::Zero(d * d, d * d), out1 = Mat::Zero(d * d, d * d);
    for (const auto& [p, u] : ops0) {
      Mat ue = kron(u, Mat::Identity(d, d));
      out0 += p * ue * rho * ue.adjoint();
    }
    for (const auto& [p, u] : ops1) {
      Mat ue = kron(u, Mat::Identity(d, d));
      out1 += p * ue * rho * ue.adjoint();
    }
    return trace_norm(out0 - out1);
  };

  ScanResult res;
  for (int s = 0; s < samples; ++s) {
    Ket input = sampler ? sampler(rng) : haar_ket(dims, rng);
    double dist = distance(input);
    if (dist > res.worstDistance) {
      res.worstDistance = dist;
      res.worstInput = input;
    }
  }
  if (res.worstInput && refineSteps > 0) {
    Ket cur = *res.worstInput;
    double step = 0.3;
    for (int t = 0; t < refineSteps; ++t) {
      Vec pert = cur.amplitudes();
      for (Eigen::Index i = 0; i < pert.size(); ++i)
        pert(i) += step * Cx(rng.normal(), rng.normal());
      Ket cand(pert / pert.norm(), cur.dims());
      double dist = distance(cand);
      if (dist > res.worstDistance) {
        res.worstDistance = dist;
        res.worstInput = cand;
        cur = cand;
      } else {
        step *= 0.95;
      }
    }
  }
  return res;
}

struct FixedCheatScanResult {
  double minP = 1.0;
  double meanP = 0.0;
  std::optional<Ket> worstInput;
};

/// Evaluates the fixed-mixing cheat success over sampled anonymous inputs.
inline FixedCheatScanResult fixed_cheat_scan(
    const WeightedOps& ops0, const WeightedOps& ops1, const Mat& candidateV, int samples,
    RngStream& rng, const std::function<Ket(RngStream&)>& sampler = nullptr) {
  detail::validate_weighted_ops(ops0);
  detail::validate_weighted_ops(ops1);
  if (!is_unitary(candidateV)) throw ValidationError("non-unitary");
  auto d = ops0[0].second.rows();
  std::vector<int> dims{static_cast<int>(d)};
  FixedCheatScanResult res;
  double sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    Ket psi = sampler ? sampler(rng) : haar_ket(dims, rng);
    double p = cheat_success(modulated_ensemble(ops0, psi), modulated_ensemble(ops1, psi),
                             candidateV);
    sum += p;
    if (p < res.minP) {
      res.minP = p;
      res.worstInput = psi;
    }
  }
  res.meanP = samples > 0 ? sum / samples : 0.0;
  return res;
}

/// Evaluate over an explicit list of inputs instead of random samples.
inline FixedCheatScanResult fixed_cheat_scan(const WeightedOps& ops0, const WeightedOps& ops1,
                                             const Mat& candidateV,
                                             const std::vector<Ket>& inputs) {
  detail::validate_weighted_ops(ops0);
  detail::validate_weighted_ops(ops1);
  if (!is_unitary(candidateV)) throw ValidationError("non-unitary");
  FixedCheatScanResult res;
  double sum = 0.0;
  for (const Ket& psi : inputs) {
    double p = cheat_success(modulated_ensemble(ops0, psi), modulated_ensemble(ops1, psi),
                             candidateV);
    sum += p;
    if (p < res.minP) {
      res.minP = p;
      res.worstInput = psi;
    }
  }
  res.meanP = inputs.empty() ? 0.0 : sum / static_cast<double>(inputs.size());
  return res;
}

// ---------------------------------------------------------------------------
// the perfect-concealing counterexample

/// Two-qubit commitment operations for which one particular entangled input
/// conceals the bit exactly, yet the channels differ: the committer can cheat
/// perfectly on that input, while the receiver distinguishes perfectly by
/// sending a product input outside the entangled span.
struct CounterexampleFixture {
  Ket psiEntangled;     // on H^B (two qubits) (x) H^C (one qubit)
  Ket productProbe;     // |a>|a> in H^B
  WeightedOps ops0;
  WeightedOps ops1;
  double concealDistance;    // trace distance of the two outputs on psiEntangled
  double cheatSuccessOnPsi;  // optimal-overlap cheat success on psiEntangled
  Mat cheatMixing;
  double probeHelstrom;      // receiver's distinguishing probability on |a>|a>
  bool channelsEqual;        // CP-map equality verdict
};

inline CounterexampleFixture counterexample_fixture() {
  Mat id4 = Mat::Identity(4, 4);
  Mat swap = Mat::Zero(4, 4);
  swap(0, 0) = swap(3, 3) = 1;
  swap(1, 2) = swap(2, 1) = 1;
  Mat x(2, 2);
  x << 0, 1, 1, 0;
  Mat rr = kron(x, x);

  WeightedOps ops0{{0.5, id4}, {0.5, swap}};
  WeightedOps ops1{{0.5, rr}, {0.5, rr * swap}};

  // (|a a'>|f1> + |a' a>|f2>)/sqrt(2), a=|0>, a'=|1>, C last
  Vec psi = Vec::Zero(8);
  psi(0b010) = 1.0 / std::sqrt(2.0);  // |0 1 0>
  psi(0b101) = 1.0 / std::sqrt(2.0);  // |1 0 1>
  Ket psiEnt(psi, {2, 2, 2});
  Ket probe = Ket::basis(0, {2, 2});

  CounterexampleFixture fx{psiEnt, probe, ops0, ops1, 0, 0, Mat(), 0, false};

  // outputs on the entangled input: channel acts on the first two qubits
  auto extended = [&](const WeightedOps& ops) {
    WeightedOps out;
    for (const auto& [p, u] : ops) out.emplace_back(p, kron(u, Mat::Identity(2, 2)));
    return out;
  };
  fx.concealDistance =
      trace_distance(channel_output(extended(ops0), psiEnt), channel_output(extended(ops1), psiEnt));

  CheatSolution sol = optimal_overlap_cheat(modulated_ensemble(extended(ops0), psiEnt),
                                            modulated_ensemble(extended(ops1), psiEnt));
  fx.cheatSuccessOnPsi = sol.pAc;
  fx.cheatMixing = sol.cheatV;

  fx.probeHelstrom = helstrom(channel_output(ops0, probe), channel_output(ops1, probe));
  fx.channelsEqual = kraus_freedom(ops0, ops1).equal;
  return fx;
}

}  // namespace qbc
