#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qbc/qcore.hpp"

namespace qbc {

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t c = 1;
  for (int i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n - k + i) / i;
  return c;
}

/// Receiver's optimal early-guess probability for the decoy protocols, with
/// the exact binomial closed form, its direct counting-sum evaluation, and
/// the asymptotic bounds.
struct ConcealingReport {
  int n = 0;
  int ell = 0;
  double lambdaPlus = 1.0;
  double closedForm = 0.0;     // optimal guess probability
  double traceDistance = 0.0;  // counting-sum evaluation of ||rho0 - rho1||_1
  std::uint64_t countingSum = 0;
  bool identityOk = false;  // counting sum equals 2(2l+1) C(2l,l) exactly
  bool boundsApplicable = false;
  double lowerBound = 0.0;
  double upperBound = 0.0;
  bool strictlyInsideBounds = false;
};

inline ConcealingReport concealing_closed_form(int n, double lambdaPlus) {
  if (n < 1 || n % 2 == 0) throw ValidationError("n-odd", "sequence length must be odd");
  if (lambdaPlus <= 0.0 || lambdaPlus > 1.0)
    throw ValidationError("lambda-plus-range", "lambda+ must lie in (0,1]");
  ConcealingReport r;
  r.n = n;
  r.ell = (n - 1) / 2;
  r.lambdaPlus = lambdaPlus;

  std::uint64_t central = binomial(2 * r.ell, r.ell);
  r.closedForm = 0.5 + lambdaPlus * static_cast<double>(central) / std::exp2(n);

  for (int k = 0; k <= n; ++k)
    r.countingSum += binomial(n, k) * static_cast<std::uint64_t>(std::abs(n - 2 * k));
  r.identityOk = r.countingSum == 2ull * static_cast<std::uint64_t>(n) * central;
  r.traceDistance =
      lambdaPlus * static_cast<double>(r.countingSum) / (static_cast<double>(n) * std::exp2(n - 1));

  if (r.ell >= 1) {
    r.boundsApplicable = true;
    r.lowerBound = 1.0 / (4.0 * std::sqrt(static_cast<double>(r.ell)));
    r.upperBound = 1.0 / (2.0 * std::sqrt(M_PI * static_cast<double>(r.ell)));
    double excess = r.closedForm - 0.5;  // bounds concern the advantage at lambda+ = 1
    double advantage = excess / lambdaPlus;
    r.strictlyInsideBounds = advantage > r.lowerBound && advantage < r.upperBound;
  }
  return r;
}

inline std::pair<double, double> concealing_bounds(int ell) {
  if (ell < 1) throw ValidationError("ell-range", "bounds need ell >= 1");
  return {1.0 / (4.0 * std::sqrt(static_cast<double>(ell))),
          1.0 / (2.0 * std::sqrt(M_PI * static_cast<double>(ell)))};
}

/// Probability that a majority of m independent per-segment decisions, each
/// correct with probability p, is correct.
inline double majority_vote_pbc(int m, double p) {
  if (m < 1 || m % 2 == 0) throw ValidationError("m-odd", "majority vote needs odd m");
  if (p < 0.0 || p > 1.0) throw ValidationError("p-range");
  double total = 0.0;
  for (int k = 0; k <= (m - 1) / 2; ++k)
    total += static_cast<double>(binomial(m, k)) * std::pow(1.0 - p, k) * std::pow(p, m - k);
  return total;
}

/// Probability that none of m uniformly placed qubits lands on a fixed
/// guessed position within its length-N segment.
inline double p_no_match(int N, int m) {
  if (N < 1 || m < 1) throw ValidationError("segment-params");
  return std::pow(static_cast<double>(N - 1), m) / std::pow(static_cast<double>(N), m);
}

// ---------------------------------------------------------------------------
// explicit protocol states (desk scale)

/// The n-qubit state the receiver holds when a pure qubit sigma_b is hidden
/// uniformly among maximally mixed decoys.
inline DensityOp qbcp3m_rho(const GreatCircle& circle, int n, const Ket& psi, int b,
                            int dimCap = kDefaultDimCap) {
  if (n < 1) throw ValidationError("n-range");
  if ((1 << n) > dimCap) throw ValidationError("dimension-cap");
  Ket mod = b == 0 ? psi : rotate(circle, M_PI, psi);
  Mat sigma = projector(mod.amplitudes());
  Mat half = Mat::Identity(2, 2) / 2.0;
  auto dim = static_cast<Eigen::Index>(1) << n;
  Mat rho = Mat::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    Mat term = Mat::Identity(1, 1);
    for (int j = 0; j < n; ++j) term = kron(term, j == i ? sigma : half);
    rho += term / static_cast<double>(n);
  }
  return DensityOp(std::move(rho), std::vector<int>(n, 2));
}

namespace detail {

inline Mat embed_pair_terms(const Mat& pair, int n, int i) {
  // pair acts on (qubit i, ancilla); decoys I/2 elsewhere; systems q0..q_{n-1}, C
  Mat half = Mat::Identity(2, 2) / 2.0;
  Mat m = Mat::Identity(1, 1);
  for (int j = 0; j < n - 1; ++j) m = kron(m, half);
  m = kron(m, pair);  // system order: decoys(0..n-2), q_i, C
  std::vector<int> perm;
  int decoy = 0;
  for (int j = 0; j < n; ++j) perm.push_back(j == i ? n - 1 : decoy++);
  perm.push_back(n);
  return permute_subsystems(m, std::vector<int>(n + 1, 2), perm);
}

inline Mat modulated_pair(const GreatCircle& circle, int b) {
  // maximally entangled anonymous input, sender half modulated
  Vec bell = Vec::Zero(4);
  bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
  Mat u = b == 0 ? Mat(Mat::Identity(2, 2)) : circle_rotation(circle, M_PI);
  Vec v = kron(u, Mat::Identity(2, 2)) * bell;
  return projector(v);
}

}  // namespace detail

/// Same configuration when the anonymous qubit is half of a maximally
/// entangled pair whose other half the receiver keeps. Systems: the n wire
/// qubits, then the kept ancilla.
inline DensityOp qbcp3m_rho_entangled(const GreatCircle& circle, int n, int b,
                                      int dimCap = kDefaultDimCap) {
  if (n < 1) throw ValidationError("n-range");
  if ((1 << (n + 1)) > dimCap) throw ValidationError("dimension-cap");
  Mat pair = detail::modulated_pair(circle, b);
  auto dim = static_cast<Eigen::Index>(1) << (n + 1);
  Mat rho = Mat::Zero(dim, dim);
  for (int i = 0; i < n; ++i) rho += detail::embed_pair_terms(pair, n, i) / static_cast<double>(n);
  return DensityOp(std::move(rho), std::vector<int>(n + 1, 2));
}

/// Triangle-inequality record: splitting off the correctly guessed position
/// (worth at most the maximal distance 2) leaves the mismatched aggregate,
/// whose norm is unchanged by the dangling ancilla.
struct TriangleBoundRecord {
  int n = 0;
  double distance = 0.0;      // ||rho0 - rho1||_1
  double lhs = 0.0;           // n * distance
  double mismatchNorm = 0.0;  // norm of the aggregate over the n-1 other positions
  double rhs = 0.0;           // 2 + mismatchNorm
  bool holds = false;
};

inline TriangleBoundRecord entangle_mismatch_bounds(const GreatCircle& circle, int n,
                                                    bool entangled, const Ket& psi,
                                                    int dimCap = kDefaultDimCap) {
  TriangleBoundRecord rec;
  rec.n = n;
  if (entangled) {
    DensityOp r0 = qbcp3m_rho_entangled(circle, n, 0, dimCap);
    DensityOp r1 = qbcp3m_rho_entangled(circle, n, 1, dimCap);
    rec.distance = trace_distance(r0, r1);
    Mat mismatch = Mat::Zero(r0.dim(), r0.dim());
    Mat dpair = detail::modulated_pair(circle, 0) - detail::modulated_pair(circle, 1);
    for (int i = 1; i < n; ++i) mismatch += detail::embed_pair_terms(dpair, n, i);
    rec.mismatchNorm = trace_norm(mismatch);
  } else {
    DensityOp r0 = qbcp3m_rho(circle, n, psi, 0, dimCap);
    DensityOp r1 = qbcp3m_rho(circle, n, psi, 1, dimCap);
    rec.distance = trace_distance(r0, r1);
    if (n > 1) {
      DensityOp s0 = qbcp3m_rho(circle, n - 1, psi, 0, dimCap);
      DensityOp s1 = qbcp3m_rho(circle, n - 1, psi, 1, dimCap);
      rec.mismatchNorm = static_cast<double>(n - 1) * trace_distance(s0, s1);
    }
  }
  rec.lhs = static_cast<double>(n) * rec.distance;
  rec.rhs = 2.0 + rec.mismatchNorm;
  rec.holds = rec.lhs <= rec.rhs + 1e-9;
  return rec;
}

/// Convexity record for the segmented protocol: conditioning on whether any
/// kept ancilla matches its guessed position.
struct ConvexityBoundRecord {
  int m = 0;
  int N = 0;
  double p = 0.0;            // probability that no position matches the guess
  double distance = 0.0;     // ||rho0 - rho1||_1 with entangled anonymous qubits
  double noMatchDistance = 0.0;
  double rhs = 0.0;          // (1-p)*2 + p*noMatchDistance
  bool holds = false;
};

inline ConvexityBoundRecord entangle_mismatch_bounds(const GreatCircle& circle, int m, int N,
                                                     int dimCap = kDefaultDimCap) {
  if (m < 1 || N < 2) throw ValidationError("segment-params");
  int nsys = m * N + m;
  if (nsys > 30 || (1 << nsys) > dimCap) throw ValidationError("dimension-cap");
  ConvexityBoundRecord rec;
  rec.m = m;
  rec.N = N;
  rec.p = p_no_match(N, m);

  auto dim = static_cast<Eigen::Index>(1) << nsys;
  std::vector<int> dims(nsys, 2);
  Mat half = Mat::Identity(2, 2) / 2.0;

  auto build = [&](int b) {
    Mat pair = detail::modulated_pair(circle, b);
    Mat rho = Mat::Zero(dim, dim);
    Mat noMatch = Mat::Zero(dim, dim);
    std::vector<int> placement(m, 0);
    auto terms = static_cast<std::size_t>(std::pow(N, m));
    for (std::size_t t = 0; t < terms; ++t) {
      std::size_t rem = t;
      for (int j = 0; j < m; ++j) {
        placement[j] = static_cast<int>(rem % N);
        rem /= N;
      }
      // system order built: pair_0(q,C), ..., pair_{m-1}(q,C), decoys...
      Mat term = Mat::Identity(1, 1);
      for (int j = 0; j < m; ++j) term = kron(term, pair);
      for (int d = 0; d < m * (N - 1); ++d) term = kron(term, half);
      std::vector<int> perm(nsys);
      int decoy = 2 * m;
      for (int j = 0; j < m; ++j)
        for (int q = 0; q < N; ++q) perm[j * N + q] = (q == placement[j]) ? 2 * j : decoy++;
      for (int j = 0; j < m; ++j) perm[m * N + j] = 2 * j + 1;
      Mat placed = permute_subsystems(term, dims, perm) / static_cast<double>(terms);
      rho += placed;
      bool anyMatch = false;
      for (int j = 0; j < m; ++j) anyMatch = anyMatch || placement[j] == 0;
      if (!anyMatch) noMatch += placed;
    }
    return std::make_pair(rho, noMatch);
  };

  auto [rho0, no0] = build(0);
  auto [rho1, no1] = build(1);
  rec.distance = trace_norm(rho0 - rho1);
  rec.noMatchDistance = trace_norm(no0 - no1) / rec.p;  // conditioned states
  rec.rhs = (1.0 - rec.p) * 2.0 + rec.p * rec.noMatchDistance;
  rec.holds = rec.distance <= rec.rhs + 1e-9;
  return rec;
}

/// Clone figure of merit for an arbitrary two-qubit output family: the first
/// marginal judged against psi, the second against the rotated target,
/// averaged uniformly over the state set.
inline double clone_criterion(const std::function<DensityOp(const Ket&)>& strategyOutput,
                              const std::vector<Ket>& psiSet, const GreatCircle& circle) {
  if (psiSet.empty()) throw ValidationError("psi-set-empty");
  Mat u1 = circle_rotation(circle, M_PI);
  double total = 0.0;
  for (const Ket& psi : psiSet) {
    DensityOp joint = strategyOutput(psi);
    if (joint.dim() != 4) throw ValidationError("clone-output-shape", "need a two-qubit state");
    Mat rhoA = partial_trace(joint, {0}).matrix();
    Mat rhoB = partial_trace(joint, {1}).matrix();
    Vec target = u1 * psi.amplitudes();
    total += 0.5 * (psi.amplitudes().adjoint() * rhoA * psi.amplitudes())(0).real() +
             0.5 * (target.adjoint() * rhoB * target)(0).real();
  }
  return total / static_cast<double>(psiSet.size());
}

/// The four standard states on a circle: vertical, horizontal, two diagonals.
inline std::vector<Ket> bb84_states(const GreatCircle& circle) {
  return {circle_state(circle, 0.0), circle_state(circle, M_PI), circle_state(circle, M_PI / 2),
          circle_state(circle, 3 * M_PI / 2)};
}

inline std::vector<Ket> circle_discretization(const GreatCircle& circle, int points) {
  std::vector<Ket> out;
  out.reserve(points);
  for (int k = 0; k < points; ++k)
    out.push_back(circle_state(circle, 2.0 * M_PI * k / points));
  return out;
}

}  // namespace qbc
