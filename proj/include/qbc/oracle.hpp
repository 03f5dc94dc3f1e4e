#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "qbc/cheat.hpp"
#include "qbc/qcore.hpp"

namespace qbc {

// Desk-scale search oracles. These deliberately avoid the polar-decomposition
// route so they can serve as independent checks on it.

inline constexpr std::size_t kOracleSizeCap = 6;

namespace detail {

inline Mat hermitian_exp_i(const Mat& h, double t) {
  Eigen::SelfAdjointEigenSolver<Mat> es((h + h.adjoint()) / 2.0);
  Vec phases(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases(i) = std::polar(1.0, t * es.eigenvalues()(i));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline Mat random_hermitian(int n, RngStream& rng) {
  Mat h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = Cx(rng.normal(), rng.normal());
  return (h + h.adjoint()) / 2.0;
}

/// Random-restart hill climb over the unitary group with geodesic steps.
inline std::pair<Mat, double> maximize_over_unitaries(
    int n, const std::function<double(const Mat&)>& objective, int budget, RngStream& rng) {
  Mat bestV = Mat::Identity(n, n);
  double bestVal = objective(bestV);
  int evals = 1;
  while (evals < budget) {
    Mat v = haar_unitary(n, rng);
    double cur = objective(v);
    ++evals;
    double step = 0.5;
    while (step > 1e-5 && evals < budget) {
      Mat h = random_hermitian(n, rng);
      Mat cand = v * hermitian_exp_i(h, step / h.norm());
      double val = objective(cand);
      ++evals;
      if (val > cur) {
        v = cand;
        cur = val;
      } else {
        step *= 0.96;
      }
    }
    if (cur > bestVal) {
      bestVal = cur;
      bestV = v;
    }
  }
  return {bestV, bestVal};
}

}  // namespace detail

/// Largest |tr(L V)| found over `samples` Haar-random unitaries. Never
/// exceeds tr|L| (up to noise); used to cross-check the polar identity.
inline double max_overlap_random_search(const Mat& L, int samples, RngStream& rng) {
  if (L.rows() != L.cols()) throw ValidationError("polar-shape");
  double best = 0.0;
  for (int s = 0; s < samples; ++s)
    best = std::max(best, std::abs((L * haar_unitary(static_cast<int>(L.rows()), rng)).trace()));
  return best;
}

struct CheatOracleResult {
  Mat bestV;
  double bestP = 0.0;
};

/// Searches mixing matrices directly on the success objective. Independent of
/// the polar construction; restricted to small ensembles.
inline CheatOracleResult brute_force_cheat_oracle(const Ensemble& e0, const Ensemble& e1,
                                                  int budget, RngStream& rng) {
  std::size_t m = std::max(e0.size(), e1.size());
  if (m > kOracleSizeCap)
    throw ValidationError("oracle-size-cap", "search oracle is desk-scale only");
  auto [v, p] = detail::maximize_over_unitaries(
      static_cast<int>(m), [&](const Mat& cand) { return cheat_success(e0, e1, cand); }, budget,
      rng);
  return {std::move(v), p};
}

struct FixedCheatOracleResult {
  Mat bestV;
  double bestMinP = 0.0;
  double meanAtBest = 0.0;
};

/// Best fixed mixing matrix for a whole family of anonymous inputs: maximizes
/// the minimum success over the inputs.
inline FixedCheatOracleResult best_fixed_cheat_search(const WeightedOps& ops0,
                                                      const WeightedOps& ops1,
                                                      const std::vector<Ket>& inputs, int budget,
                                                      RngStream& rng) {
  std::size_t m = std::max(ops0.size(), ops1.size());
  if (m > kOracleSizeCap) throw ValidationError("oracle-size-cap");
  auto objective = [&](const Mat& v) {
    return fixed_cheat_scan(ops0, ops1, v, inputs).minP;
  };
  auto [v, p] = detail::maximize_over_unitaries(static_cast<int>(m), objective, budget, rng);
  FixedCheatOracleResult res;
  res.bestV = v;
  res.bestMinP = p;
  res.meanAtBest = fixed_cheat_scan(ops0, ops1, v, inputs).meanP;
  return res;
}

struct ClonerSearchResult {
  Mat isometry;  // 4x2: qubit -> two qubits
  double criterion = 0.0;
};

namespace detail {

inline Mat nearest_isometry(const Mat& x) {
  // tall x: W = x (x^dagger x)^(-1/2)
  Eigen::SelfAdjointEigenSolver<Mat> es(x.adjoint() * x);
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return x * (es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint());
}

}  // namespace detail

/// Two-clone figure of merit for an isometry output: first clone judged
/// against psi, second against u1 * psi, averaged uniformly over the set.
inline double cloner_criterion(const Mat& isometry, const std::vector<Ket>& psiSet, const Mat& u1) {
  double total = 0.0;
  for (const Ket& psi : psiSet) {
    Vec out = isometry * psi.amplitudes();
    DensityOp joint(projector(out), {2, 2});
    Mat rhoA = partial_trace(joint, {0}).matrix();
    Mat rhoB = partial_trace(joint, {1}).matrix();
    Vec target = u1 * psi.amplitudes();
    total += 0.5 * (psi.amplitudes().adjoint() * rhoA * psi.amplitudes())(0).real() +
             0.5 * (target.adjoint() * rhoB * target)(0).real();
  }
  return total / static_cast<double>(psiSet.size());
}

/// Hill-climbs a qubit-to-two-qubit isometry on the clone criterion.
inline ClonerSearchResult cloner_channel_search(const std::vector<Ket>& psiSet, const Mat& u1,
                                                int budget, RngStream& rng) {
  if (psiSet.empty()) throw ValidationError("psi-set-empty");
  ClonerSearchResult best;
  best.criterion = -1.0;
  int evals = 0;
  while (evals < budget) {
    Mat x(4, 2);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) x(i, j) = Cx(rng.normal(), rng.normal());
    Mat w = detail::nearest_isometry(x);
    double cur = cloner_criterion(w, psiSet, u1);
    ++evals;
    double step = 0.4;
    while (step > 1e-5 && evals < budget) {
      Mat px = w;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) px(i, j) += step * Cx(rng.normal(), rng.normal());
      Mat cand = detail::nearest_isometry(px);
      double val = cloner_criterion(cand, psiSet, u1);
      ++evals;
      if (val > cur) {
        w = cand;
        cur = val;
      } else {
        step *= 0.97;
      }
    }
    if (cur > best.criterion) {
      best.criterion = cur;
      best.isometry = w;
    }
  }
  return best;
}

}  // namespace qbc
