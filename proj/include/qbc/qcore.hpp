#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qbc/rng.hpp"

namespace qbc {

using Cx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double kValidationTol = 1e-9;
inline constexpr double kExactTol = 1e-12;
inline constexpr double kRankCutoff = 1e-10;  // relative singular-value cutoff
inline constexpr int kDefaultDimCap = 1 << 12;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An input violated a documented invariant. `invariant()` names it.
struct ValidationError : Error {
  explicit ValidationError(const std::string& name, const std::string& detail = {})
      : Error(detail.empty() ? name : name + ": " + detail), invariant_(name) {}
  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

struct ParseError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// small helpers

inline Mat dagger(const Mat& m) { return m.adjoint(); }

inline Mat outer(const Vec& a, const Vec& b) { return a * b.adjoint(); }

inline Mat projector(const Vec& a) { return a * a.adjoint(); }

inline bool is_unitary(const Mat& u, double tol = 1e-6) {
  if (u.rows() != u.cols()) return false;
  return (u.adjoint() * u - Mat::Identity(u.cols(), u.cols())).norm() <= tol;
}

inline std::size_t dim_product(const std::vector<int>& dims) {
  std::size_t d = 1;
  for (int x : dims) d *= static_cast<std::size_t>(x);
  return d;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// ---------------------------------------------------------------------------
// domain types

/// Normalized pure state on a finite tensor-product space.
class Ket {
 public:
  Ket(Vec amplitudes, std::vector<int> dims)
      : amp_(std::move(amplitudes)), dims_(std::move(dims)) {
    if (dims_.empty()) dims_ = {static_cast<int>(amp_.size())};
    for (int d : dims_)
      if (d <= 0) throw ValidationError("ket-dims", "subsystem dimension must be positive");
    if (dim_product(dims_) != static_cast<std::size_t>(amp_.size()))
      throw ValidationError("ket-dims", "product of dims must equal amplitude count");
    if (std::abs(amp_.norm() - 1.0) > kValidationTol)
      throw ValidationError("ket-norm", "ket must be normalized");
  }

  explicit Ket(Vec amplitudes) : Ket(std::move(amplitudes), {}) {}

  /// Computational basis state |index> on a space with the given dims.
  static Ket basis(int index, std::vector<int> dims) {
    Vec v = Vec::Zero(static_cast<Eigen::Index>(dim_product(dims)));
    v(index) = 1.0;
    return Ket(std::move(v), std::move(dims));
  }

  const Vec& amplitudes() const { return amp_; }
  const std::vector<int>& dims() const { return dims_; }
  Eigen::Index size() const { return amp_.size(); }

  Cx overlap(const Ket& other) const {
    if (size() != other.size()) throw ValidationError("dims-mismatch");
    return amp_.dot(other.amp_);  // <this|other>
  }

  Ket applied(const Mat& u) const {
    if (u.cols() != amp_.size()) throw ValidationError("dims-mismatch");
    Vec v = u * amp_;
    double n = v.norm();
    if (std::abs(n - 1.0) > kValidationTol)
      throw ValidationError("ket-norm", "operator did not preserve norm");
    return Ket(v / n, dims_);
  }

  Ket with_dims(std::vector<int> dims) const { return Ket(amp_, std::move(dims)); }

 private:
  Vec amp_;
  std::vector<int> dims_;
};

/// Density operator: Hermitian, positive semidefinite, unit trace.
class DensityOp {
 public:
  DensityOp(Mat matrix, std::vector<int> dims) : m_(std::move(matrix)), dims_(std::move(dims)) {
    if (dims_.empty()) dims_ = {static_cast<int>(m_.rows())};
    if (m_.rows() != m_.cols()) throw ValidationError("density-shape", "matrix must be square");
    if (dim_product(dims_) != static_cast<std::size_t>(m_.rows()))
      throw ValidationError("density-dims", "product of dims must equal matrix dimension");
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kValidationTol)
      throw ValidationError("density-hermitian");
    if (std::abs(m_.trace().real() - 1.0) > kValidationTol ||
        std::abs(m_.trace().imag()) > kValidationTol)
      throw ValidationError("density-trace");
    // full PSD check is O(dim^3); run it eagerly only at small dims
    if (m_.rows() <= 256) check_psd();
  }

  explicit DensityOp(Mat matrix) : DensityOp(std::move(matrix), {}) {}

  static DensityOp pure(const Ket& k) {
    Mat m = projector(k.amplitudes());
    return DensityOp(std::move(m), k.dims());
  }

  static DensityOp maximally_mixed(std::vector<int> dims) {
    auto d = static_cast<Eigen::Index>(dim_product(dims));
    return DensityOp(Mat::Identity(d, d) / static_cast<double>(d), std::move(dims));
  }

  /// Eigenvalue positivity check, deferred for large matrices.
  void check_psd() const {
    Eigen::SelfAdjointEigenSolver<Mat> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kValidationTol)
      throw ValidationError("density-psd", "negative eigenvalue beyond tolerance");
  }

  const Mat& matrix() const { return m_; }
  const std::vector<int>& dims() const { return dims_; }
  Eigen::Index dim() const { return m_.rows(); }

  DensityOp evolved(const Mat& u) const {
    if (!is_unitary(u)) throw ValidationError("non-unitary");
    return DensityOp(u * m_ * u.adjoint(), dims_);
  }

 private:
  Mat m_;
  std::vector<int> dims_;
};

/// Great circle on the qubit Bloch sphere: unit normal plus an angular
/// origin. States on the circle have Bloch vectors in the plane orthogonal
/// to `axis`. The standard circle (axis = +y) is the real-amplitude circle
/// through the four BB84 states, with circle_state(a) = cos(a/2)|0> + sin(a/2)|1>.
struct GreatCircle {
  Eigen::Vector3d axis;
  double phase_origin = 0.0;

  GreatCircle(Eigen::Vector3d ax, double origin = 0.0) : axis(std::move(ax)), phase_origin(origin) {
    if (std::abs(axis.norm() - 1.0) > 1e-12)
      throw ValidationError("circle-axis", "axis must be a unit vector");
  }

  static GreatCircle standard() { return GreatCircle(Eigen::Vector3d(0, 1, 0)); }

  /// In-plane frame (u, v) with v = axis x u; u is the zero-angle direction.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> frame() const {
    Eigen::Vector3d ref =
        std::abs(axis.z()) < 0.9 ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(1, 0, 0);
    Eigen::Vector3d u = (ref - ref.dot(axis) * axis).normalized();
    return {u, axis.cross(u)};
  }
};

inline Ket bloch_to_ket(const Eigen::Vector3d& b) {
  double theta = std::acos(std::clamp(b.z(), -1.0, 1.0));
  double phi = std::atan2(b.y(), b.x());
  Vec v(2);
  v(0) = std::cos(theta / 2);
  v(1) = std::polar(std::sin(theta / 2), phi);
  return Ket(std::move(v), {2});
}

inline Eigen::Vector3d ket_to_bloch(const Ket& k) {
  if (k.size() != 2) throw ValidationError("dims-mismatch", "bloch vector needs a qubit");
  const Vec& a = k.amplitudes();
  Cx r = std::conj(a(0)) * a(1);
  return {2 * r.real(), 2 * r.imag(), std::norm(a(0)) - std::norm(a(1))};
}

/// SU(2) rotation by `theta` about the circle normal; maps each circle state
/// to the circle state `theta` further along, exactly (no phase slip on the
/// standard circle, where it is the real rotation matrix).
inline Mat circle_rotation(const GreatCircle& c, double theta) {
  Mat sx(2, 2), sy(2, 2), sz(2, 2);
  sx << 0, 1, 1, 0;
  sy << 0, Cx(0, -1), Cx(0, 1), 0;
  sz << 1, 0, 0, -1;
  Mat ns = c.axis.x() * sx + c.axis.y() * sy + c.axis.z() * sz;
  return std::cos(theta / 2) * Mat::Identity(2, 2) - Cx(0, 1) * std::sin(theta / 2) * ns;
}

inline Ket circle_state(const GreatCircle& c, double angle) {
  auto [u, v] = c.frame();
  (void)v;
  return bloch_to_ket(u).applied(circle_rotation(c, angle + c.phase_origin));
}

inline Ket rotate(const GreatCircle& c, double theta, const Ket& k) {
  return k.applied(circle_rotation(c, theta));
}

/// Orthonormal measurement basis on one subsystem.
class MeasurementBasis {
 public:
  explicit MeasurementBasis(std::vector<Ket> vectors) : vecs_(std::move(vectors)) {
    if (vecs_.empty()) throw ValidationError("basis-empty");
    for (std::size_t i = 0; i < vecs_.size(); ++i) {
      if (vecs_[i].size() != vecs_[0].size()) throw ValidationError("basis-dims");
      for (std::size_t j = 0; j < i; ++j)
        if (std::abs(vecs_[i].overlap(vecs_[j])) > kValidationTol)
          throw ValidationError("basis-orthonormal");
    }
  }

  static MeasurementBasis computational(int d) {
    std::vector<Ket> v;
    v.reserve(d);
    for (int i = 0; i < d; ++i) v.push_back(Ket::basis(i, {d}));
    return MeasurementBasis(std::move(v));
  }

  /// {psi, R(pi,C) psi}: the verifying qubit basis of the circle protocols.
  static MeasurementBasis conjugate_pair(const GreatCircle& c, const Ket& psi) {
    return MeasurementBasis({psi, rotate(c, M_PI, psi)});
  }

  std::size_t size() const { return vecs_.size(); }
  Eigen::Index dim() const { return vecs_[0].size(); }
  const Ket& vector(std::size_t k) const { return vecs_[k]; }
  const std::vector<Ket>& vectors() const { return vecs_; }

 private:
  std::vector<Ket> vecs_;
};

// ---------------------------------------------------------------------------
// operations

inline Ket tensor(const std::vector<Ket>& parts) {
  if (parts.empty()) throw ValidationError("tensor-empty");
  Vec v = parts[0].amplitudes();
  std::vector<int> dims = parts[0].dims();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const Vec& w = parts[k].amplitudes();
    Vec out(v.size() * w.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
      out.segment(i * w.size(), w.size()) = v(i) * w;
    v = std::move(out);
    dims.insert(dims.end(), parts[k].dims().begin(), parts[k].dims().end());
  }
  return Ket(std::move(v), std::move(dims));
}

inline DensityOp tensor(const std::vector<DensityOp>& parts) {
  if (parts.empty()) throw ValidationError("tensor-empty");
  Mat m = parts[0].matrix();
  std::vector<int> dims = parts[0].dims();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    m = kron(m, parts[k].matrix());
    dims.insert(dims.end(), parts[k].dims().begin(), parts[k].dims().end());
  }
  return DensityOp(std::move(m), std::move(dims));
}

/// Reorder tensor factors: new subsystem k is old subsystem perm[k].
inline Mat permute_subsystems(const Mat& m, const std::vector<int>& dims,
                              const std::vector<int>& perm) {
  const std::size_t k = dims.size();
  if (perm.size() != k) throw ValidationError("perm-size");
  std::vector<int> newDims(k);
  for (std::size_t i = 0; i < k; ++i) newDims[i] = dims[perm[i]];
  std::vector<std::size_t> strideOld(k, 1), strideNew(k, 1);
  for (std::size_t i = k; i-- > 1;) strideOld[i - 1] = strideOld[i] * dims[i];
  for (std::size_t i = k; i-- > 1;) strideNew[i - 1] = strideNew[i] * newDims[i];
  const auto dim = static_cast<std::size_t>(m.rows());
  std::vector<std::size_t> map(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    std::size_t old = 0;
    std::size_t rem = r;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t digit = rem / strideNew[i];
      rem %= strideNew[i];
      old += digit * strideOld[perm[i]];
    }
    map[r] = old;
  }
  Mat out(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) out(r, c) = m(map[r], map[c]);
  return out;
}

inline DensityOp partial_trace(const DensityOp& rho, const std::vector<int>& keep) {
  const auto& dims = rho.dims();
  const std::size_t k = dims.size();
  std::vector<bool> keepMask(k, false);
  for (int idx : keep) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= k || keepMask[idx])
      throw ValidationError("keep-set", "keep indices must be distinct subsystem indices");
    keepMask[idx] = true;
  }
  if (keep.empty()) throw ValidationError("keep-set", "must keep at least one subsystem");
  std::vector<int> sortedKeep(keep.begin(), keep.end());
  std::sort(sortedKeep.begin(), sortedKeep.end());

  std::vector<std::size_t> stride(k, 1);
  for (std::size_t i = k; i-- > 1;) stride[i - 1] = stride[i] * dims[i];

  std::vector<int> keptDims, tracedIdx;
  for (std::size_t i = 0; i < k; ++i)
    (keepMask[i] ? keptDims.push_back(dims[i]) : tracedIdx.push_back(static_cast<int>(i)));

  std::size_t keptDim = dim_product(keptDims);
  std::size_t trDim = 1;
  for (int t : tracedIdx) trDim *= static_cast<std::size_t>(dims[t]);

  auto keptOffset = [&](std::size_t flat) {
    std::size_t off = 0;
    for (std::size_t i = sortedKeep.size(); i-- > 0;) {
      int sys = sortedKeep[i];
      off += (flat % dims[sys]) * stride[sys];
      flat /= dims[sys];
    }
    return off;
  };
  auto tracedOffset = [&](std::size_t flat) {
    std::size_t off = 0;
    for (std::size_t i = tracedIdx.size(); i-- > 0;) {
      int sys = tracedIdx[i];
      off += (flat % dims[sys]) * stride[sys];
      flat /= dims[sys];
    }
    return off;
  };

  Mat out = Mat::Zero(keptDim, keptDim);
  const Mat& m = rho.matrix();
  for (std::size_t t = 0; t < trDim; ++t) {
    std::size_t to = tracedOffset(t);
    for (std::size_t r = 0; r < keptDim; ++r) {
      std::size_t ro = keptOffset(r) + to;
      for (std::size_t c = 0; c < keptDim; ++c) out(r, c) += m(ro, keptOffset(c) + to);
    }
  }
  return DensityOp(std::move(out), std::move(keptDims));
}

/// Sum of singular values. Hermitian inputs take the |eigenvalue| route,
/// which is what the 1e-12 identities in the tests rely on.
inline double trace_norm(const Mat& op) {
  if (op.rows() != op.cols()) throw ValidationError("trace-norm-shape", "matrix must be square");
  if (op.rows() == 0) return 0.0;
  if ((op - op.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, op.cwiseAbs().maxCoeff())) {
    Eigen::SelfAdjointEigenSolver<Mat> es((op + op.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(op.adjoint() * op, Eigen::EigenvaluesOnly);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    sum += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return sum;
}

inline double trace_distance(const DensityOp& a, const DensityOp& b) {
  if (a.dim() != b.dim()) throw ValidationError("dims-mismatch");
  return trace_norm(a.matrix() - b.matrix());
}

inline Mat hermitian_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es((m + m.adjoint()) / 2.0);
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

/// Uhlmann fidelity tr sqrt(sqrt(rho0) rho1 sqrt(rho0)).
inline double fidelity(const DensityOp& rho0, const DensityOp& rho1) {
  if (rho0.dims() != rho1.dims()) throw ValidationError("dims-mismatch");
  Mat s = hermitian_sqrt(rho0.matrix());
  Mat inner = s * rho1.matrix() * s;
  Eigen::SelfAdjointEigenSolver<Mat> es((inner + inner.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  double f = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    f += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return std::min(f, 1.0 + 10 * kValidationTol);
}

struct PolarResult {
  Mat U;     // unitary with L * U = absL
  Mat absL;  // (L L^dagger)^(1/2)
};

/// Polar factorization L = absL * U^dagger via the eigendecomposition of
/// L L^dagger plus a solve on the column space. Rank-deficient input gets an
/// orthonormal completion on the null space (non-unique; this one is the
/// deterministic Householder choice). |tr(L U)| = tr(absL) by construction.
inline PolarResult polar_unitary(const Mat& L) {
  if (L.rows() != L.cols()) throw ValidationError("polar-shape", "matrix must be square");
  const Eigen::Index n = L.rows();
  if (n == 0) return {Mat::Identity(0, 0), Mat::Identity(0, 0)};

  Eigen::SelfAdjointEigenSolver<Mat> es(L * L.adjoint());
  // eigenvalues ascending; flip to put the column space first
  Eigen::VectorXd d = es.eigenvalues().reverse();
  Mat Q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) Q.col(i) = es.eigenvectors().col(n - 1 - i);

  Eigen::VectorXd sv = d.cwiseMax(0.0).cwiseSqrt();
  double cutoff = kRankCutoff * (sv.size() ? sv(0) : 0.0);
  Eigen::Index r = 0;
  while (r < n && sv(r) > cutoff) ++r;

  Mat absL = Q * sv.asDiagonal() * Q.adjoint();

  // columns X_i = L^dagger q_i / s_i form an orthonormal set spanning the row space
  Mat X(n, r);
  for (Eigen::Index i = 0; i < r; ++i) X.col(i) = L.adjoint() * Q.col(i) / sv(i);

  Mat cols(n, n);
  cols.leftCols(r) = X;
  if (r < n) {
    if (r == 0) {
      cols = Mat::Identity(n, n);
    } else {
      Eigen::HouseholderQR<Mat> qr(X);
      Mat full = qr.householderQ();
      cols.rightCols(n - r) = full.rightCols(n - r);
    }
  }
  // U^dagger = sum_i q_i x_i^dagger (+ completion)  =>  U = cols * Q^dagger
  Mat U = cols * Q.adjoint();
  return {std::move(U), std::move(absL)};
}

/// Nearest unitary in Frobenius norm (the unitary polar factor).
inline Mat nearest_unitary(const Mat& m) { return polar_unitary(m).U.adjoint(); }

inline std::vector<double> born_probabilities(const Ket& state, const MeasurementBasis& basis) {
  if (basis.dim() != state.size()) throw ValidationError("dims-mismatch");
  std::vector<double> p(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k) p[k] = std::norm(basis.vector(k).overlap(state));
  return p;
}

inline std::vector<double> born_probabilities(const DensityOp& state, const MeasurementBasis& basis) {
  if (basis.dim() != state.dim()) throw ValidationError("dims-mismatch");
  std::vector<double> p(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const Vec& v = basis.vector(k).amplitudes();
    p[k] = std::max(0.0, (v.adjoint() * state.matrix() * v)(0).real());
  }
  return p;
}

inline std::size_t sample_discrete(const std::vector<double>& probs, RngStream& rng) {
  double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (total < 1.0 - kValidationTol)
    throw ValidationError("basis-incomplete", "outcome probabilities do not sum to 1");
  double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

template <typename StateT>
std::size_t measure_sample(const StateT& state, const MeasurementBasis& basis, RngStream& rng) {
  return sample_discrete(born_probabilities(state, basis), rng);
}

// ---------------------------------------------------------------------------
// Haar sampling

inline Ket haar_ket(const std::vector<int>& dims, RngStream& rng) {
  auto d = static_cast<Eigen::Index>(dim_product(dims));
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = Cx(rng.normal(), rng.normal());
  return Ket(v / v.norm(), dims);
}

inline Mat haar_unitary(int n, RngStream& rng) {
  Mat z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = Cx(rng.normal(), rng.normal());
  Eigen::HouseholderQR<Mat> qr(z);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    Cx rd = r(i, i);
    q.col(i) *= (std::abs(rd) > 0 ? rd / std::abs(rd) : Cx(1, 0));
  }
  return q;
}

inline DensityOp haar_density(const std::vector<int>& dims, int mixture, RngStream& rng) {
  auto d = static_cast<Eigen::Index>(dim_product(dims));
  Mat m = Mat::Zero(d, d);
  for (int k = 0; k < mixture; ++k) {
    Ket psi = haar_ket(dims, rng);
    m += projector(psi.amplitudes()) / static_cast<double>(mixture);
  }
  return DensityOp(std::move(m), dims);
}

}  // namespace qbc
