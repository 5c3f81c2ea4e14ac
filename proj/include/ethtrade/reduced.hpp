#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ethtrade/block.hpp"
#include "ethtrade/error.hpp"
#include "ethtrade/linalg.hpp"
#include "ethtrade/spectral.hpp"

namespace ethtrade {

// sigma^{ij}_B = Tr_{rest} |E_i><E_j|. Real because the eigenvectors are real.
struct TransitionBlock {
  Matrix matrix;
  std::size_t i = 0;
  std::size_t j = 0;
  BlockSpec block;
};

// |E_i> reshaped to kept x rest, M(b, c) = <b c|E_i>.
inline Matrix reshape_state(const SiteLayout& layout, const Spectrum& s, std::size_t i) {
  const auto kd = static_cast<Eigen::Index>(layout.kept_dim());
  const auto rd = static_cast<Eigen::Index>(layout.rest_dim());
  const auto col = s.state(i);
  Matrix m(kd, rd);
  for (Eigen::Index b = 0; b < kd; ++b)
    for (Eigen::Index c = 0; c < rd; ++c)
      m(b, c) = col[static_cast<Eigen::Index>(layout.full(static_cast<std::size_t>(b), static_cast<std::size_t>(c)))];
  return m;
}

inline Matrix transition_matrix(const SiteLayout& layout, const Spectrum& s, std::size_t i, std::size_t j) {
  const Matrix mi = reshape_state(layout, s, i);
  if (i == j) return mi * mi.transpose();
  return mi * reshape_state(layout, s, j).transpose();
}

inline TransitionBlock reduce_transition(const Spectrum& s, std::size_t i, std::size_t j, const BlockSpec& block) {
  block.validate(s.sites);
  require(i < s.dim() && j < s.dim(), ErrorCode::InvalidSpec, "eigenstate index out of range");
  const SiteLayout layout(block.sites, s.sites);
  return {transition_matrix(layout, s, i, j), i, j, block};
}

// sum_i p_i sigma^{ii} over the kept sites of `layout`.
inline Matrix reduce_weighted(const SiteLayout& layout, const Spectrum& s, const Vector& weights) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (weights[i] != 0.0) support.push_back(i);
  const auto kd = static_cast<Eigen::Index>(layout.kept_dim());
  const auto rd = static_cast<Eigen::Index>(layout.rest_dim());
  const auto k = static_cast<Eigen::Index>(support.size());
  std::vector<Matrix> rows(static_cast<std::size_t>(kd), Matrix(rd, k));
  for (Eigen::Index col = 0; col < k; ++col) {
    const Eigen::Index i = support[static_cast<std::size_t>(col)];
    const double amp = std::sqrt(weights[i]);
    for (Eigen::Index b = 0; b < kd; ++b)
      for (Eigen::Index c = 0; c < rd; ++c)
        rows[static_cast<std::size_t>(b)](c, col) =
            amp * s.vectors(static_cast<Eigen::Index>(layout.full(static_cast<std::size_t>(b), static_cast<std::size_t>(c))), i);
  }
  Matrix rho(kd, kd);
  for (Eigen::Index a = 0; a < kd; ++a)
    for (Eigen::Index b = a; b < kd; ++b) {
      rho(a, b) = rows[static_cast<std::size_t>(a)].cwiseProduct(rows[static_cast<std::size_t>(b)]).sum();
      rho(b, a) = rho(a, b);
    }
  return rho;
}

inline Matrix reduce_ensemble(const Spectrum& s, const EnsembleState& ens, const BlockSpec& block) {
  block.validate(s.sites);
  require(ens.dim() == s.dim(), ErrorCode::InvalidSpec, "ensemble does not match spectrum");
  return reduce_weighted(SiteLayout(block.sites, s.sites), s, ens.weights);
}

// Density matrix on a ∪ b, with a's sites (ascending) before b's sites (ascending).
inline Matrix reduce_joint(const Spectrum& s, const EnsembleState& ens, const BlockSpec& a, const BlockSpec& b) {
  a.validate(s.sites);
  b.validate(s.sites);
  require(disjoint(a, b), ErrorCode::InvalidSpec, "joint reduction needs disjoint blocks");
  std::vector<int> ordered = a.sites;
  ordered.insert(ordered.end(), b.sites.begin(), b.sites.end());
  return reduce_weighted(SiteLayout(ordered, s.sites), s, ens.weights);
}

// Tr_b of a joint density matrix whose first factor has dimension dim_a.
inline Matrix trace_out_second(const Matrix& joint, std::size_t dim_a) {
  const auto da = static_cast<Eigen::Index>(dim_a);
  const Eigen::Index db = joint.rows() / da;
  Matrix out = Matrix::Zero(da, da);
  for (Eigen::Index x = 0; x < da; ++x)
    for (Eigen::Index y = 0; y < da; ++y)
      for (Eigen::Index c = 0; c < db; ++c) out(x, y) += joint(x * db + c, y * db + c);
  return out;
}

inline Matrix trace_out_first(const Matrix& joint, std::size_t dim_a) {
  const auto da = static_cast<Eigen::Index>(dim_a);
  const Eigen::Index db = joint.rows() / da;
  Matrix out = Matrix::Zero(db, db);
  for (Eigen::Index x = 0; x < db; ++x)
    for (Eigen::Index y = 0; y < db; ++y)
      for (Eigen::Index c = 0; c < da; ++c) out(x, y) += joint(c * db + x, c * db + y);
  return out;
}

inline constexpr double kPsdFloor = 1e-12;

// Natural-log entropy of a density matrix.
inline double von_neumann_entropy(const Matrix& rho) {
  require(std::abs(rho.trace() - 1.0) <= 1e-8, ErrorCode::InvalidSpec, "density matrix trace is not 1");
  const auto eig = small_symmetric_eigen(rho);
  double s = 0.0;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    double lambda = eig.values[k];
    if (lambda < -kPsdFloor) fail(ErrorCode::InternalConsistency, "density matrix is not positive semidefinite");
    if (lambda < 1e-14) continue;
    s -= lambda * std::log(lambda);
  }
  return s;
}

inline double mutual_information(const Spectrum& s, const EnsembleState& ens, const BlockSpec& a,
                                 const BlockSpec& b) {
  const Matrix joint = reduce_joint(s, ens, a, b);
  const double i = von_neumann_entropy(trace_out_second(joint, a.dim())) +
                   von_neumann_entropy(trace_out_first(joint, a.dim())) - von_neumann_entropy(joint);
  return clamp_nonnegative(i, 1e-10, "mutual information");
}

}  // namespace ethtrade
