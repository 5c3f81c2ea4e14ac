#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ethtrade/block.hpp"
#include "ethtrade/error.hpp"
#include "ethtrade/linalg.hpp"

namespace ethtrade {

// Largest chain built with dense storage unless explicitly overridden.
inline constexpr int kDefaultSiteLimit = 14;

// Periodic Ising chain  H = sum_k ( -Z_k Z_{k+1} + g X_k + h Z_k ).
struct ChainSpec {
  int sites = 0;
  double g = 1.05;
  double h = 0.0;
  bool allow_large = false;

  std::size_t dim() const { return std::size_t{1} << sites; }

  void validate() const {
    require(sites >= 2, ErrorCode::InvalidSpec, "chain needs at least 2 sites");
    require(std::isfinite(g) && std::isfinite(h), ErrorCode::InvalidSpec, "couplings must be finite");
    if (sites > kDefaultSiteLimit && !allow_large) {
      fail(ErrorCode::DimensionLimit, "N=" + std::to_string(sites) + " exceeds the dense limit of " +
                                          std::to_string(kDefaultSiteLimit));
    }
    require(sites <= 30, ErrorCode::DimensionLimit, "basis index overflow");
  }
};

// Bit position (from the least significant end) that stores `site`.
inline int site_bit(int site, int n) { return n - site; }

// +1 for spin up (bit 0), -1 for spin down (bit 1).
inline int z_value(std::size_t idx, int site, int n) { return ((idx >> site_bit(site, n)) & 1u) ? -1 : 1; }

// The Hamiltonian is real symmetric; entries are stored as such.
struct DenseHermitian {
  Matrix entries;

  std::size_t dim() const { return static_cast<std::size_t>(entries.rows()); }
};

inline DenseHermitian build_hamiltonian(const ChainSpec& spec) {
  spec.validate();
  const int n = spec.sites;
  const std::size_t dim = spec.dim();
  DenseHermitian out{Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
  for (std::size_t idx = 0; idx < dim; ++idx) {
    double diag = 0.0;
    for (int k = 1; k <= n; ++k) {
      const int next = k % n + 1;
      diag += -z_value(idx, k, n) * z_value(idx, next, n) + spec.h * z_value(idx, k, n);
      const std::size_t flipped = idx ^ (std::size_t{1} << site_bit(k, n));
      out.entries(static_cast<Eigen::Index>(flipped), static_cast<Eigen::Index>(idx)) += spec.g;
    }
    out.entries(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(idx)) += diag;
  }
  return out;
}

// Cyclic shift by one site, |s1 s2 ... sN> -> |sN s1 ... s(N-1)>, as an
// index map: result[old] = new.
inline std::vector<std::size_t> translation_operator(int n) {
  require(n >= 2, ErrorCode::InvalidSpec, "translation needs N >= 2");
  const std::size_t dim = std::size_t{1} << n;
  std::vector<std::size_t> perm(dim);
  for (std::size_t idx = 0; idx < dim; ++idx) perm[idx] = (idx >> 1) | ((idx & 1u) << (n - 1));
  return perm;
}

inline std::vector<std::size_t> compose(const std::vector<std::size_t>& outer,
                                        const std::vector<std::size_t>& inner) {
  std::vector<std::size_t> out(inner.size());
  for (std::size_t k = 0; k < inner.size(); ++k) out[k] = outer[inner[k]];
  return out;
}

// Applies the index map to a state: (P v)[perm[k]] = v[k].
template <class Vec>
Vec permute_state(const std::vector<std::size_t>& perm, const Vec& v) {
  Vec out(v.size());
  for (std::size_t k = 0; k < perm.size(); ++k) out[static_cast<Eigen::Index>(perm[k])] = v[static_cast<Eigen::Index>(k)];
  return out;
}

struct SiteOperator {
  Eigen::Matrix2cd matrix;
  int site = 1;
};

inline Eigen::Matrix2cd pauli_x() {
  Eigen::Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}

inline Eigen::Matrix2cd pauli_y() {
  Eigen::Matrix2cd m;
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

inline Eigen::Matrix2cd pauli_z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}

// Matrix-free view of a block operator tensored with the identity on the
// rest of the chain. The block operator's row/column index uses the block's
// sites in ascending order, first site most significant.
class EmbeddedOperator {
 public:
  EmbeddedOperator(CMatrix op, BlockSpec block, int n) : op_(std::move(op)), block_(std::move(block)), n_(n) {
    block_.validate(n);
    require(op_.rows() == static_cast<Eigen::Index>(block_.dim()) && op_.cols() == op_.rows(),
            ErrorCode::InvalidSpec, "operator shape does not match block");
    for (int s : block_.sites) mask_ |= std::size_t{1} << site_bit(s, n);
  }

  std::size_t dim() const { return std::size_t{1} << n_; }
  const CMatrix& local() const { return op_; }
  const BlockSpec& block() const { return block_; }

  // <a| O |b>
  Complex element(std::size_t a, std::size_t b) const {
    if ((a & ~mask_) != (b & ~mask_)) return 0.0;
    return op_(static_cast<Eigen::Index>(local_index(a)), static_cast<Eigen::Index>(local_index(b)));
  }

  template <class Derived>
  Eigen::VectorXcd apply(const Eigen::MatrixBase<Derived>& v) const {
    const std::size_t d = dim();
    const std::size_t dl = block_.dim();
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t b = 0; b < d; ++b) {
      const Complex vb = v[static_cast<Eigen::Index>(b)];
      if (vb == Complex(0.0)) continue;
      const std::size_t lb = local_index(b);
      const std::size_t base = b & ~mask_;
      for (std::size_t la = 0; la < dl; ++la) {
        const Complex o = op_(static_cast<Eigen::Index>(la), static_cast<Eigen::Index>(lb));
        if (o == Complex(0.0)) continue;
        out[static_cast<Eigen::Index>(base | scatter(la))] += o * vb;
      }
    }
    return out;
  }

  // Dense D_N x D_N matrix; only for small oracle-scale chains.
  CMatrix dense() const {
    require(n_ <= 12, ErrorCode::DimensionLimit, "dense embedding limited to N <= 12");
    const auto d = static_cast<Eigen::Index>(dim());
    CMatrix out(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b)
        out(a, b) = element(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    return out;
  }

 private:
  std::size_t local_index(std::size_t idx) const {
    std::size_t out = 0;
    for (int s : block_.sites) out = (out << 1) | ((idx >> site_bit(s, n_)) & 1u);
    return out;
  }

  std::size_t scatter(std::size_t local) const {
    std::size_t out = 0;
    const int m = static_cast<int>(block_.sites.size());
    for (int k = 0; k < m; ++k) {
      const std::size_t bit = (local >> (m - 1 - k)) & 1u;
      out |= bit << site_bit(block_.sites[static_cast<std::size_t>(k)], n_);
    }
    return out;
  }

  CMatrix op_;
  BlockSpec block_;
  int n_;
  std::size_t mask_ = 0;
};

inline EmbeddedOperator embed_site_operator(const SiteOperator& op, int n) {
  require(op.site >= 1 && op.site <= n, ErrorCode::InvalidSpec, "site out of range");
  require(op.matrix.allFinite(), ErrorCode::InvalidSpec, "site operator has non-finite entries");
  return EmbeddedOperator(CMatrix(op.matrix), BlockSpec({op.site}), n);
}

inline EmbeddedOperator embed_block_operator(const CMatrix& op, const BlockSpec& block, int n) {
  return EmbeddedOperator(op, block, n);
}

}  // namespace ethtrade
