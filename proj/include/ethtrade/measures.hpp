#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ethtrade/block.hpp"
#include "ethtrade/error.hpp"
#include "ethtrade/linalg.hpp"
#include "ethtrade/parallel.hpp"
#include "ethtrade/reduced.hpp"
#include "ethtrade/spectral.hpp"
#include "ethtrade/spinchain.hpp"

namespace ethtrade {

inline Eigen::Index ix(std::size_t k) { return static_cast<Eigen::Index>(k); }

enum class RankPolicy { strict, pseudo };

// Tolerance every trade-off residual is held to.
inline double identity_tolerance(double rhs) { return 1e-8 * std::max(1.0, std::abs(rhs)); }

// Reference local state rho_loc with its spectral data. Under the pseudo
// policy, eigenvalues below the cutoff are projected out and `projected` is set.
struct LocalReference {
  Matrix rho;
  Vector probs;  // p'_alpha, ascending
  Matrix basis;  // column alpha is |alpha>
  Vector inv_probs;  // 1/p'_alpha on the support, 0 on projected modes
  Matrix inverse;
  bool projected = false;

  std::size_t dim() const { return static_cast<std::size_t>(rho.rows()); }

  // Tr(rho^{-1}) - 1
  double rhs() const {
    CompensatedSum s;
    for (Eigen::Index a = 0; a < inv_probs.size(); ++a) s.add(inv_probs[a]);
    s.add(-1.0);
    return s.value();
  }

  // rho^power X rho^power evaluated in the eigenbasis.
  Matrix rescale(const Matrix& x, double power) const {
    Vector f(probs.size());
    for (Eigen::Index a = 0; a < probs.size(); ++a) {
      f[a] = inv_probs[a] == 0.0 ? 0.0 : std::pow(probs[a], power);
    }
    const Matrix xe = basis.transpose() * x * basis;
    return basis * (f.asDiagonal() * xe * f.asDiagonal()) * basis.transpose();
  }

  // Sum of |inverse| entries, a scale for round-off tolerances.
  double inverse_scale() const { return std::max(1.0, inv_probs.sum()); }
};

inline LocalReference make_reference(const Matrix& rho, RankPolicy policy = RankPolicy::strict) {
  require(rho.rows() == rho.cols() && rho.rows() > 0, ErrorCode::InvalidSpec, "local state must be square");
  require(max_abs(rho - rho.transpose()) <= 1e-10 * std::max(1.0, max_abs(rho)), ErrorCode::InvalidSpec,
          "local state is not Hermitian");
  require(std::abs(rho.trace() - 1.0) <= 1e-8, ErrorCode::InvalidSpec, "local state trace is not 1");
  auto eig = small_symmetric_eigen(rho);
  LocalReference ref;
  ref.rho = 0.5 * (rho + rho.transpose());
  ref.probs = eig.values;
  ref.basis = eig.vectors;
  const double pmax = ref.probs.maxCoeff();
  const double cutoff = static_cast<double>(rho.rows()) * 2.2e-16 * pmax;
  ref.inv_probs = Vector::Zero(ref.probs.size());
  for (Eigen::Index a = 0; a < ref.probs.size(); ++a) {
    if (ref.probs[a] < cutoff) {
      if (policy == RankPolicy::strict) {
        fail(ErrorCode::SingularLocalState,
             "local state eigenvalue " + std::to_string(ref.probs[a]) + " below cutoff " + std::to_string(cutoff));
      }
      ref.projected = true;
      continue;
    }
    ref.inv_probs[a] = 1.0 / ref.probs[a];
  }
  ref.inverse = ref.basis * ref.inv_probs.asDiagonal() * ref.basis.transpose();
  ref.inverse = 0.5 * (ref.inverse + ref.inverse.transpose());
  return ref;
}

inline double tradeoff_rhs(const Matrix& rho_loc, RankPolicy policy = RankPolicy::strict) {
  return make_reference(rho_loc, policy).rhs();
}

// O_ij = rho^{-1/2} sigma^{ij} rho^{-1/2}.
struct RescaledObservable {
  Matrix matrix;       // computational basis of the block
  Matrix eigenbasis;   // <alpha|O|beta> = <alpha|sigma|beta> / sqrt(p'_alpha p'_beta)
  std::size_t i = 0;
  std::size_t j = 0;
  bool projected = false;
};

inline RescaledObservable rescaled_observable(const TransitionBlock& sigma, const LocalReference& ref) {
  require(sigma.matrix.rows() == ref.rho.rows(), ErrorCode::InvalidSpec, "block and local state shapes differ");
  RescaledObservable out;
  out.i = sigma.i;
  out.j = sigma.j;
  out.projected = ref.projected;
  const Vector f = ref.inv_probs.cwiseSqrt();
  out.eigenbasis = f.asDiagonal() * (ref.basis.transpose() * sigma.matrix * ref.basis) * f.asDiagonal();
  out.matrix = ref.basis * out.eigenbasis * ref.basis.transpose();
  return out;
}

inline RescaledObservable rescaled_observable(const TransitionBlock& sigma, const Matrix& rho_loc,
                                              RankPolicy policy = RankPolicy::strict) {
  return rescaled_observable(sigma, make_reference(rho_loc, policy));
}

// Tr(sigma R sigma^T) - delta for a precomputed transition block.
inline double variance_closed_form(const Matrix& sigma, const LocalReference& ref, bool diagonal) {
  const double q = (sigma * ref.inverse * sigma.transpose()).trace() - (diagonal ? 1.0 : 0.0);
  return clamp_nonnegative(q, 1e-10 * ref.inverse_scale(), "variance measure");
}

// Per-eigenstate result of a full sweep over j.
struct SweepRow {
  std::size_t i = 0;
  double v_dg = 0.0;
  double v_off_sum = 0.0;  // compensated sum over j != i, ascending j
  double v_off_max = 0.0;
  std::size_t v_off_argmax = 0;

  double lhs() const { return v_dg + v_off_sum; }
};

struct SweepOptions {
  int workers = 1;
  std::size_t cache_budget_bytes = std::size_t{1} << 30;
};

// Evaluates V(i, j) = Tr(sigma_bar^{ij} R sigma_bar^{ij T}) - delta_ij for
// all j at once, where sigma_bar is the average of the transition blocks
// over `frames` (a single frame gives the plain local measure) and R the
// inverse of the reference state. Each frame's eigenvector matrix is
// row-permuted so the block index is the slow one; sigma for a chunk of
// rows i then comes from D_B^2 matrix products.
class TransitionSweep {
 public:
  TransitionSweep(const Spectrum& s, std::vector<BlockSpec> frames, LocalReference ref, SweepOptions opt = {})
      : spectrum_(&s), frames_(std::move(frames)), ref_(std::move(ref)), opt_(opt) {
    require(!frames_.empty(), ErrorCode::InvalidSpec, "sweep needs at least one block");
    for (const auto& f : frames_) {
      f.validate(s.sites);
      require(f.dim() == frames_.front().dim(), ErrorCode::InvalidSpec, "sweep blocks must have equal size");
      layouts_.emplace_back(f.sites, s.sites);
    }
    require(ref_.dim() == frames_.front().dim(), ErrorCode::InvalidSpec, "reference state has the wrong size");
  }

  const LocalReference& reference() const { return ref_; }
  const std::vector<BlockSpec>& frames() const { return frames_; }
  const Spectrum& spectrum() const { return *spectrum_; }
  double rhs() const { return ref_.rhs(); }

  Matrix sigma_bar(std::size_t i, std::size_t j) const {
    Matrix acc = transition_matrix(layouts_.front(), *spectrum_, i, j);
    for (std::size_t k = 1; k < layouts_.size(); ++k) acc += transition_matrix(layouts_[k], *spectrum_, i, j);
    return acc / static_cast<double>(layouts_.size());
  }

  double pair(std::size_t i, std::size_t j) const { return variance_closed_form(sigma_bar(i, j), ref_, i == j); }

  std::vector<SweepRow> rows(std::span<const std::size_t> indices) const {
    const std::size_t dim = spectrum_->dim();
    for (std::size_t i : indices) require(i < dim, ErrorCode::InvalidSpec, "eigenstate index out of range");
    const std::size_t chunk = chunk_size();
    const std::size_t nchunks = (indices.size() + chunk - 1) / chunk;
    const bool cache = frames_.size() * dim * dim * sizeof(double) <= opt_.cache_budget_bytes;
    if (cache && permuted_.empty()) {
      for (std::size_t k = 0; k < frames_.size(); ++k) permuted_.push_back(permuted(k));
    }
    std::vector<SweepRow> out(indices.size());
    parallel_for(nchunks, opt_.workers, [&](std::size_t c) {
      const std::size_t begin = c * chunk;
      const std::size_t end = std::min(indices.size(), begin + chunk);
      process_chunk(indices.subspan(begin, end - begin), cache, std::span(out).subspan(begin, end - begin));
    });
    return out;
  }

  std::vector<SweepRow> all_rows() const {
    std::vector<std::size_t> idx(spectrum_->dim());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return rows(idx);
  }

  SweepRow row(std::size_t i) const {
    const std::size_t one[] = {i};
    return rows(one).front();
  }

 private:
  std::size_t chunk_size() const {
    const std::size_t dim = spectrum_->dim();
    const std::size_t db = frames_.front().dim();
    const std::size_t target = (std::size_t{1} << 25) / (db * db * dim);
    return std::clamp<std::size_t>(target, 1, dim);
  }

  Matrix permuted(std::size_t k) const {
    const SiteLayout& layout = layouts_[k];
    const std::size_t dim = spectrum_->dim();
    const std::size_t rd = layout.rest_dim();
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic> perm(ix(dim));
    for (std::size_t b = 0; b < layout.kept_dim(); ++b)
      for (std::size_t c = 0; c < rd; ++c) perm.indices()[ix(layout.full(b, c))] = static_cast<int>(b * rd + c);
    return perm * spectrum_->vectors;
  }

  void process_chunk(std::span<const std::size_t> idx, bool cache, std::span<SweepRow> out) const {
    const std::size_t dim = spectrum_->dim();
    const auto db = ix(frames_.front().dim());
    const auto rd = ix(layouts_.front().rest_dim());
    const auto m = ix(idx.size());
    const double scale = 1.0 / static_cast<double>(frames_.size());
    std::vector<Matrix> s(static_cast<std::size_t>(db * db), Matrix::Zero(m, ix(dim)));
    Matrix local_perm;
    for (std::size_t k = 0; k < frames_.size(); ++k) {
      if (!cache) local_perm = permuted(k);
      const Matrix& p = cache ? permuted_[k] : local_perm;
      std::vector<Matrix> left(static_cast<std::size_t>(db), Matrix(rd, m));
      for (Eigen::Index a = 0; a < db; ++a)
        for (Eigen::Index r = 0; r < m; ++r)
          left[static_cast<std::size_t>(a)].col(r) = p.col(ix(idx[static_cast<std::size_t>(r)])).segment(a * rd, rd);
      for (Eigen::Index a = 0; a < db; ++a)
        for (Eigen::Index b = 0; b < db; ++b)
          s[static_cast<std::size_t>(a * db + b)].noalias() +=
              scale * left[static_cast<std::size_t>(a)].transpose() * p.middleRows(b * rd, rd);
    }
    const Matrix& inv = ref_.inverse;
    const double tol = 1e-10 * ref_.inverse_scale();
    std::vector<CompensatedSum> sums(static_cast<std::size_t>(m));
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = SweepRow{idx[r], 0.0, 0.0, -1.0, 0};
    std::vector<double> sig(static_cast<std::size_t>(db * db));
    for (Eigen::Index j = 0; j < ix(dim); ++j) {
      for (Eigen::Index r = 0; r < m; ++r) {
        for (std::size_t e = 0; e < sig.size(); ++e) sig[e] = s[e](r, j);
        double q = 0.0;
        for (Eigen::Index a = 0; a < db; ++a)
          for (Eigen::Index b = 0; b < db; ++b) {
            const double sab = sig[static_cast<std::size_t>(a * db + b)];
            if (sab == 0.0) continue;
            double t = 0.0;
            for (Eigen::Index c = 0; c < db; ++c) t += inv(b, c) * sig[static_cast<std::size_t>(a * db + c)];
            q += sab * t;
          }
        SweepRow& row = out[static_cast<std::size_t>(r)];
        if (static_cast<std::size_t>(j) == row.i) {
          row.v_dg = clamp_nonnegative(q - 1.0, tol, "diagonal variance");
        } else {
          const double v = clamp_nonnegative(q, tol, "off-diagonal variance");
          sums[static_cast<std::size_t>(r)].add(v);
          if (v > row.v_off_max) {
            row.v_off_max = v;
            row.v_off_argmax = static_cast<std::size_t>(j);
          }
        }
      }
    }
    for (Eigen::Index r = 0; r < m; ++r) {
      SweepRow& row = out[static_cast<std::size_t>(r)];
      row.v_off_sum = sums[static_cast<std::size_t>(r)].value();
      if (row.v_off_max < 0.0) row.v_off_max = 0.0;
    }
  }

  const Spectrum* spectrum_;
  std::vector<BlockSpec> frames_;
  std::vector<SiteLayout> layouts_;
  LocalReference ref_;
  SweepOptions opt_;
  mutable std::vector<Matrix> permuted_;
};

struct MeasureOptions {
  RankPolicy rank_policy = RankPolicy::strict;
  SweepOptions sweep;
};

inline LocalReference ensemble_reference(const Spectrum& s, const EnsembleState& ens, const BlockSpec& block,
                                         RankPolicy policy) {
  return make_reference(reduce_ensemble(s, ens, block), policy);
}

inline TransitionSweep local_sweep(const Spectrum& s, const EnsembleState& ens, const BlockSpec& block,
                                   const MeasureOptions& opt = {}) {
  return TransitionSweep(s, {block}, ensemble_reference(s, ens, block, opt.rank_policy), opt.sweep);
}

// V(rho_B, O_ij) through its closed form Tr(sigma^{ij} rho^{-1} sigma^{ij dagger}) - delta_ij.
inline double v_measure(const Spectrum& s, const EnsembleState& ens, std::size_t i, std::size_t j,
                        const BlockSpec& block, RankPolicy policy = RankPolicy::strict) {
  const LocalReference ref = ensemble_reference(s, ens, block, policy);
  return variance_closed_form(reduce_transition(s, i, j, block).matrix, ref, i == j);
}

// Tr[(A - <A>)^dagger rho (A - <A>)] on the full space.
inline double full_space_variance(const CMatrix& rho, const CMatrix& a) {
  const Complex mean = (a * rho).trace();
  const CMatrix shifted = a - mean * CMatrix::Identity(a.rows(), a.cols());
  return (shifted.adjoint() * rho * shifted).trace().real();
}

// Definitional evaluation of V(rho_B, O_ij): builds O_ij, embeds it on the
// full chain, and evaluates the variance against the full density matrix.
inline double v_measure_bruteforce(const Spectrum& s, const EnsembleState& ens, std::size_t i, std::size_t j,
                                   const BlockSpec& block, RankPolicy policy = RankPolicy::strict) {
  require(s.sites <= 8, ErrorCode::DimensionLimit, "brute-force variance limited to N <= 8");
  const auto o = rescaled_observable(reduce_transition(s, i, j, block), reduce_ensemble(s, ens, block), policy);
  const CMatrix a = embed_block_operator(o.matrix.cast<Complex>(), block, s.sites).dense();
  const CMatrix rho = (s.vectors * ens.weights.asDiagonal() * s.vectors.transpose()).cast<Complex>();
  return full_space_variance(rho, a);
}

// |Tr[A (sigma - delta rho)]|
inline double d1_local(const Matrix& sigma, const Matrix& rho_loc, const CMatrix& observable, bool diagonal) {
  Matrix diff = sigma;
  if (diagonal) diff -= rho_loc;
  return std::abs((observable * diff.cast<Complex>()).trace());
}

inline double d1_measure(const Spectrum& s, const EnsembleState& ens, std::size_t i, std::size_t j,
                         const CMatrix& observable, const BlockSpec& block) {
  require(is_hermitian(observable), ErrorCode::InvalidSpec, "observable must be Hermitian");
  require(observable.rows() == ix(block.dim()), ErrorCode::InvalidSpec, "observable does not match block");
  return d1_local(reduce_transition(s, i, j, block).matrix, reduce_ensemble(s, ens, block), observable, i == j);
}

// Half the trace norm of (sigma - delta rho).
inline double d2_measure(const Matrix& sigma, const Matrix& rho_loc, bool is_diagonal) {
  require(sigma.rows() == rho_loc.rows() && sigma.cols() == rho_loc.cols(), ErrorCode::InvalidSpec,
          "shape mismatch in trace distance");
  return 0.5 * trace_norm(is_diagonal ? Matrix(sigma - rho_loc) : sigma);
}

inline double d2_measure(const TransitionBlock& sigma, const Matrix& rho_loc, bool is_diagonal) {
  return d2_measure(sigma.matrix, rho_loc, is_diagonal);
}

inline double d3_measure(double variance) { return std::sqrt(std::max(0.0, variance)); }

struct TradeoffReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double v_dg = 0.0;
  double v_off_sum = 0.0;

  bool holds() const { return std::abs(residual) <= identity_tolerance(rhs); }
};

inline TradeoffReport make_tradeoff(const SweepRow& row, double rhs) {
  CompensatedSum lhs;
  lhs.add(row.v_dg);
  lhs.add(row.v_off_sum);
  return {lhs.value(), rhs, lhs.value() - rhs, row.v_dg, row.v_off_sum};
}

inline TradeoffReport tradeoff_report(const Spectrum& s, const EnsembleState& ens, std::size_t i,
                                      const BlockSpec& block, const MeasureOptions& opt = {}) {
  const TransitionSweep sweep = local_sweep(s, ens, block, opt);
  return make_tradeoff(sweep.row(i), sweep.rhs());
}

struct OffdiagStats {
  double v_dg = 0.0;
  double v_off_sum = 0.0;
  double v_off_avg = 0.0;
  double f_ratio = 0.0;  // +inf when v_off_avg == 0
  double v_dg_from_ratio = 0.0;
};

// f = V_dg / V_off_avg, and V_dg recovered as f/(f + D_N - 1) * rhs.
inline OffdiagStats make_offdiag(const SweepRow& row, std::size_t dim, double rhs) {
  OffdiagStats out;
  out.v_dg = row.v_dg;
  out.v_off_sum = row.v_off_sum;
  out.v_off_avg = row.v_off_sum / static_cast<double>(dim - 1);
  out.f_ratio = out.v_off_avg > 0.0 ? out.v_dg / out.v_off_avg : std::numeric_limits<double>::infinity();
  if (std::isinf(out.f_ratio)) {
    out.v_dg_from_ratio = rhs;
  } else {
    out.v_dg_from_ratio = out.f_ratio / (out.f_ratio + static_cast<double>(dim) - 1.0) * rhs;
  }
  return out;
}

inline OffdiagStats offdiag_stats(const Spectrum& s, const EnsembleState& ens, std::size_t i, const BlockSpec& block,
                                  const MeasureOptions& opt = {}) {
  const TransitionSweep sweep = local_sweep(s, ens, block, opt);
  return make_offdiag(sweep.row(i), s.dim(), sweep.rhs());
}

struct Typicality {
  double mean_dg = 0.0;
  double mean_off = 0.0;  // sum_i p_i V_off^i with V_off^i the per-state average
  double rhs = 0.0;
  double residual = 0.0;  // mean_dg + (D_N - 1) mean_off - rhs
};

// Indices carrying nonzero weight.
inline std::vector<std::size_t> support_of(const EnsembleState& ens) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ens.dim(); ++i)
    if (ens.weight(i) != 0.0) out.push_back(i);
  return out;
}

inline Typicality make_typicality(const EnsembleState& ens, std::span<const SweepRow> rows, double rhs) {
  const double d = static_cast<double>(ens.dim());
  CompensatedSum dg, off;
  for (const auto& row : rows) {
    dg.add(ens.weight(row.i) * row.v_dg);
    off.add(ens.weight(row.i) * row.v_off_sum / (d - 1.0));
  }
  Typicality t{dg.value(), off.value(), rhs, 0.0};
  CompensatedSum res;
  res.add(t.mean_dg);
  res.add((d - 1.0) * t.mean_off);
  res.add(-rhs);
  t.residual = res.value();
  return t;
}

inline Typicality typicality(const Spectrum& s, const EnsembleState& ens, const BlockSpec& block,
                             const MeasureOptions& opt = {}) {
  const TransitionSweep sweep = local_sweep(s, ens, block, opt);
  const auto idx = support_of(ens);
  const auto rows = sweep.rows(idx);
  return make_typicality(ens, rows, sweep.rhs());
}

struct TailPoint {
  double epsilon = 0.0;
  double tail = 0.0;             // P(d1 >= epsilon) under the ensemble weights
  double bound_squared = 0.0;    // Delta^2 / epsilon^2
  double bound_chebyshev = 0.0;  // Delta / epsilon^2
};

struct WeakEth {
  double delta = 0.0;  // sum_i p_i d1(i,i)^2
  std::vector<TailPoint> tails;
};

inline WeakEth weak_eth_delta(const Spectrum& s, const EnsembleState& ens, const CMatrix& observable,
                              const BlockSpec& block, std::span<const double> epsilons) {
  require(is_hermitian(observable), ErrorCode::InvalidSpec, "observable must be Hermitian");
  require(observable.rows() == ix(block.dim()), ErrorCode::InvalidSpec, "observable does not match block");
  block.validate(s.sites);
  const SiteLayout layout(block.sites, s.sites);
  const Matrix rho = reduce_weighted(layout, s, ens.weights);
  const auto idx = support_of(ens);
  std::vector<double> d1(idx.size());
  CompensatedSum delta;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    d1[k] = d1_local(transition_matrix(layout, s, idx[k], idx[k]), rho, observable, true);
    delta.add(ens.weight(idx[k]) * d1[k] * d1[k]);
  }
  WeakEth out{delta.value(), {}};
  for (double eps : epsilons) {
    require(eps > 0.0, ErrorCode::InvalidSpec, "epsilon must be positive");
    CompensatedSum tail;
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (d1[k] >= eps) tail.add(ens.weight(idx[k]));
    out.tails.push_back({eps, tail.value(), out.delta * out.delta / (eps * eps), out.delta / (eps * eps)});
  }
  return out;
}

enum class ShellWeighting { uniform, probability };

struct ShellStats {
  std::size_t shell_size = 0;
  double vbar_dg = 0.0;
  double vbar_off = 0.0;  // average over the shell of the per-state off-diagonal average
  double v_dg_max = 0.0;
  double v_off_max = 0.0;
  std::size_t argmax_dg = 0;
  std::size_t argmax_off_i = 0;
  std::size_t argmax_off_j = 0;
};

// Rows must be the sweep rows for exactly the shell members.
inline ShellStats make_shell_stats(std::span<const SweepRow> rows, std::size_t dim, const EnsembleState* weights,
                                   ShellWeighting weighting) {
  require(!rows.empty(), ErrorCode::ShellEmpty, "shell statistics need a non-empty shell");
  ShellStats out;
  out.shell_size = rows.size();
  CompensatedSum dg, off, norm;
  out.v_dg_max = -1.0;
  out.v_off_max = -1.0;
  for (const auto& row : rows) {
    double w = 1.0;
    if (weighting == ShellWeighting::probability) {
      require(weights != nullptr, ErrorCode::InvalidSpec, "probability weighting needs an ensemble");
      w = weights->weight(row.i);
    }
    norm.add(w);
    dg.add(w * row.v_dg);
    off.add(w * row.v_off_sum / static_cast<double>(dim - 1));
    if (row.v_dg > out.v_dg_max) {
      out.v_dg_max = row.v_dg;
      out.argmax_dg = row.i;
    }
    if (row.v_off_max > out.v_off_max) {
      out.v_off_max = row.v_off_max;
      out.argmax_off_i = row.i;
      out.argmax_off_j = row.v_off_argmax;
    }
  }
  require(norm.value() > 0.0, ErrorCode::InvalidSpec, "shell carries no ensemble weight");
  out.vbar_dg = dg.value() / norm.value();
  out.vbar_off = off.value() / norm.value();
  return out;
}

inline ShellStats shell_stats(const Spectrum& s, const EnsembleState& ens, const EnergyShell& shell,
                              const BlockSpec& block, const MeasureOptions& opt = {},
                              ShellWeighting weighting = ShellWeighting::uniform) {
  require(!shell.members.empty(), ErrorCode::ShellEmpty, "empty shell");
  const TransitionSweep sweep = local_sweep(s, ens, block, opt);
  const auto rows = sweep.rows(shell.members);
  return make_shell_stats(rows, s.dim(), &ens, weighting);
}

// Per-eigenstate summary; d1 is NaN when no observable was supplied.
struct MeasureRecord {
  std::size_t i = 0;
  double energy = 0.0;
  double v_dg = 0.0;
  double v_off_sum = 0.0;
  double v_off_avg = 0.0;
  double f_ratio = 0.0;
  double d1 = std::numeric_limits<double>::quiet_NaN();
  double d2 = 0.0;
  double d3 = 0.0;
  TradeoffReport tradeoff;
};

inline std::vector<MeasureRecord> measure_records(const TransitionSweep& sweep, std::span<const SweepRow> rows,
                                                  const CMatrix* observable = nullptr) {
  const Spectrum& s = sweep.spectrum();
  require(sweep.frames().size() == 1, ErrorCode::InvalidSpec, "records are defined for a single block");
  const SiteLayout layout(sweep.frames().front().sites, s.sites);
  const Matrix& rho = sweep.reference().rho;
  const double rhs = sweep.rhs();
  std::vector<MeasureRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const Matrix sigma = transition_matrix(layout, s, row.i, row.i);
    const auto off = make_offdiag(row, s.dim(), rhs);
    MeasureRecord rec;
    rec.i = row.i;
    rec.energy = s.energy(row.i);
    rec.v_dg = row.v_dg;
    rec.v_off_sum = row.v_off_sum;
    rec.v_off_avg = off.v_off_avg;
    rec.f_ratio = off.f_ratio;
    if (observable) rec.d1 = d1_local(sigma, rho, *observable, true);
    rec.d2 = d2_measure(sigma, rho, true);
    rec.d3 = d3_measure(row.v_dg);
    rec.tradeoff = make_tradeoff(row, rhs);
    out.push_back(rec);
  }
  return out;
}

}  // namespace ethtrade
