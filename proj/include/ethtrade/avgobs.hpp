#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "ethtrade/block.hpp"
#include "ethtrade/error.hpp"
#include "ethtrade/linalg.hpp"
#include "ethtrade/measures.hpp"
#include "ethtrade/reduced.hpp"
#include "ethtrade/spectral.hpp"

namespace ethtrade {

// The C = N / n_b1 translated copies B_1, ..., B_C of the base block
// {1, ..., n_b1}, each listed in ascending site order.
inline std::vector<BlockSpec> translated_blocks(int n, int block_size) {
  require(block_size >= 1 && block_size <= n, ErrorCode::InvalidSpec, "block size outside chain");
  require(n % block_size == 0, ErrorCode::InvalidSpec, "chain length not divisible by the block size");
  std::vector<BlockSpec> out;
  for (int k = 0; k < n / block_size; ++k) out.push_back(BlockSpec::contiguous(k * block_size + 1, block_size, n));
  return out;
}

struct AveragedOptions {
  MeasureOptions measure;
  // Averaged-observable runs assume translation-invariant ensembles.
  bool require_invariant = true;
  double invariance_tol = 1e-8;
};

struct AveragedState {
  std::vector<BlockSpec> blocks;
  std::vector<Matrix> rho_k;  // rho_{B_k} in its own (= B_1) frame
  Matrix rho_bar;
  double invariance_defect = 0.0;  // max_k max|rho_{B_k} - rho_bar|
};

inline AveragedState averaged_state(const Spectrum& s, const EnsembleState& ens, int block_size,
                                    const AveragedOptions& opt = {}) {
  AveragedState out;
  out.blocks = translated_blocks(s.sites, block_size);
  for (const auto& b : out.blocks) out.rho_k.push_back(reduce_ensemble(s, ens, b));
  out.rho_bar = Matrix::Zero(out.rho_k.front().rows(), out.rho_k.front().cols());
  for (const auto& r : out.rho_k) out.rho_bar += r;
  out.rho_bar /= static_cast<double>(out.rho_k.size());
  for (const auto& r : out.rho_k) out.invariance_defect = std::max(out.invariance_defect, max_abs(r - out.rho_bar));
  if (opt.require_invariant && out.invariance_defect > opt.invariance_tol) {
    fail(ErrorCode::InvalidSpec, "ensemble is not translation invariant (defect " +
                                     std::to_string(out.invariance_defect) + "); set the non-invariant override");
  }
  return out;
}

struct AveragedTransition {
  std::vector<BlockSpec> blocks;
  std::vector<Matrix> sigma_k;  // sigma^{ij}_{B_k} mapped to the B_1 frame
  Matrix sigma_bar;             // (1/C) sum_k sigma_k
  Matrix rho_bar;
  Matrix o_bar;                 // rho_bar^{-1/2} sigma_bar rho_bar^{-1/2}
  std::size_t i = 0;
  std::size_t j = 0;
};

inline AveragedTransition averaged_transition(const Spectrum& s, const EnsembleState& ens, std::size_t i,
                                              std::size_t j, int block_size, const AveragedOptions& opt = {}) {
  const AveragedState state = averaged_state(s, ens, block_size, opt);
  AveragedTransition out;
  out.blocks = state.blocks;
  out.i = i;
  out.j = j;
  out.rho_bar = state.rho_bar;
  out.sigma_bar = Matrix::Zero(state.rho_bar.rows(), state.rho_bar.cols());
  for (const auto& b : out.blocks) {
    out.sigma_k.push_back(reduce_transition(s, i, j, b).matrix);
    out.sigma_bar += out.sigma_k.back();
  }
  out.sigma_bar /= static_cast<double>(out.blocks.size());
  const LocalReference ref = make_reference(state.rho_bar, opt.measure.rank_policy);
  out.o_bar = ref.rescale(out.sigma_bar, -0.5);
  return out;
}

inline TransitionSweep averaged_sweep(const Spectrum& s, const EnsembleState& ens, int block_size,
                                      const AveragedOptions& opt = {}) {
  const AveragedState state = averaged_state(s, ens, block_size, opt);
  return TransitionSweep(s, state.blocks, make_reference(state.rho_bar, opt.measure.rank_policy),
                         opt.measure.sweep);
}

// V(rho_bar, O_bar_ij) evaluated on B_1: Tr(O_bar^T rho_bar O_bar) - delta_ij.
inline double v_avg(const Spectrum& s, const EnsembleState& ens, std::size_t i, std::size_t j, int block_size,
                    const AveragedOptions& opt = {}) {
  const AveragedTransition t = averaged_transition(s, ens, i, j, block_size, opt);
  const LocalReference ref = make_reference(t.rho_bar, opt.measure.rank_policy);
  return variance_closed_form(t.sigma_bar, ref, i == j);
}

// sum_{alpha,beta} p'_alpha Tr[(O_ab^dagger (x) O_ab) D] with
// O_ab = |alpha><beta| / sqrt(p'_alpha p'_beta) in the eigenbasis of the
// reference state; D lives on B_k (x) B_l.
inline double pair_contraction(const Matrix& joint_defect, const LocalReference& ref) {
  const Eigen::Index d = ref.basis.rows();
  require(joint_defect.rows() == d * d, ErrorCode::InvalidSpec, "joint operator has the wrong size");
  Matrix uu(d * d, d * d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) uu.block(a * d, b * d, d, d) = ref.basis(a, b) * ref.basis;
  const Matrix t = uu.transpose() * joint_defect * uu;
  double out = 0.0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) out += ref.inv_probs[b] * t(a * d + b, b * d + a);
  return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

enum class CorrelationPath { naive, by_separation };

// Correlation contractions over ordered block pairs k != l. Pair layouts
// are built once and reused for every state or ensemble evaluated.
class CorrelationEvaluator {
 public:
  CorrelationEvaluator(const Spectrum& s, std::vector<BlockSpec> blocks, LocalReference ref)
      : spectrum_(&s), blocks_(std::move(blocks)), ref_(std::move(ref)) {
    for (const auto& b : blocks_) singles_.emplace_back(b.sites, s.sites);
  }

  std::size_t copies() const { return blocks_.size(); }
  const LocalReference& reference() const { return ref_; }

  // Correlation part of the averaged trade-off for eigenstate i:
  // (1/C^2) sum_{k != l} contraction(sigma^{ii}_{B_k B_l} - sigma^{ii}_{B_k} (x) rho_bar).
  double for_state(std::size_t i) const {
    Vector w = Vector::Zero(ix(spectrum_->dim()));
    w[ix(i)] = 1.0;
    std::vector<Matrix> singles;
    for (const auto& layout : singles_) singles.push_back(reduce_weighted(layout, *spectrum_, w));
    double acc = 0.0;
    for (std::size_t k = 0; k < copies(); ++k)
      for (std::size_t l = 0; l < copies(); ++l) {
        if (k == l) continue;
        const Matrix joint = reduce_weighted(pair(k, l), *spectrum_, w);
        acc += pair_contraction(joint - kron(singles[k], ref_.rho), ref_);
      }
    return acc / static_cast<double>(copies() * copies());
  }

  // V^Avg_Cor = (1/C^2) sum_{k != l} contraction(rho_{B_k B_l} - rho_{B_k} (x) rho_{B_l}).
  double for_ensemble(const Vector& weights, CorrelationPath path) const {
    std::vector<Matrix> singles;
    for (const auto& layout : singles_) singles.push_back(reduce_weighted(layout, *spectrum_, weights));
    const std::size_t c = copies();
    double acc = 0.0;
    if (path == CorrelationPath::naive) {
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t l = 0; l < c; ++l) {
          if (k == l) continue;
          const Matrix joint = reduce_weighted(pair(k, l), *spectrum_, weights);
          acc += pair_contraction(joint - kron(singles[k], singles[l]), ref_);
        }
    } else {
      // Translation invariance: the pair (k, l) only depends on (l - k) mod C.
      for (std::size_t sep = 1; sep < c; ++sep) {
        const Matrix joint = reduce_weighted(pair(0, sep), *spectrum_, weights);
        acc += static_cast<double>(c) * pair_contraction(joint - kron(singles[0], singles[sep]), ref_);
      }
    }
    return acc / static_cast<double>(c * c);
  }

 private:
  const SiteLayout& pair(std::size_t k, std::size_t l) const {
    const auto key = std::make_pair(k, l);
    auto it = pairs_.find(key);
    if (it == pairs_.end()) {
      std::vector<int> ordered = blocks_[k].sites;
      ordered.insert(ordered.end(), blocks_[l].sites.begin(), blocks_[l].sites.end());
      it = pairs_.emplace(key, SiteLayout(ordered, spectrum_->sites)).first;
    }
    return it->second;
  }

  const Spectrum* spectrum_;
  std::vector<BlockSpec> blocks_;
  std::vector<SiteLayout> singles_;
  LocalReference ref_;
  mutable std::map<std::pair<std::size_t, std::size_t>, SiteLayout> pairs_;
};

inline CorrelationEvaluator correlation_evaluator(const Spectrum& s, const EnsembleState& ens, int block_size,
                                                  const AveragedOptions& opt = {}) {
  const AveragedState state = averaged_state(s, ens, block_size, opt);
  return CorrelationEvaluator(s, state.blocks, make_reference(state.rho_bar, opt.measure.rank_policy));
}

inline double correlation_term(const Spectrum& s, const EnsembleState& ens, int block_size,
                               const AveragedOptions& opt = {}, CorrelationPath path = CorrelationPath::by_separation) {
  return correlation_evaluator(s, ens, block_size, opt).for_ensemble(ens.weights, path);
}

struct AvgTradeoffReport {
  double lhs = 0.0;
  double rhs_local = 0.0;  // (Tr(rho_bar^{-1}) - 1) / C
  double rhs_corr = 0.0;
  double residual = 0.0;

  bool holds() const { return std::abs(residual) <= identity_tolerance(rhs_local + rhs_corr); }
};

inline AvgTradeoffReport make_avg_tradeoff(const SweepRow& row, double rhs_local, double rhs_corr) {
  CompensatedSum lhs, res;
  lhs.add(row.v_dg);
  lhs.add(row.v_off_sum);
  res.add(lhs.value());
  res.add(-rhs_local);
  res.add(-rhs_corr);
  return {lhs.value(), rhs_local, rhs_corr, res.value()};
}

inline AvgTradeoffReport avg_tradeoff_report(const Spectrum& s, const EnsembleState& ens, std::size_t i,
                                             int block_size, const AveragedOptions& opt = {}) {
  const TransitionSweep sweep = averaged_sweep(s, ens, block_size, opt);
  const CorrelationEvaluator corr(s, sweep.frames(), sweep.reference());
  const double c = static_cast<double>(sweep.frames().size());
  return make_avg_tradeoff(sweep.row(i), sweep.rhs() / c, corr.for_state(i));
}

struct AvgTypicality {
  double mean_dg = 0.0;
  double mean_off = 0.0;
  double rhs_local = 0.0;
  double corr = 0.0;
  double residual = 0.0;  // mean_dg + (D_N - 1) mean_off - rhs_local - corr
};

inline AvgTypicality make_avg_typicality(const EnsembleState& ens, std::span<const SweepRow> rows, double rhs_local,
                                         double corr) {
  const Typicality t = make_typicality(ens, rows, 0.0);
  AvgTypicality out{t.mean_dg, t.mean_off, rhs_local, corr, 0.0};
  CompensatedSum res;
  res.add(t.residual);  // mean_dg + (D - 1) mean_off
  res.add(-rhs_local);
  res.add(-corr);
  out.residual = res.value();
  return out;
}

inline AvgTypicality avg_typicality(const Spectrum& s, const EnsembleState& ens, int block_size,
                                    const AveragedOptions& opt = {}) {
  const TransitionSweep sweep = averaged_sweep(s, ens, block_size, opt);
  const CorrelationEvaluator corr(s, sweep.frames(), sweep.reference());
  const auto rows = sweep.rows(support_of(ens));
  const double c = static_cast<double>(sweep.frames().size());
  return make_avg_typicality(ens, rows, sweep.rhs() / c, corr.for_ensemble(ens.weights, CorrelationPath::naive));
}

struct D1Equality {
  double lhs = 0.0;  // from the full-space averaged observable
  double rhs = 0.0;  // from the B_1-frame averaged transition block
  double diff = 0.0;
};

// d1 of the translation-averaged observable A^B = (1/C) sum_k A^{B_k},
// computed once on the full chain and once in the B_1 frame.
inline D1Equality d1_avg_equality_check(const Spectrum& s, const EnsembleState& ens, std::size_t i, std::size_t j,
                                        const CMatrix& observable, int block_size, const AveragedOptions& opt = {}) {
  require(is_hermitian(observable), ErrorCode::InvalidSpec, "observable must be Hermitian");
  const auto blocks = translated_blocks(s.sites, block_size);
  const double c = static_cast<double>(blocks.size());
  std::vector<EmbeddedOperator> copies;
  for (const auto& b : blocks) copies.push_back(embed_block_operator(observable, b, s.sites));
  auto apply_avg = [&](std::size_t m) {
    const Eigen::VectorXcd v = s.state(m).cast<Complex>();
    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(v.size());
    for (const auto& op : copies) acc += op.apply(v);
    return Eigen::VectorXcd(acc / c);
  };
  Complex full = s.state(j).cast<Complex>().dot(apply_avg(i));
  if (i == j) {
    Complex mean = 0.0;
    for (std::size_t m : support_of(ens)) mean += ens.weight(m) * s.state(m).cast<Complex>().dot(apply_avg(m));
    full -= mean;
  }
  D1Equality out;
  out.lhs = std::abs(full);
  const AveragedTransition t = averaged_transition(s, ens, i, j, block_size, opt);
  out.rhs = d1_local(t.sigma_bar, t.rho_bar, observable, i == j);
  out.diff = std::abs(out.lhs - out.rhs);
  return out;
}

}  // namespace ethtrade
