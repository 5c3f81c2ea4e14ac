#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "ethtrade/error.hpp"
#include "ethtrade/linalg.hpp"
#include "ethtrade/spinchain.hpp"

namespace ethtrade {

// Ascending energies and orthonormal eigenvectors (column i is |E_i>).
// The Hamiltonian is real symmetric, so the eigenvectors are real.
struct Spectrum {
  int sites = 0;
  Vector energies;
  Matrix vectors;

  std::size_t dim() const { return static_cast<std::size_t>(energies.size()); }
  double energy(std::size_t i) const { return energies[static_cast<Eigen::Index>(i)]; }
  auto state(std::size_t i) const { return vectors.col(static_cast<Eigen::Index>(i)); }
  double min_energy() const { return energies[0]; }
  double max_energy() const { return energies[energies.size() - 1]; }
};

inline Spectrum diagonalize(const DenseHermitian& h) {
  const std::size_t dim = h.dim();
  require(dim >= 2 && (dim & (dim - 1)) == 0, ErrorCode::InvalidSpec, "dimension must be a power of two");
  int sites = 0;
  while ((std::size_t{1} << sites) < dim) ++sites;
  require(sites <= kDefaultSiteLimit + 2, ErrorCode::DimensionLimit, "dimension beyond dense limit");
  auto eig = lapack_symmetric_eigen(h.entries);
  return Spectrum{sites, std::move(eig.values), std::move(eig.vectors)};
}

inline Spectrum diagonalize(const ChainSpec& spec) { return diagonalize(build_hamiltonian(spec)); }

struct SpectrumQuality {
  double max_residual = 0.0;       // max_i ||H v_i - E_i v_i||_2
  double orthonormality = 0.0;     // max |V^T V - I|
  double spectral_norm = 0.0;      // ||H||_2
};

inline SpectrumQuality assess(const DenseHermitian& h, const Spectrum& s) {
  SpectrumQuality q;
  const Matrix hv = h.entries * s.vectors;
  for (Eigen::Index i = 0; i < hv.cols(); ++i) {
    q.max_residual = std::max(q.max_residual, (hv.col(i) - s.energies[i] * s.vectors.col(i)).norm());
  }
  q.orthonormality =
      max_abs(s.vectors.transpose() * s.vectors - Matrix::Identity(s.vectors.cols(), s.vectors.cols()));
  q.spectral_norm = std::max(std::abs(s.min_energy()), std::abs(s.max_energy()));
  return q;
}

// Closed energy window [center - width/2, center + width/2].
struct EnergyShell {
  double center = 0.0;
  double width = 0.0;
  std::vector<std::size_t> members;

  std::size_t size() const { return members.size(); }
  bool contains(std::size_t i) const { return std::binary_search(members.begin(), members.end(), i); }
};

inline EnergyShell energy_shell(const Spectrum& s, double center, double width) {
  require(width > 0.0 && std::isfinite(width) && std::isfinite(center), ErrorCode::InvalidSpec,
          "shell width must be positive");
  EnergyShell shell{center, width, {}};
  const double lo = center - width / 2;
  const double hi = center + width / 2;
  const auto first = std::lower_bound(s.energies.begin(), s.energies.end(), lo);
  for (auto it = first; it != s.energies.end() && *it <= hi; ++it) {
    shell.members.push_back(static_cast<std::size_t>(it - s.energies.begin()));
  }
  if (shell.members.empty()) {
    fail(ErrorCode::ShellEmpty, "no eigenvalue in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return shell;
}

struct Canonical {
  double beta = 0.0;
};
struct Microcanonical {
  EnergyShell shell;
};
struct Uniform {};
struct Pure {
  std::size_t index = 0;
};

using EnsembleKind = std::variant<Canonical, Microcanonical, Uniform, Pure>;

// Density operator diagonal in the energy eigenbasis.
struct EnsembleState {
  Vector weights;
  EnsembleKind kind;

  std::size_t dim() const { return static_cast<std::size_t>(weights.size()); }
  double weight(std::size_t i) const { return weights[static_cast<Eigen::Index>(i)]; }

  std::string label() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Canonical>) return "canonical";
          if constexpr (std::is_same_v<K, Microcanonical>) return "microcanonical";
          if constexpr (std::is_same_v<K, Uniform>) return "uniform";
          if constexpr (std::is_same_v<K, Pure>) return "pure";
        },
        kind);
  }
};

// exp(-beta E_i)/Z with the exponent shifted by its maximum.
inline Vector canonical_weights(const Vector& energies, double beta) {
  require(std::isfinite(beta), ErrorCode::InvalidSpec, "beta must be finite");
  const double ref = beta >= 0.0 ? energies.minCoeff() : energies.maxCoeff();
  Vector w(energies.size());
  for (Eigen::Index i = 0; i < energies.size(); ++i) w[i] = std::exp(-beta * (energies[i] - ref));
  CompensatedSum z;
  for (Eigen::Index i = 0; i < w.size(); ++i) z.add(w[i]);
  return w / z.value();
}

inline EnsembleState make_ensemble(const EnsembleKind& kind, const Spectrum& s) {
  const auto dim = static_cast<Eigen::Index>(s.dim());
  EnsembleState out{Vector::Zero(dim), kind};
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Canonical>) {
          out.weights = canonical_weights(s.energies, k.beta);
        } else if constexpr (std::is_same_v<K, Microcanonical>) {
          require(!k.shell.members.empty(), ErrorCode::ShellEmpty, "microcanonical shell is empty");
          const double w = 1.0 / static_cast<double>(k.shell.members.size());
          for (std::size_t i : k.shell.members) {
            require(i < s.dim(), ErrorCode::InvalidSpec, "shell member out of range");
            out.weights[static_cast<Eigen::Index>(i)] = w;
          }
        } else if constexpr (std::is_same_v<K, Uniform>) {
          out.weights.setConstant(1.0 / static_cast<double>(dim));
        } else {
          require(k.index < s.dim(), ErrorCode::InvalidSpec, "pure-state index out of range");
          out.weights[static_cast<Eigen::Index>(k.index)] = 1.0;
        }
      },
      kind);
  return out;
}

inline double mean_energy(const Spectrum& s, const Vector& weights) {
  CompensatedSum e;
  for (Eigen::Index i = 0; i < weights.size(); ++i) e.add(weights[i] * s.energies[i]);
  return e.value();
}

inline double mean_energy(const Spectrum& s, const EnsembleState& ens) { return mean_energy(s, ens.weights); }

inline double canonical_energy(const Spectrum& s, double beta) {
  return mean_energy(s, canonical_weights(s.energies, beta));
}

// Inverts the strictly decreasing E(beta) by bisection on [-beta_hi, beta_hi].
inline double solve_beta_for_energy(const Spectrum& s, double target, double beta_hi = 50.0) {
  const double span = s.max_energy() - s.min_energy();
  require(target > s.min_energy() && target < s.max_energy(), ErrorCode::ConvergenceFailure,
          "target energy outside the open spectral range");
  double lo = -beta_hi;
  double hi = beta_hi;
  // E(lo) is the largest energy in the bracket.
  if (canonical_energy(s, lo) < target || canonical_energy(s, hi) > target) {
    fail(ErrorCode::ConvergenceFailure, "bracket [-beta_hi, beta_hi] does not straddle the target energy");
  }
  for (int iter = 0; iter < 400; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (canonical_energy(s, mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double beta = 0.5 * (lo + hi);
  if (std::abs(canonical_energy(s, beta) - target) > 1e-9 * span) {
    fail(ErrorCode::ConvergenceFailure, "bisection stalled above the energy tolerance");
  }
  return beta;
}

struct Histogram {
  std::vector<double> edges;        // bins + 1
  std::vector<double> values;       // counts, or probability mass in weighted mode
  std::vector<double> energy_sums;  // sum of (weight * E_i) per bin
};

// Equal-width bins over [E_min, E_max]; the last bin is closed on the right.
inline Histogram spectral_histogram(const Spectrum& s, const EnsembleState* weights, int bins) {
  require(bins >= 1, ErrorCode::InvalidSpec, "histogram needs at least one bin");
  const double lo = s.min_energy();
  double hi = s.max_energy();
  if (hi <= lo) hi = lo + 1.0;
  const double step = (hi - lo) / bins;
  Histogram out;
  for (int b = 0; b <= bins; ++b) out.edges.push_back(lo + step * b);
  out.edges.back() = hi;
  std::vector<CompensatedSum> mass(static_cast<std::size_t>(bins)), esum(static_cast<std::size_t>(bins));
  for (std::size_t i = 0; i < s.dim(); ++i) {
    const double e = s.energy(i);
    auto b = static_cast<int>(std::floor((e - lo) / step));
    b = std::clamp(b, 0, bins - 1);
    const double w = weights ? weights->weight(i) : 1.0;
    mass[static_cast<std::size_t>(b)].add(w);
    esum[static_cast<std::size_t>(b)].add(w * e);
  }
  for (int b = 0; b < bins; ++b) {
    out.values.push_back(mass[static_cast<std::size_t>(b)].value());
    out.energy_sums.push_back(esum[static_cast<std::size_t>(b)].value());
  }
  return out;
}

}  // namespace ethtrade
