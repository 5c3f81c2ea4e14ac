#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ethtrade/error.hpp"

namespace ethtrade {

// A set of chain sites (1-based). Kept sorted and duplicate-free.
struct BlockSpec {
  std::vector<int> sites;

  BlockSpec() = default;
  explicit BlockSpec(std::vector<int> s) : sites(std::move(s)) { std::sort(sites.begin(), sites.end()); }

  // Contiguous sites {first, ..., first + count - 1}, wrapping around a ring of n sites.
  static BlockSpec contiguous(int first, int count, int n) {
    std::vector<int> s;
    for (int k = 0; k < count; ++k) s.push_back((first - 1 + k) % n + 1);
    return BlockSpec(std::move(s));
  }

  std::size_t size() const { return sites.size(); }
  std::size_t dim() const { return std::size_t{1} << sites.size(); }

  void validate(int n) const {
    require(!sites.empty(), ErrorCode::InvalidSpec, "block must contain at least one site");
    require(std::adjacent_find(sites.begin(), sites.end()) == sites.end(), ErrorCode::InvalidSpec,
            "block has duplicate sites");
    require(sites.front() >= 1 && sites.back() <= n, ErrorCode::InvalidSpec,
            "block site outside chain of " + std::to_string(n) + " sites");
  }

  std::string label() const {
    std::string out = "{";
    for (std::size_t k = 0; k < sites.size(); ++k) {
      if (k) out += ",";
      out += std::to_string(sites[k]);
    }
    return out + "}";
  }

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

inline bool disjoint(const BlockSpec& a, const BlockSpec& b) {
  for (int s : a.sites) {
    if (std::find(b.sites.begin(), b.sites.end(), s) != b.sites.end()) return false;
  }
  return true;
}

// Basis-index bookkeeping for splitting the chain into an ordered list of
// kept sites and the (ascending) rest. Site 1 is the most significant bit of
// a full index; within the kept and the traced-out parts the first listed
// site is likewise the most significant.
class SiteLayout {
 public:
  SiteLayout(std::vector<int> kept_sites, int n) : kept_(std::move(kept_sites)), n_(n) {
    for (int s : kept_) {
      require(s >= 1 && s <= n, ErrorCode::InvalidSpec, "site outside chain");
    }
    std::vector<int> sorted = kept_;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorCode::InvalidSpec,
            "overlapping sites in layout");
    for (int s = 1; s <= n; ++s) {
      if (!std::binary_search(sorted.begin(), sorted.end(), s)) rest_.push_back(s);
    }
    const std::size_t full = std::size_t{1} << n;
    full_index_.resize(full);
    for (std::size_t idx = 0; idx < full; ++idx) {
      full_index_[kept_part(idx) * rest_dim() + rest_part(idx)] = static_cast<std::uint32_t>(idx);
    }
  }

  std::size_t kept_dim() const { return std::size_t{1} << kept_.size(); }
  std::size_t rest_dim() const { return std::size_t{1} << rest_.size(); }
  int sites() const { return n_; }

  // Full basis index of the product |kept⟩|rest⟩.
  std::size_t full(std::size_t kept, std::size_t rest) const { return full_index_[kept * rest_dim() + rest]; }

  std::size_t kept_part(std::size_t idx) const { return gather(idx, kept_); }
  std::size_t rest_part(std::size_t idx) const { return gather(idx, rest_); }

 private:
  std::size_t gather(std::size_t idx, const std::vector<int>& which) const {
    std::size_t out = 0;
    for (int s : which) out = (out << 1) | ((idx >> (n_ - s)) & 1u);
    return out;
  }

  std::vector<int> kept_;
  std::vector<int> rest_;
  int n_;
  std::vector<std::uint32_t> full_index_;
};

}  // namespace ethtrade
