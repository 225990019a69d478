// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace sirsmfm {

/// Cluster labels in canonical first-appearance form: labels are 1..k and
/// label j appears before label j+1.
class Partition {
 public:
  Partition() = default;

  /// Canonicalises arbitrary integer labels.
  template <class Int>
  static Partition from_labels(std::span<const Int> raw) {
    Partition out;
    out.labels_.reserve(raw.size());
    std::unordered_map<long long, int> remap;
    for (Int v : raw) {
      auto [it, inserted] = remap.try_emplace(static_cast<long long>(v), static_cast<int>(remap.size()) + 1);
      if (inserted) out.sizes_.push_back(0);
      out.labels_.push_back(it->second);
      ++out.sizes_[it->second - 1];
    }
    return out;
  }

  static Partition from_labels(const std::vector<int>& raw) {
    return from_labels(std::span<const int>(raw));
  }

  static Partition single_cluster(std::size_t n) { return from_labels(std::vector<int>(n, 1)); }

  std::size_t size() const { return labels_.size(); }
  int k() const { return static_cast<int>(sizes_.size()); }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<int>& sizes() const { return sizes_; }

  bool same_cluster(std::size_t i, std::size_t j) const { return labels_[i] == labels_[j]; }

  /// Partition with item `i` removed (re-canonicalised).
  Partition without(std::size_t i) const {
    std::vector<int> rest;
    rest.reserve(labels_.size() - 1);
    for (std::size_t j = 0; j < labels_.size(); ++j)
      if (j != i) rest.push_back(labels_[j]);
    return from_labels(rest);
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> labels_;
  std::vector<int> sizes_;
};

inline bool is_canonical(std::span<const int> labels) {
  int next = 1;
  for (int v : labels) {
    if (v < 1 || v > next) return false;
    if (v == next) ++next;
  }
  return true;
}

/// Every set partition of {0..n-1}, as canonical label vectors (restricted
/// growth strings).
inline std::vector<Partition> enumerate_partitions(std::size_t n) {
  std::vector<Partition> out;
  if (n == 0) return out;
  std::vector<int> labels(n, 1);
  std::vector<int> maxima(n, 1);
  for (;;) {
    out.push_back(Partition::from_labels(labels));
    std::size_t i = n - 1;
    while (i > 0 && labels[i] > maxima[i - 1]) --i;
    if (i == 0) break;
    ++labels[i];
    maxima[i] = std::max(maxima[i - 1], labels[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      labels[j] = 1;
      maxima[j] = maxima[i];
    }
  }
  return out;
}

}  // namespace sirsmfm
