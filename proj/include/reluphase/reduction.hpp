#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace reluphase {

// Fixed-shape pairwise reductions. Every tree splits its index range at the
// midpoint, so the association order is a pure function of (count, leaf
// size); parallel and serial evaluation give bitwise-identical sums for any
// thread count. The root splits even when the whole range fits in one leaf,
// which keeps the two halves of an antisymmetric parameter block in mirrored
// subtrees and makes their cancellation exact in floating point.
inline constexpr std::size_t kReductionLeaf = 1024;

// Leaves of the midpoint-split tree over [0, count), in index order.
std::vector<std::pair<std::size_t, std::size_t>> leaf_ranges(std::size_t count,
                                                             std::size_t leaf_size);

namespace detail {

template <class LeafFn>
double pairwise_sum_impl(std::size_t lo, std::size_t hi, std::size_t leaf_size, LeafFn& leaf) {
  if (hi - lo <= leaf_size) return leaf(lo, hi);
  const std::size_t mid = lo + (hi - lo) / 2;
  const double left = pairwise_sum_impl(lo, mid, leaf_size, leaf);
  const double right = pairwise_sum_impl(mid, hi, leaf_size, leaf);
  return left + right;
}

}  // namespace detail

// Sum of leaf(lo, hi) over the midpoint tree; leaf must accumulate its range
// serially in index order.
template <class LeafFn>
double pairwise_sum(std::size_t count, std::size_t leaf_size, LeafFn leaf) {
  if (count == 0) return 0.0;
  if (count == 1) return leaf(std::size_t{0}, std::size_t{1});
  const std::size_t mid = count / 2;
  const double left = detail::pairwise_sum_impl(std::size_t{0}, mid, leaf_size, leaf);
  const double right = detail::pairwise_sum_impl(mid, count, leaf_size, leaf);
  return left + right;
}

// Combines per-leaf partial vectors (width values per leaf, leaf-major) up
// the same midpoint tree the leaves came from. Returns the width totals.
std::vector<double> combine_leaf_partials(const std::vector<double>& partials,
                                          std::size_t leaf_count, std::size_t width);

}  // namespace reluphase
