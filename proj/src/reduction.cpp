#include "reluphase/reduction.hpp"

#include <stdexcept>

namespace reluphase {

namespace {

void collect_leaves(std::size_t lo, std::size_t hi, std::size_t leaf_size,
                    std::vector<std::pair<std::size_t, std::size_t>>& out) {
  if (hi - lo <= leaf_size) {
    out.emplace_back(lo, hi);
    return;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  collect_leaves(lo, mid, leaf_size, out);
  collect_leaves(mid, hi, leaf_size, out);
}

std::vector<double> combine_range(const std::vector<double>& partials, std::size_t lo,
                                  std::size_t hi, std::size_t width) {
  if (hi - lo == 1) {
    return std::vector<double>(partials.begin() + static_cast<std::ptrdiff_t>(lo * width),
                               partials.begin() + static_cast<std::ptrdiff_t>((lo + 1) * width));
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  std::vector<double> left = combine_range(partials, lo, mid, width);
  const std::vector<double> right = combine_range(partials, mid, hi, width);
  for (std::size_t j = 0; j < width; ++j) left[j] += right[j];
  return left;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> leaf_ranges(std::size_t count,
                                                             std::size_t leaf_size) {
  if (leaf_size == 0) throw std::invalid_argument("leaf_ranges: leaf_size must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (count == 0) return out;
  out.reserve(count / leaf_size + 2);
  if (count == 1) {
    out.emplace_back(0, 1);
    return out;
  }
  const std::size_t mid = count / 2;
  collect_leaves(0, mid, leaf_size, out);
  collect_leaves(mid, count, leaf_size, out);
  return out;
}

std::vector<double> combine_leaf_partials(const std::vector<double>& partials,
                                          std::size_t leaf_count, std::size_t width) {
  if (leaf_count * width != partials.size()) {
    throw std::invalid_argument("combine_leaf_partials: size mismatch");
  }
  if (leaf_count == 0) return std::vector<double>(width, 0.0);
  return combine_range(partials, 0, leaf_count, width);
}

}  // namespace reluphase
