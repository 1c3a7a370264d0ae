#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pa1smt::metrics {

// Co-occurrence counts of two labelings. Labels are remapped to dense
// indices in order of first appearance.
struct Contingency {
  std::vector<std::vector<std::int64_t>> table;  // [a-cluster][b-cluster]
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t total = 0;

  static Contingency build(std::span<const int> a, std::span<const int> b);
};

// Normalized mutual information I(a;b) / sqrt(H(a) H(b)) with natural logs.
// 1 when both labelings are a single cluster, 0 when exactly one is.
double nmi(std::span<const int> a, std::span<const int> b);

// Fraction of sample pairs on which the labelings agree (both together or
// both apart). Computed from contingency sums. Needs n >= 2.
double rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace pa1smt::metrics
