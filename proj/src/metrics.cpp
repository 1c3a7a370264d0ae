#include "pa1smt/metrics.hpp"

#include "pa1smt/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

namespace pa1smt::metrics {
namespace {

std::vector<std::size_t> dense_ids(std::span<const int> labels,
                                   std::size_t& count) {
  std::unordered_map<int, std::size_t> ids;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(labels[i], ids.size());
    out[i] = it->second;
  }
  count = ids.size();
  return out;
}

double entropy(const std::vector<std::int64_t>& counts, double n) {
  double h = 0.0;
  for (const auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

std::int64_t pairs(std::int64_t c) { return c * (c - 1) / 2; }

}  // namespace

Contingency Contingency::build(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw DimensionError("label vectors differ in length: " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  std::size_t ka = 0;
  std::size_t kb = 0;
  const auto ia = dense_ids(a, ka);
  const auto ib = dense_ids(b, kb);
  Contingency c;
  c.table.assign(ka, std::vector<std::int64_t>(kb, 0));
  c.row_sums.assign(ka, 0);
  c.col_sums.assign(kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++c.table[ia[i]][ib[i]];
    ++c.row_sums[ia[i]];
    ++c.col_sums[ib[i]];
  }
  c.total = static_cast<std::int64_t>(a.size());
  return c;
}

double nmi(std::span<const int> a, std::span<const int> b) {
  if (a.empty()) throw DataError("nmi needs at least one sample");
  const Contingency c = Contingency::build(a, b);
  const double n = static_cast<double>(c.total);
  const double ha = entropy(c.row_sums, n);
  const double hb = entropy(c.col_sums, n);
  const bool a_single = c.row_sums.size() == 1;
  const bool b_single = c.col_sums.size() == 1;
  if (a_single && b_single) return 1.0;
  if (a_single || b_single) return 0.0;

  double mi = 0.0;
  for (std::size_t u = 0; u < c.table.size(); ++u) {
    for (std::size_t v = 0; v < c.table[u].size(); ++v) {
      const auto nuv = c.table[u][v];
      if (nuv == 0) continue;
      const double joint = static_cast<double>(nuv);
      mi += joint / n *
            std::log(joint * n /
                     (static_cast<double>(c.row_sums[u]) *
                      static_cast<double>(c.col_sums[v])));
    }
  }
  const double value = mi / std::sqrt(ha * hb);
  return std::clamp(value, 0.0, 1.0);
}

double rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() < 2) throw DataError("rand index needs at least two samples");
  const Contingency c = Contingency::build(a, b);
  std::int64_t together_both = 0;
  for (const auto& row : c.table) {
    for (const auto nuv : row) together_both += pairs(nuv);
  }
  std::int64_t together_a = 0;
  for (const auto s : c.row_sums) together_a += pairs(s);
  std::int64_t together_b = 0;
  for (const auto s : c.col_sums) together_b += pairs(s);
  const std::int64_t all = pairs(c.total);
  const std::int64_t apart_both = all - together_a - together_b + together_both;
  return static_cast<double>(together_both + apart_both) /
         static_cast<double>(all);
}

}  // namespace pa1smt::metrics
