#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "cvbn/bn.hpp"

namespace cvbn {

/// Dense non-negative table over a scope of variables. The scope is kept
/// sorted by variable index; the last scope variable varies fastest.
struct Factor {
  std::vector<std::size_t> scope;
  std::vector<std::size_t> cards;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool contains(std::size_t v) const {
    return std::binary_search(scope.begin(), scope.end(), v);
  }
  double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

  static Factor unit() { return Factor{{}, {}, {1.0}}; }
};

namespace detail {

inline std::vector<std::size_t> strides_in(const Factor& f,
                                           const std::vector<std::size_t>& scope) {
  // stride of each `scope` variable inside f (0 when absent)
  std::vector<std::size_t> own(f.scope.size());
  std::size_t s = 1;
  for (std::size_t i = f.scope.size(); i-- > 0;) {
    own[i] = s;
    s *= f.cards[i];
  }
  std::vector<std::size_t> out(scope.size(), 0);
  for (std::size_t i = 0; i < scope.size(); ++i) {
    auto it = std::lower_bound(f.scope.begin(), f.scope.end(), scope[i]);
    if (it != f.scope.end() && *it == scope[i])
      out[i] = own[static_cast<std::size_t>(it - f.scope.begin())];
  }
  return out;
}

}  // namespace detail

/// Sum over every variable not in `keep` of the product of `factors`.
/// `keep` must be sorted; variables in `keep` absent from all factors are
/// ignored. This single kernel implements product, marginalization and
/// message updates.
inline Factor combine(std::span<const Factor* const> factors,
                      const std::vector<std::size_t>& keep) {
  std::vector<std::size_t> uscope;
  std::vector<std::size_t> ucards;
  for (const Factor* f : factors)
    for (std::size_t i = 0; i < f->scope.size(); ++i) {
      auto it = std::lower_bound(uscope.begin(), uscope.end(), f->scope[i]);
      if (it == uscope.end() || *it != f->scope[i]) {
        const auto pos = it - uscope.begin();
        uscope.insert(it, f->scope[i]);
        ucards.insert(ucards.begin() + pos, f->cards[i]);
      }
    }

  Factor out;
  for (std::size_t i = 0; i < uscope.size(); ++i)
    if (std::binary_search(keep.begin(), keep.end(), uscope[i])) {
      out.scope.push_back(uscope[i]);
      out.cards.push_back(ucards[i]);
    }
  std::size_t out_size = 1;
  for (std::size_t c : out.cards) out_size *= c;
  out.values.assign(out_size, 0.0);

  const std::size_t n = uscope.size();
  const std::size_t k = factors.size();
  std::vector<std::vector<std::size_t>> strides(k);
  for (std::size_t j = 0; j < k; ++j) strides[j] = detail::strides_in(*factors[j], uscope);
  const std::vector<std::size_t> ostride = detail::strides_in(out, uscope);

  std::size_t total = 1;
  for (std::size_t c : ucards) total *= c;

  std::vector<std::size_t> assign(n, 0);
  std::vector<std::size_t> idx(k, 0);
  std::size_t oidx = 0;
  for (std::size_t step = 0; step < total; ++step) {
    double p = 1.0;
    for (std::size_t j = 0; j < k; ++j) p *= factors[j]->values[idx[j]];
    out.values[oidx] += p;
    // odometer increment, last variable fastest
    for (std::size_t d = n; d-- > 0;) {
      if (++assign[d] < ucards[d]) {
        for (std::size_t j = 0; j < k; ++j) idx[j] += strides[j][d];
        oidx += ostride[d];
        break;
      }
      const std::size_t back = ucards[d] - 1;
      assign[d] = 0;
      for (std::size_t j = 0; j < k; ++j) idx[j] -= strides[j][d] * back;
      oidx -= ostride[d] * back;
    }
  }
  return out;
}

inline Factor combine(std::initializer_list<const Factor*> factors,
                      const std::vector<std::size_t>& keep) {
  return combine(std::span<const Factor* const>(factors.begin(), factors.size()), keep);
}

inline Factor marginal(const Factor& f, const std::vector<std::size_t>& keep) {
  return combine({&f}, keep);
}

/// Fixes `var` to `state`, dropping it from the scope.
inline Factor reduce(const Factor& f, std::size_t var, std::size_t state) {
  auto it = std::lower_bound(f.scope.begin(), f.scope.end(), var);
  if (it == f.scope.end() || *it != var) return f;
  const std::size_t pos = static_cast<std::size_t>(it - f.scope.begin());
  std::size_t inner = 1;
  for (std::size_t i = pos + 1; i < f.scope.size(); ++i) inner *= f.cards[i];
  const std::size_t card = f.cards[pos];
  const std::size_t outer = f.size() / (inner * card);
  Factor out;
  out.scope = f.scope;
  out.cards = f.cards;
  out.scope.erase(out.scope.begin() + static_cast<long>(pos));
  out.cards.erase(out.cards.begin() + static_cast<long>(pos));
  out.values.reserve(outer * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i)
      out.values.push_back(f.values[(o * card + state) * inner + i]);
  return out;
}

/// Zeroes every entry where `var` != `state` (scope unchanged).
inline void apply_indicator(Factor& f, std::size_t var, std::size_t state) {
  auto it = std::lower_bound(f.scope.begin(), f.scope.end(), var);
  if (it == f.scope.end() || *it != var) return;
  const std::size_t pos = static_cast<std::size_t>(it - f.scope.begin());
  std::size_t inner = 1;
  for (std::size_t i = pos + 1; i < f.scope.size(); ++i) inner *= f.cards[i];
  const std::size_t card = f.cards[pos];
  for (std::size_t e = 0; e < f.size(); ++e)
    if ((e / inner) % card != state) f.values[e] = 0.0;
}

/// CPT of `child` as a factor over sorted(parents + child).
inline Factor family_factor(const BayesNet& net, std::size_t child,
                            std::span<const double> table) {
  const Family& fam = net.family(child);
  std::vector<std::size_t> natural = fam.parents;
  natural.push_back(child);
  Factor f;
  f.scope = natural;
  std::sort(f.scope.begin(), f.scope.end());
  for (std::size_t v : f.scope) f.cards.push_back(net.cardinality(v));
  f.values.assign(table.size(), 0.0);

  // stride in the sorted layout for each variable in natural order
  std::vector<std::size_t> sorted_stride(f.scope.size());
  std::size_t s = 1;
  for (std::size_t i = f.scope.size(); i-- > 0;) {
    sorted_stride[i] = s;
    s *= f.cards[i];
  }
  std::vector<std::size_t> nat_stride(natural.size()), nat_card(natural.size());
  for (std::size_t i = 0; i < natural.size(); ++i) {
    nat_card[i] = net.cardinality(natural[i]);
    const auto pos = std::lower_bound(f.scope.begin(), f.scope.end(), natural[i]) - f.scope.begin();
    nat_stride[i] = sorted_stride[static_cast<std::size_t>(pos)];
  }
  std::vector<std::size_t> assign(natural.size(), 0);
  std::size_t dst = 0;
  for (std::size_t e = 0; e < table.size(); ++e) {
    f.values[dst] = table[e];
    for (std::size_t d = natural.size(); d-- > 0;) {
      if (++assign[d] < nat_card[d]) {
        dst += nat_stride[d];
        break;
      }
      dst -= nat_stride[d] * (nat_card[d] - 1);
      assign[d] = 0;
    }
  }
  return f;
}

inline Factor family_factor(const BayesNet& net, std::size_t child) {
  return family_factor(net, child, net.family(child).table);
}

}  // namespace cvbn
