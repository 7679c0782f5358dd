#pragma once

#include <utility>
#include <vector>

#include "csk/algebra.hpp"

namespace csk::oracle {

// Product of basis words e_A e_B by string rewriting: adjacent transpositions
// of distinct generators flip the sign, adjacent equal generators contract to
// their metric value. Returns (coefficient, resulting blade).
inline std::pair<double, BladeMask> blade_product(const Signature& sig, BladeMask a, BladeMask b) {
  std::vector<int> word;
  for (int i = 0; i < sig.dim(); ++i) {
    if ((a >> i) & 1u) word.push_back(i);
  }
  for (int i = 0; i < sig.dim(); ++i) {
    if ((b >> i) & 1u) word.push_back(i);
  }
  double coeff = 1.0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k + 1 < word.size(); ++k) {
      if (word[k] == word[k + 1]) {
        coeff *= sig.metric(word[k]);
        word.erase(word.begin() + k, word.begin() + k + 2);
        changed = true;
        break;
      }
      if (word[k] > word[k + 1]) {
        std::swap(word[k], word[k + 1]);
        coeff = -coeff;
        changed = true;
        break;
      }
    }
  }
  BladeMask c = 0;
  for (int i : word) c |= BladeMask{1} << i;
  return {coeff, c};
}

inline std::vector<Signature> signatures_up_to(int max_dim) {
  std::vector<Signature> out;
  for (int d = 1; d <= max_dim; ++d) {
    for (int p = d; p >= 0; --p) out.emplace_back(p, d - p);
  }
  return out;
}

}  // namespace csk::oracle
