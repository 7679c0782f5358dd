#pragma once

#include <random>

#include "csk/algebra.hpp"
#include "csk/group.hpp"

namespace csk::testing {

inline Multivector random_mv(const Signature& sig, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Multivector x(sig);
  for (double& c : x.coeffs()) c = n(rng);
  return x;
}

inline double max_abs(const Multivector& a, const Multivector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline const std::vector<Signature> kTestSignatures{{2, 0}, {1, 1}, {3, 0}, {1, 2}};

}  // namespace csk::testing
