#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "coolheat/error.hpp"
#include "coolheat/half_integer.hpp"

namespace coolheat {

namespace detail {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

inline const BigInt& factorial(int n) {
  // Grows on demand; only called from the 3-j evaluation.
  thread_local std::vector<BigInt> table{BigInt(1)};
  if (n < 0) throw DomainError("factorial of negative argument");
  while (static_cast<int>(table.size()) <= n)
    table.push_back(table.back() * static_cast<unsigned>(table.size()));
  return table[static_cast<std::size_t>(n)];
}

// (h) as an integer; caller guarantees h is integral.
inline int as_int(HalfInt h) { return h.twice() / 2; }

}  // namespace detail

// Wigner 3-j symbol (j1 j2 j3; m1 m2 m3) by the Racah sum. The square of the
// result is formed exactly as a rational, so only the final square root and
// the conversion to double are inexact.
inline double wigner_3j(HalfInt j1, HalfInt j2, HalfInt j3, HalfInt m1,
                        HalfInt m2, HalfInt m3) {
  using detail::as_int;
  using detail::factorial;
  const HalfInt js[3] = {j1, j2, j3};
  const HalfInt ms[3] = {m1, m2, m3};
  for (int i = 0; i < 3; ++i) {
    if (js[i].twice() < 0) throw DomainError("3-j: negative angular momentum");
    if (!(ms[i] - js[i]).is_integer())
      throw DomainError("3-j: m - j is not an integer (j=" + js[i].str() +
                        ", m=" + ms[i].str() + ")");
  }
  // The symbol vanishes outside |m| <= j.
  for (int i = 0; i < 3; ++i)
    if (abs(ms[i]) > js[i]) return 0.0;
  if ((m1 + m2 + m3).twice() != 0) return 0.0;
  const HalfInt jsum = j1 + j2 + j3;
  if (!jsum.is_integer()) return 0.0;
  if (j3 > j1 + j2 || j3 < abs(j1 - j2)) return 0.0;

  const int a = as_int(j1 + j2 - j3);
  const int b = as_int(j1 - j2 + j3);
  const int c = as_int(-j1 + j2 + j3);
  const int J = as_int(jsum);

  detail::BigInt prefactor = factorial(a) * factorial(b) * factorial(c);
  for (int i = 0; i < 3; ++i)
    prefactor *= factorial(as_int(js[i] + ms[i])) * factorial(as_int(js[i] - ms[i]));

  const int kmin = std::max({0, as_int(j2 - j3 - m1), as_int(j1 - j3 + m2)});
  const int kmax = std::min({a, as_int(j1 - m1), as_int(j2 + m2)});
  detail::BigRational sum(0);
  for (int k = kmin; k <= kmax; ++k) {
    detail::BigInt den = factorial(k) * factorial(as_int(j3 - j2 + m1) + k) *
                         factorial(as_int(j3 - j1 - m2) + k) * factorial(a - k) *
                         factorial(as_int(j1 - m1) - k) *
                         factorial(as_int(j2 + m2) - k);
    detail::BigRational term(detail::BigInt(1), den);
    if (k % 2 == 0)
      sum += term;
    else
      sum -= term;
  }
  if (sum == 0) return 0.0;

  detail::BigRational squared = detail::BigRational(prefactor, factorial(J + 1)) * sum * sum;
  double magnitude = std::sqrt(squared.convert_to<double>());
  // Phase (-1)^(j1 - j2 - m3); j1 - j2 - m3 is integral once the m-sum vanishes.
  int phase_exp = as_int(j1 - j2 - m3);
  bool negative = (phase_exp % 2 != 0) != (sum < 0);
  return negative ? -magnitude : magnitude;
}

}  // namespace coolheat
