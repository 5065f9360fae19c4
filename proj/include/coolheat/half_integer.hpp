#pragma once

#include <charconv>
#include <compare>
#include <cstdlib>
#include <string>
#include <string_view>

#include "coolheat/error.hpp"

namespace coolheat {

// An exact multiple of 1/2, stored as twice its value.
class HalfInt {
 public:
  constexpr HalfInt() = default;
  static constexpr HalfInt from_twice(int twice) {
    HalfInt h;
    h.twice_ = twice;
    return h;
  }
  static constexpr HalfInt integer(int n) { return from_twice(2 * n); }

  // Accepts "5/2", "-1/2", "+3/2", "2".
  static HalfInt parse(std::string_view text) {
    auto fail = [&]() -> HalfInt {
      throw ConfigError("not a half-integer: '" + std::string(text) + "'");
    };
    if (text.empty()) return fail();
    std::string_view body = text;
    if (body.front() == '+') body.remove_prefix(1);
    auto slash = body.find('/');
    int num = 0;
    auto parse_int = [&](std::string_view s, int& out) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      return ec == std::errc() && p == s.data() + s.size() && !s.empty();
    };
    if (slash == std::string_view::npos) {
      if (!parse_int(body, num)) return fail();
      return integer(num);
    }
    int den = 0;
    if (!parse_int(body.substr(0, slash), num) ||
        !parse_int(body.substr(slash + 1), den))
      return fail();
    if (den == 1) return integer(num);
    if (den != 2) return fail();
    return from_twice(num);
  }

  constexpr int twice() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr bool is_integer() const { return twice_ % 2 == 0; }

  constexpr HalfInt operator-() const { return from_twice(-twice_); }
  constexpr HalfInt operator+(HalfInt o) const { return from_twice(twice_ + o.twice_); }
  constexpr HalfInt operator-(HalfInt o) const { return from_twice(twice_ - o.twice_); }
  constexpr HalfInt& operator+=(HalfInt o) {
    twice_ += o.twice_;
    return *this;
  }
  constexpr auto operator<=>(const HalfInt&) const = default;

  std::string str(bool explicit_sign = false) const {
    std::string s;
    if (explicit_sign && twice_ > 0) s = "+";
    if (is_integer()) return s + std::to_string(twice_ / 2);
    return s + std::to_string(twice_) + "/2";
  }

 private:
  int twice_ = 0;
};

constexpr HalfInt abs(HalfInt h) { return h.twice() < 0 ? -h : h; }

namespace literals {
// 5_half == 5/2
constexpr HalfInt operator""_half(unsigned long long twice) {
  return HalfInt::from_twice(static_cast<int>(twice));
}
}  // namespace literals

}  // namespace coolheat
