// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact two's-complement fixed-point words. Every register in the
// simulated datapath holds one of these.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "faultline/errors.hpp"

namespace faultline::fxp {

inline constexpr int kMaxWidth = 32;

/// Layout of a fixed-point word, written "sS.dD.fF". Bits from the top:
/// sign (0 or 1 bit), digit (integer) bits, fraction bits.
struct Format {
  int sign_bits = 1;
  int digit_bits = 0;
  int fraction_bits = 15;

  constexpr int width() const { return sign_bits + digit_bits + fraction_bits; }
  constexpr bool is_signed() const { return sign_bits == 1; }
  constexpr std::uint32_t mask() const {
    return width() == 32 ? 0xffffffffu : ((1u << width()) - 1u);
  }

  // Smallest and largest integer interpretation of a raw word.
  constexpr std::int64_t min_integer() const {
    return is_signed() ? -(std::int64_t{1} << (width() - 1)) : 0;
  }
  constexpr std::int64_t max_integer() const {
    return is_signed() ? (std::int64_t{1} << (width() - 1)) - 1
                       : (std::int64_t{1} << width()) - 1;
  }
  double min_real() const { return std::ldexp(static_cast<double>(min_integer()), -fraction_bits); }
  double max_real() const { return std::ldexp(static_cast<double>(max_integer()), -fraction_bits); }
  double ulp() const { return std::ldexp(1.0, -fraction_bits); }

  bool valid() const {
    return (sign_bits == 0 || sign_bits == 1) && digit_bits >= 0 && fraction_bits >= 0 &&
           width() >= 1 && width() <= kMaxWidth;
  }
  /// Throws ContractError when the layout is not a legal register format.
  void validate() const;

  std::string to_string() const;
  /// Parses "sS.dD.fF"; throws FormatError on malformed text or illegal layout.
  static Format parse(std::string_view text);

  friend constexpr bool operator==(const Format&, const Format&) = default;
};

/// Builds a validated format.
Format make_format(int sign_bits, int digit_bits, int fraction_bits);

/// A raw word together with its layout. The raw bits above the format width
/// are always zero.
class Value {
 public:
  constexpr Value() = default;
  explicit constexpr Value(Format format) : format_(format) {}

  static constexpr Value from_raw(std::uint32_t raw, Format format) {
    Value v(format);
    v.raw_ = raw & format.mask();
    return v;
  }
  /// Wraps an integer interpretation modulo 2^width.
  static constexpr Value from_integer(std::int64_t integer, Format format) {
    return from_raw(static_cast<std::uint32_t>(static_cast<std::uint64_t>(integer)), format);
  }

  constexpr std::uint32_t raw() const { return raw_; }
  constexpr const Format& format() const { return format_; }
  constexpr int width() const { return format_.width(); }

  /// Signed interpretation when the format has a sign bit, unsigned otherwise.
  constexpr std::int64_t integer() const {
    if (format_.is_signed() && ((raw_ >> (width() - 1)) & 1u)) {
      return static_cast<std::int64_t>(raw_) - (std::int64_t{1} << width());
    }
    return static_cast<std::int64_t>(raw_);
  }
  double to_real() const { return std::ldexp(static_cast<double>(integer()), -format_.fraction_bits); }

  constexpr bool bit(int i) const { return ((raw_ >> i) & 1u) != 0; }

  friend constexpr bool operator==(const Value&, const Value&) = default;

 private:
  Format format_{};
  std::uint32_t raw_ = 0;
};

/// Result of a narrowing operation: the stored word and whether the exact
/// result fell outside the representable range (and therefore wrapped).
struct Narrowed {
  Value value;
  bool wrapped = false;
};

namespace detail {

// Rescales an exact integer carrying `from_fraction` fraction bits to
// `out.fraction_bits` by flooring, then wraps into out's width.
inline Narrowed narrow(__int128 exact, int from_fraction, Format out) {
  const int shift = from_fraction - out.fraction_bits;
  __int128 scaled = exact;
  if (shift > 0) {
    scaled = exact >> shift;  // arithmetic: floor toward -inf
  } else if (shift < 0) {
    scaled = exact * (static_cast<__int128>(1) << -shift);
  }
  const bool wrapped = scaled < out.min_integer() || scaled > out.max_integer();
  return {Value::from_raw(static_cast<std::uint32_t>(static_cast<unsigned __int128>(scaled)), out),
          wrapped};
}

}  // namespace detail

/// Scales by 2^fraction_bits, floors, and saturates to the format's range.
/// NaN maps to zero.
Value quantize(double x, Format f);

inline double to_real(Value v) { return v.to_real(); }

inline Narrowed multiply_checked(Value a, Value b, Format out) {
  const __int128 exact = static_cast<__int128>(a.integer()) * b.integer();
  return detail::narrow(exact, a.format().fraction_bits + b.format().fraction_bits, out);
}

/// Exact product, fraction floored to out, integer part wrapped.
inline Value multiply(Value a, Value b, Format out) { return multiply_checked(a, b, out).value; }

inline Narrowed add_checked(Value a, Value b) {
  if (!(a.format() == b.format())) {
    throw ContractError("fxp::add: operands have different formats (" + a.format().to_string() +
                        " vs " + b.format().to_string() + ")");
  }
  const __int128 exact = static_cast<__int128>(a.integer()) + b.integer();
  return detail::narrow(exact, a.format().fraction_bits, a.format());
}

/// Wrap-around addition at the operands' common format.
inline Value add(Value a, Value b) { return add_checked(a, b).value; }

inline Narrowed resize_checked(Value v, Format out) {
  return detail::narrow(v.integer(), v.format().fraction_bits, out);
}

/// Re-expresses v in another format with the same floor/wrap rules as multiply.
inline Value resize(Value v, Format out) { return resize_checked(v, out).value; }

Value flip_bit(Value v, int i);
Value stuck_at(Value v, int i, bool level);

/// Bit positions [first, first+count) occupied by each component of a format.
struct BitRange {
  int first = 0;
  int count = 0;
  std::uint32_t mask() const {
    return count == 0 ? 0u : static_cast<std::uint32_t>(((std::uint64_t{1} << count) - 1u) << first);
  }
};
inline BitRange fraction_range(Format f) { return {0, f.fraction_bits}; }
inline BitRange digit_range(Format f) { return {f.fraction_bits, f.digit_bits}; }
inline BitRange sign_range(Format f) { return {f.fraction_bits + f.digit_bits, f.sign_bits}; }

}  // namespace faultline::fxp
