// SPDX-License-Identifier: Apache-2.0

#include "faultline/fxp.hpp"

#include <charconv>
#include <cmath>

namespace faultline::fxp {

void Format::validate() const {
  if (!valid()) {
    throw ContractError("invalid fixed-point format " + to_string() +
                        ": need sign in {0,1}, non-negative widths, total width in [1,32]");
  }
}

std::string Format::to_string() const {
  return "s" + std::to_string(sign_bits) + ".d" + std::to_string(digit_bits) + ".f" +
         std::to_string(fraction_bits);
}

namespace {

// Reads `<tag><integer>` from the front of text and advances past it.
bool read_field(std::string_view& text, char tag, int& out) {
  if (text.empty() || text.front() != tag) return false;
  text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr == text.data()) return false;
  text.remove_prefix(static_cast<std::size_t>(ptr - text.data()));
  return true;
}

}  // namespace

Format Format::parse(std::string_view text) {
  const std::string original(text);
  Format f;
  bool ok = read_field(text, 's', f.sign_bits) && !text.empty() && text.front() == '.';
  if (ok) {
    text.remove_prefix(1);
    ok = read_field(text, 'd', f.digit_bits) && !text.empty() && text.front() == '.';
  }
  if (ok) {
    text.remove_prefix(1);
    ok = read_field(text, 'f', f.fraction_bits) && text.empty();
  }
  if (!ok) throw FormatError("malformed fixed-point format '" + original + "', expected sS.dD.fF");
  if (!f.valid()) throw FormatError("illegal fixed-point format '" + original + "'");
  return f;
}

Format make_format(int sign_bits, int digit_bits, int fraction_bits) {
  Format f{sign_bits, digit_bits, fraction_bits};
  f.validate();
  return f;
}

Value quantize(double x, Format f) {
  if (std::isnan(x)) return Value(f);
  const double scaled = std::floor(std::ldexp(x, f.fraction_bits));
  const auto lo = static_cast<double>(f.min_integer());
  const auto hi = static_cast<double>(f.max_integer());
  if (scaled <= lo) return Value::from_integer(f.min_integer(), f);
  if (scaled >= hi) return Value::from_integer(f.max_integer(), f);
  return Value::from_integer(static_cast<std::int64_t>(scaled), f);
}

namespace {

void check_bit(const Value& v, int i, const char* op) {
  if (i < 0 || i >= v.width()) {
    throw ContractError(std::string(op) + ": bit index " + std::to_string(i) +
                        " out of range for width " + std::to_string(v.width()));
  }
}

}  // namespace

Value flip_bit(Value v, int i) {
  check_bit(v, i, "flip_bit");
  return Value::from_raw(v.raw() ^ (1u << i), v.format());
}

Value stuck_at(Value v, int i, bool level) {
  check_bit(v, i, "stuck_at");
  const std::uint32_t bit = 1u << i;
  return Value::from_raw(level ? (v.raw() | bit) : (v.raw() & ~bit), v.format());
}

}  // namespace faultline::fxp
