#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kfiltr {

// Exact arithmetic used everywhere in the library. No floating point on any
// computational path; decimal output is rendered by long division.
using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

enum class Errc {
  DegenerateInput,
  UnsupportedDegree,
  FitMismatch,
  NotPolynomial,
  NotGood,
  OutOfBody,
  UnsupportedKind,
  NotRepresentable,
  NonSmoothCorner,
  SimplexNotContained,
  SingularGram,
  DimensionTooSmall,
  DegenerateFiltration,
  BoundViolated,
  ShellEmpty,
  DomainMismatch,
  BudgetExceeded,
  ParseError,
  ValidationError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::UnsupportedDegree: return "UnsupportedDegree";
    case Errc::FitMismatch: return "FitMismatch";
    case Errc::NotPolynomial: return "NotPolynomial";
    case Errc::NotGood: return "NotGood";
    case Errc::OutOfBody: return "OutOfBody";
    case Errc::UnsupportedKind: return "UnsupportedKind";
    case Errc::NotRepresentable: return "NotRepresentable";
    case Errc::NonSmoothCorner: return "NonSmoothCorner";
    case Errc::SimplexNotContained: return "SimplexNotContained";
    case Errc::SingularGram: return "SingularGram";
    case Errc::DimensionTooSmall: return "DimensionTooSmall";
    case Errc::DegenerateFiltration: return "DegenerateFiltration";
    case Errc::BoundViolated: return "BoundViolated";
    case Errc::ShellEmpty: return "ShellEmpty";
    case Errc::DomainMismatch: return "DomainMismatch";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

/// Largest integer <= q.
inline Int rat_floor(const Rat& q) {
  Int n = numerator(q);
  const Int d = denominator(q);  // always > 0
  Int t = n / d;
  if (n < 0 && t * d != n) --t;
  return t;
}

inline Int rat_ceil(const Rat& q) { return -rat_floor(-q); }

inline Rat rat_abs(const Rat& q) { return q < 0 ? Rat(-q) : q; }
inline Int int_abs(const Int& n) { return n < 0 ? Int(-n) : n; }

inline Int factorial(int n) {
  Int f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Parses "p/q" or "p" with optional sign; denominator must be positive
/// after normalization. Returns nullopt on malformed input.
inline std::optional<Rat> try_parse_rational(std::string_view s) {
  if (s.empty()) return std::nullopt;
  auto is_int = [](std::string_view t) {
    if (t.empty()) return false;
    std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) return false;
    for (; i < t.size(); ++i)
      if (t[i] < '0' || t[i] > '9') return false;
    return true;
  };
  const auto slash = s.find('/');
  try {
    if (slash == std::string_view::npos) {
      if (!is_int(s)) return std::nullopt;
      return Rat(Int(std::string(s)));
    }
    const auto num = s.substr(0, slash);
    const auto den = s.substr(slash + 1);
    if (!is_int(num) || !is_int(den)) return std::nullopt;
    const Int d{std::string(den)};
    if (d == 0) return std::nullopt;
    return Rat(Int{std::string(num)}, d);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// "p/q" for non-integers, "p" otherwise. Inverse of try_parse_rational.
inline std::string rat_to_string(const Rat& q) {
  std::string s = numerator(q).str();
  if (denominator(q) != 1) s += "/" + denominator(q).str();
  return s;
}

/// Truncated exact decimal expansion with at least `significant` significant
/// digits (terminating expansions are emitted in full and not padded).
inline std::string rat_to_decimal(const Rat& q, int significant = 15) {
  if (q == 0) return "0";
  Int a = int_abs(numerator(q));
  const Int b = denominator(q);
  std::string out = (q < 0) ? "-" : "";
  Int ipart = a / b;
  Int rem = a % b;
  if (ipart > 0) {
    std::string istr = ipart.str();
    out += istr;
    int remaining = significant - static_cast<int>(istr.size());
    if (rem == 0 || remaining <= 0) return out;
    out += ".";
    for (int i = 0; i < remaining && rem != 0; ++i) {
      rem *= 10;
      out += static_cast<char>('0' + static_cast<int>(Int(rem / b)));
      rem %= b;
    }
    return out;
  }
  out += "0.";
  int produced = 0;  // significant digits so far
  while (rem != 0 && produced < significant) {
    rem *= 10;
    const int digit = static_cast<int>(Int(rem / b));
    rem %= b;
    out += static_cast<char>('0' + digit);
    if (digit != 0 || produced > 0) ++produced;
  }
  return out;
}

}  // namespace kfiltr
