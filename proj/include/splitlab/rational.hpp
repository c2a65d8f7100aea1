#ifndef SPLITLAB_RATIONAL_HPP
#define SPLITLAB_RATIONAL_HPP

#include <boost/rational.hpp>

#include <cstdint>
#include <string>

namespace splitlab {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

/// "3", "-1", "1/2"; the denominator is omitted when it is 1.
inline std::string to_string(const Rational& r) {
  std::string out = std::to_string(r.numerator());
  if (r.denominator() != 1) out += "/" + std::to_string(r.denominator());
  return out;
}

/// Like to_string but always carries an explicit sign ("+1", "-1/2", "+0").
inline std::string to_signed_string(const Rational& r) {
  return (r.numerator() >= 0 ? "+" : "") + to_string(r);
}

}  // namespace splitlab

#endif  // SPLITLAB_RATIONAL_HPP
