#pragma once

#include "afd/errors.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>

namespace afd {

struct RootResult {
  double root;
  std::uintmax_t iterations;
};

/// Bracketing root of a scalar function on [lo, hi] (TOMS 748, a Brent-class
/// method). Terminates when the bracket is narrower than x_tol.
template <class Fn>
RootResult find_root(Fn&& fn, double lo, double hi, double x_tol = 1e-10,
                     std::uintmax_t max_iter = 200, const std::string& context = "root") {
  if (!(lo < hi)) throw std::invalid_argument(context + ": bracket must satisfy lo < hi");
  const double f_lo = fn(lo);
  const double f_hi = fn(hi);
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) {
    throw BracketError(context + ": non-finite function value at bracket end", lo, hi, f_lo, f_hi);
  }
  if (f_lo == 0.0) return {lo, 0};
  if (f_hi == 0.0) return {hi, 0};
  if ((f_lo < 0.0) == (f_hi < 0.0)) {
    std::ostringstream os;
    os.precision(10);
    os << context << ": no sign change over [" << lo << ", " << hi << "], f(lo)=" << f_lo
       << ", f(hi)=" << f_hi << "; widen the bracket";
    throw BracketError(os.str(), lo, hi, f_lo, f_hi);
  }
  std::uintmax_t iters = max_iter;
  auto tol = [x_tol](double a, double b) { return std::abs(b - a) < x_tol; };
  const auto bracket = boost::math::tools::toms748_solve(fn, lo, hi, f_lo, f_hi, tol, iters);
  if (iters >= max_iter && std::abs(bracket.second - bracket.first) >= x_tol) {
    throw NumericalError(context + ": root finder did not converge");
  }
  return {0.5 * (bracket.first + bracket.second), iters};
}

}  // namespace afd
