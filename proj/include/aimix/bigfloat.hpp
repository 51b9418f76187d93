#pragma once

// Wide floating type for extreme right tails. 330 decimal digits (~1100 bits
// of mantissa) keep ~30 significant digits after the 1 - S cancellation for
// tail probabilities down to 1e-300.

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace aimix {

using BigFloat = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<330>>;

inline double value_of(const BigFloat &x) { return x.convert_to<double>(); }

} // namespace aimix
