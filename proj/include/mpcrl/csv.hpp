#pragma once

#include <string>

namespace mpcrl::csv {

/// Shortest round-trip decimal representation of x.
std::string number(double x);

}  // namespace mpcrl::csv
