#include "mpcrl/csv.hpp"

#include <charconv>

namespace mpcrl::csv {

std::string number(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace mpcrl::csv
