#include "greyfeed/csv.hpp"

#include <cstdio>
#include <cstdlib>

namespace greyfeed {

std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace greyfeed
