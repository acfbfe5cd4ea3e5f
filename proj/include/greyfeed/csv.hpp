#pragma once

#include <string>

namespace greyfeed {

// Shortest decimal form that parses back to exactly the same double
// (tries %.15g, %.16g, %.17g in turn).
std::string format_double(double v);

}  // namespace greyfeed
