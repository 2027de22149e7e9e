#pragma once

#include <string>

namespace sparsecb {

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace sparsecb
