#include "sparsecb/format.hpp"

#include <charconv>
#include <system_error>

namespace sparsecb {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) return "nan";
  return std::string(buf, res.ptr);
}

}  // namespace sparsecb
