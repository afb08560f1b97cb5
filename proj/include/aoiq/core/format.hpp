#pragma once

#include <cstdio>
#include <string>

namespace aoiq {

/// Round-trippable decimal form of a double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace aoiq
