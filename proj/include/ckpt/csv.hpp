#pragma once

#include <cstdio>
#include <string>

#include "ckpt/field.hpp"

namespace ckpt {

// Field serialization: header "# N=<n> step=<k>", then n row-major CSV lines.
inline std::string field_csv(const Field& f, int step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "# N=%d step=%d\n", f.n(), step);
  std::string out = buf;
  for (int i = 0; i < f.n(); ++i) {
    for (int j = 0; j < f.n(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", f.at(i, j));
      out += buf;
      out += (j + 1 < f.n()) ? ',' : '\n';
    }
  }
  return out;
}

}  // namespace ckpt
