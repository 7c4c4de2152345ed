#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace qualsim {

// Shortest-exact decimal form; reruns print identical bytes.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == x) {
    // try shorter representations that still round-trip
    for (int prec = 1; prec < 17; ++prec) {
      char tight[40];
      std::snprintf(tight, sizeof tight, "%.*g", prec, x);
      std::sscanf(tight, "%lf", &back);
      if (back == x) return tight;
    }
  }
  return buf;
}

inline std::string hex_u64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace qualsim
