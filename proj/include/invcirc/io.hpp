#pragma once

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "invcirc/errors.hpp"
#include "invcirc/tracer.hpp"
#include "invcirc/version.hpp"

namespace invcirc {

// Shortest decimal that round-trips a 64-bit double.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Comment line stamped into every output file: identifies the build and the
// exact configuration that produced it.
inline std::string stamp_line(std::uint64_t config_hash) {
  return std::string("# invcirc ") + kVersion + " config_hash=" + hex64(config_hash);
}

inline const char* kTraceHeader =
    "index,M1,M2,rho,residual,lambda0,lambda1,lambda2,ang01,ang02,ang12,reducible,"
    "radius_used";

inline std::string trace_row(const ContourPoint& cp) {
  std::ostringstream os;
  os << cp.index << ',' << format_g17(cp.point.M1) << ',' << format_g17(cp.point.M2)
     << ',' << format_g17(cp.rho) << ',' << format_g17(cp.residual) << ','
     << format_g17(cp.diag.lambda[0]) << ',' << format_g17(cp.diag.lambda[1]) << ','
     << format_g17(cp.diag.lambda[2]) << ',' << format_g17(cp.diag.ang01) << ','
     << format_g17(cp.diag.ang02) << ',' << format_g17(cp.diag.ang12) << ','
     << (cp.diag.reducible ? 1 : 0) << ',' << format_g17(cp.radius_used);
  return os.str();
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline ContourPoint parse_trace_row(const std::string& line) {
  auto fields = split_csv(line);
  if (fields.size() != 13) fail(errc::io, "trace row: expected 13 fields");
  ContourPoint cp;
  try {
    cp.index = std::stoull(fields[0]);
    cp.point.M1 = std::stod(fields[1]);
    cp.point.M2 = std::stod(fields[2]);
    cp.rho = std::stod(fields[3]);
    cp.residual = std::stod(fields[4]);
    cp.diag.lambda[0] = std::stod(fields[5]);
    cp.diag.lambda[1] = std::stod(fields[6]);
    cp.diag.lambda[2] = std::stod(fields[7]);
    cp.diag.ang01 = std::stod(fields[8]);
    cp.diag.ang02 = std::stod(fields[9]);
    cp.diag.ang12 = std::stod(fields[10]);
    cp.diag.reducible = fields[11] == "1";
    cp.radius_used = std::stod(fields[12]);
  } catch (const std::exception&) {
    fail(errc::io, "trace row: unparsable numeric field");
  }
  return cp;
}

}  // namespace invcirc
