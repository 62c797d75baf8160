#pragma once

namespace invcirc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace invcirc
