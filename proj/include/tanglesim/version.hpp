#pragma once

namespace tanglesim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tanglesim
