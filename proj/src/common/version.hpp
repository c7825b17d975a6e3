#pragma once

namespace eidc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace eidc
