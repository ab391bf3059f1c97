#pragma once

namespace levsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace levsim
