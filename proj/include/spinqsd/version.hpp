#pragma once

namespace spinqsd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spinqsd
