#pragma once

namespace spinodal {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace spinodal
