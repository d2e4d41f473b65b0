#pragma once

namespace prosyn {

inline constexpr const char* kToolName = "prosyn";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace prosyn
