#pragma once

namespace csitk {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace csitk
