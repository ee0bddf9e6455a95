#pragma once

namespace isoscope {

inline constexpr const char* kToolkitVersion = "1.0.0";

}  // namespace isoscope
