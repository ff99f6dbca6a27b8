#pragma once

namespace mvreflect {

inline constexpr const char* version_string = "mvreflect 0.1.0";

} // namespace mvreflect
