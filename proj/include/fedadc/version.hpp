#pragma once

namespace fedadc {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace fedadc
