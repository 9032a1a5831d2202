#pragma once

namespace overview {

inline constexpr const char* kVersion = "0.1.0";

} // namespace overview
