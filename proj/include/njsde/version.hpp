#pragma once

namespace njsde {

inline constexpr const char* kVersion = "0.1.0";

} // namespace njsde
