#pragma once

namespace zrp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace zrp
