#pragma once

namespace nnbm {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace nnbm
