#pragma once

namespace spdescore {

inline constexpr const char* kVersion = "v1.0.0";

}  // namespace spdescore
