#pragma once

namespace reluphase {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace reluphase
