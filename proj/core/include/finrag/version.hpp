#pragma once

namespace finrag::version {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kTraceSchemaVersion = 1;

}  // namespace finrag::version
