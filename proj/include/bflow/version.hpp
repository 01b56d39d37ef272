#pragma once

#include <string_view>

namespace bflow {

inline constexpr std::string_view kVersion = "branchflow 0.1.0";
inline constexpr int kManifestFormat = 1;

} // namespace bflow
