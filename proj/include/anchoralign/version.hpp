#pragma once

namespace anchoralign {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace anchoralign
