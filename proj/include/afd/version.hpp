#pragma once

#define AFD_VERSION_STRING "0.1.0"

namespace afd {

inline constexpr const char* version() { return AFD_VERSION_STRING; }

}  // namespace afd
