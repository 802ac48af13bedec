#pragma once

#define MSEDID_VERSION_MAJOR 0
#define MSEDID_VERSION_MINOR 1
#define MSEDID_VERSION_PATCH 0

namespace msedid {

inline constexpr const char* version() { return "0.1.0"; }

}  // namespace msedid
