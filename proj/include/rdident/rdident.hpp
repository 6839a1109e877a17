#pragma once

// Umbrella header: the whole toolkit.

#include "rdident/cli.hpp"

namespace rdident {
inline constexpr const char* version = "0.1.0";
}
