#pragma once

#include <string_view>

namespace routed_bell {

inline constexpr std::string_view version = "0.1.0";

}  // namespace routed_bell
