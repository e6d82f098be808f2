// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace molrefine::detail {

/// Built-in copy of an asset file by name; empty when unknown.
std::string_view embedded_asset(std::string_view name);

}  // namespace molrefine::detail
