#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace taylorse {

enum class Variant : std::uint8_t { taer = 0, taerlite = 1 };

std::string_view to_string(Variant v);
/// Accepts "taer" / "taerlite" (case-insensitive); throws ConfigError.
Variant parse_variant(std::string_view name);

}  // namespace taylorse
