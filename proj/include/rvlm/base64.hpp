#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rvlm {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws SchemaError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace rvlm
