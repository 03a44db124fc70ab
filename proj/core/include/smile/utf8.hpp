#pragma once

#include <string>
#include <string_view>

namespace smile {

std::string to_utf8(std::u32string_view text);
std::string to_utf8(char32_t code_point);
// Throws ContractError on malformed input.
std::u32string from_utf8(std::string_view text);

}  // namespace smile
