#pragma once

#include <string>
#include <string_view>

namespace softshadow {

std::string base64_encode(std::string_view bytes);
/// Accepts padded input; whitespace is ignored. Throws FormatError otherwise.
std::string base64_decode(std::string_view text);

} // namespace softshadow
