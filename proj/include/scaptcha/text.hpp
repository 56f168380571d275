#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scaptcha {

/// Lowercase, whitespace-collapsed, trimmed.
std::string normalize_text(std::string_view text);

/// Words of normalize_text(text).
std::vector<std::string> tokenize(std::string_view text);

}  // namespace scaptcha
