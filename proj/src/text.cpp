#include "scaptcha/text.hpp"

#include <cctype>

namespace scaptcha {

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const std::string norm = normalize_text(text);
  std::size_t start = 0;
  while (start < norm.size()) {
    const auto space = norm.find(' ', start);
    const auto end = space == std::string::npos ? norm.size() : space;
    tokens.push_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

}  // namespace scaptcha
