#ifndef FPEDIT_TOKENIZE_HPP
#define FPEDIT_TOKENIZE_HPP

#include <string>
#include <string_view>
#include <vector>

namespace fpedit {

// Fixed tokenization rule used by every reference backend:
//   - whitespace separates tokens and is discarded;
//   - each ASCII punctuation character is a single-character token;
//   - maximal runs of all other characters (letters, digits, bytes >= 0x80)
//     form one token. No case folding.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

} // namespace fpedit

#endif
