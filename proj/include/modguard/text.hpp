#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace modguard::text {

// Canonical form used for every match and embedding: Unicode NFKC, lowercase,
// runs of whitespace collapsed to one ASCII space, leading/trailing trimmed.
// Invalid UTF-8 sequences are replaced with U+FFFD.
std::string normalize(std::string_view raw);

// Splits normalized text into word tokens. A token is a maximal run of ASCII
// alphanumerics and non-ASCII bytes; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view normalized);

// Decodes UTF-8 into code points, substituting U+FFFD for malformed input.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

bool is_blank(std::string_view s);

}  // namespace modguard::text
