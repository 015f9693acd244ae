#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace skillroute {

// Lowercase tokens split on non-alphanumeric characters. ASCII letters are
// case-folded; bytes >= 0x80 (UTF-8 multi-byte sequences) count as word
// characters and pass through unchanged, so non-ASCII text stays intact
// instead of being shredded per byte. No stemming, no stop-word removal.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        bool word_char = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
        if (word_char) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

} // namespace skillroute
