#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>

namespace skillroute {

inline std::string trim_copy(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
        ++begin;
    }
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
        --end;
    }
    return std::string(s.substr(begin, end - begin));
}

inline std::string to_lower_copy(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Truncates to at most `max_chars` characters, cutting at the last sentence
/// boundary ('.', '!' or '?') under the cap when one exists.
inline std::string truncate_at_sentence(std::string_view text, std::size_t max_chars) {
    if (text.size() <= max_chars) {
        return std::string(text);
    }
    std::string_view head = text.substr(0, max_chars);
    auto boundary = head.find_last_of(".!?");
    if (boundary == std::string_view::npos) {
        return trim_copy(head);
    }
    return trim_copy(head.substr(0, boundary + 1));
}

} // namespace skillroute
