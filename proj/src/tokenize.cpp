#include "hallulens/tokenize.hpp"

#include "hallulens/util.hpp"

#include <cctype>

namespace hallulens {
namespace {

// Decodes the UTF-8 code point starting at s[i]; advances i past it.
// Malformed bytes are consumed one at a time and returned as-is.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
        ++i;
        return c;
    }
    int extra = (c >= 0xf0) ? 3 : (c >= 0xe0) ? 2 : (c >= 0xc0) ? 1 : 0;
    if (extra == 0 || i + static_cast<std::size_t>(extra) >= s.size()) {
        ++i;
        return c;
    }
    char32_t cp = c & (0x3f >> extra);
    std::size_t j = i + 1;
    for (int k = 0; k < extra; ++k, ++j) {
        unsigned char cc = static_cast<unsigned char>(s[j]);
        if ((cc & 0xc0) != 0x80) {
            ++i;
            return c;
        }
        cp = (cp << 6) | (cc & 0x3f);
    }
    i = j;
    return cp;
}

bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case U' ': case U'\t': case U'\n': case U'\r': case U'\f': case U'\v':
        case 0x0085: case 0x00a0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202f: case 0x205f: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200a;
    }
}

}  // namespace

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        char32_t cp = decode_utf8(text, i);
        if (is_unicode_space(cp)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.append(text.substr(start, i - start));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::size_t count_whitespace_tokens(std::string_view text) {
    return whitespace_tokens(text).size();
}

std::string normalize_whitespace(std::string_view text) {
    return join(whitespace_tokens(text), " ");
}

std::vector<std::string> scoring_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<std::string> split_sentences(std::string_view text) {
    auto is_closing = [](char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; };
    auto is_opening = [](char c) {
        return std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
               c == '"' || c == '\'' || c == '(' || c == '[';
    };
    std::vector<std::string> sentences;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i + 1;
        while (j < text.size() && is_closing(text[j])) ++j;
        std::size_t ws = j;
        while (ws < text.size() && std::isspace(static_cast<unsigned char>(text[ws]))) ++ws;
        if (ws == j || ws >= text.size()) continue;  // needs whitespace + a following char
        if (!is_opening(text[ws])) continue;
        std::string sentence = trim(text.substr(start, j - start));
        if (!sentence.empty()) sentences.push_back(std::move(sentence));
        start = ws;
        i = ws - 1;
    }
    std::string tail = trim(text.substr(start));
    if (!tail.empty()) sentences.push_back(std::move(tail));
    return sentences;
}

}  // namespace hallulens
