#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mdi::text {

// Decodes UTF-8; invalid byte sequences become U+FFFD so callers stay total.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view cps);

enum class Script {
    none, // digits, punctuation, symbols, whitespace
    latin,
    arabic,
    cyrillic,
    greek,
    hebrew,
    cjk,
    other,
};

Script script_of(char32_t cp);

// Arabic letter blocks: U+0600-06FF, U+0750-077F, U+08A0-08FF, excluding tashkeel.
bool is_arabic_letter(char32_t cp);
// Tashkeel range U+064B-0652 plus superscript alef U+0670.
bool is_arabic_diacritic(char32_t cp);
bool is_letter(char32_t cp);
bool is_punct(char32_t cp);
bool is_space(char32_t cp);
bool is_word_char(char32_t cp); // [A-Za-z0-9_]

std::vector<std::string> whitespace_tokens(std::string_view s);

} // namespace mdi::text
