#include "mdi/text.hpp"

namespace mdi::text {

std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0xFFFD;
        std::size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = true;
        for (std::size_t k = 1; k < len; ++k) {
            unsigned char bk = static_cast<unsigned char>(s[i + k]);
            if ((bk & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
            (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size() * 2);
    for (char32_t cp : cps) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

bool is_arabic_diacritic(char32_t cp) {
    return (cp >= 0x064B && cp <= 0x0652) || cp == 0x0670;
}

bool is_arabic_letter(char32_t cp) {
    if (is_arabic_diacritic(cp)) return false;
    bool in_block = (cp >= 0x0600 && cp <= 0x06FF) || (cp >= 0x0750 && cp <= 0x077F) ||
                    (cp >= 0x08A0 && cp <= 0x08FF);
    if (!in_block) return false;
    // Exclude Arabic-block digits, punctuation and signs.
    if (cp >= 0x0660 && cp <= 0x0669) return false; // Arabic-Indic digits
    if (cp >= 0x06F0 && cp <= 0x06F9) return false; // extended digits
    if (cp == 0x060C || cp == 0x061B || cp == 0x061F || cp == 0x066A || cp == 0x066B ||
        cp == 0x066C || cp == 0x066D || cp == 0x06D4)
        return false;
    if (cp >= 0x0600 && cp <= 0x060F) return false; // signs/format controls
    if (cp >= 0x0610 && cp <= 0x061A) return false; // honorific marks
    if (cp >= 0x06D6 && cp <= 0x06ED) return false; // Quranic annotation marks
    return true;
}

Script script_of(char32_t cp) {
    if ((cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) return Script::latin;
    if ((cp >= 0x00C0 && cp <= 0x024F) && cp != 0x00D7 && cp != 0x00F7) return Script::latin;
    if (cp >= 0x1E00 && cp <= 0x1EFF) return Script::latin;
    if (is_arabic_letter(cp) || is_arabic_diacritic(cp)) return Script::arabic;
    if ((cp >= 0x0400 && cp <= 0x04FF) || (cp >= 0x0500 && cp <= 0x052F)) return Script::cyrillic;
    if (cp >= 0x0370 && cp <= 0x03FF) return Script::greek;
    if (cp >= 0x0590 && cp <= 0x05FF) return Script::hebrew;
    if ((cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3040 && cp <= 0x30FF) ||
        (cp >= 0xAC00 && cp <= 0xD7AF))
        return Script::cjk;
    if (cp >= 0x80 && !is_punct(cp) && !is_space(cp) && !(cp >= 0x2000 && cp <= 0x2BFF))
        return Script::other;
    return Script::none;
}

bool is_letter(char32_t cp) {
    if (is_arabic_diacritic(cp)) return false;
    Script s = script_of(cp);
    return s != Script::none;
}

bool is_punct(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') || (cp >= '[' && cp <= '`') ||
               (cp >= '{' && cp <= '~');
    }
    switch (cp) {
        case 0x060C: // ،
        case 0x061B: // ؛
        case 0x061F: // ؟
        case 0x066A: // ٪
        case 0x066B:
        case 0x066C:
        case 0x066D:
        case 0x06D4: // ۔
        case 0x00A1:
        case 0x00AB:
        case 0x00BB:
        case 0x00BF:
        case 0x2013:
        case 0x2014:
        case 0x2018:
        case 0x2019:
        case 0x201C:
        case 0x201D:
        case 0x2026:
            return true;
        default:
            return false;
    }
}

bool is_space(char32_t cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
           cp == 0x00A0 || cp == 0x2028 || cp == 0x2029 || (cp >= 0x2000 && cp <= 0x200A) ||
           cp == 0x3000;
}

bool is_word_char(char32_t cp) {
    return (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z') || (cp >= '0' && cp <= '9') ||
           cp == '_';
}

std::vector<std::string> whitespace_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::u32string cps = decode_utf8(s);
    std::u32string cur;
    for (char32_t cp : cps) {
        if (is_space(cp)) {
            if (!cur.empty()) {
                out.push_back(encode_utf8(cur));
                cur.clear();
            }
        } else {
            cur.push_back(cp);
        }
    }
    if (!cur.empty()) out.push_back(encode_utf8(cur));
    return out;
}

} // namespace mdi::text
