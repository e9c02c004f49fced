#pragma once

// Minimal UTF-8 handling: decoding, scalar counting, and the character
// classes needed for corpus segmentation and uncased tokenization.
// Accent folding covers Latin-1 Supplement and Latin Extended-A, which is
// the range exercised by the bundled corpora.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sbae::uni {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes one UTF-8 sequence starting at `i`, advancing `i`.
// Malformed bytes decode to U+FFFD and advance by one.
inline char32_t decode_next(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return kReplacement;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return kReplacement;
    }
    for (int k = 1; k < len; ++k) {
        const unsigned char bk = byte(i + static_cast<std::size_t>(k));
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return kReplacement;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

inline void encode(char32_t cp, std::string& out) {
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

inline std::vector<char32_t> decode(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) out.push_back(decode_next(s, i));
    return out;
}

// Number of Unicode scalar values.
inline std::size_t scalar_count(std::string_view s) {
    std::size_t i = 0, n = 0;
    while (i < s.size()) {
        decode_next(s, i);
        ++n;
    }
    return n;
}

inline bool is_whitespace(char32_t cp) {
    switch (cp) {
        case U' ':
        case U'\t':
        case U'\n':
        case U'\r':
        case 0x0B:
        case 0x0C:
        case 0x00A0:
        case 0x2000:
        case 0x2001:
        case 0x2002:
        case 0x2003:
        case 0x2004:
        case 0x2005:
        case 0x2006:
        case 0x2007:
        case 0x2008:
        case 0x2009:
        case 0x200A:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x3000:
            return true;
        default:
            return false;
    }
}

inline bool is_control(char32_t cp) {
    if (cp == U'\t' || cp == U'\n' || cp == U'\r') return false;  // treated as whitespace
    return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp < 0xA0);
}

// ASCII punctuation plus common typographic punctuation.
inline bool is_punct(char32_t cp) {
    if ((cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) ||
        (cp >= 123 && cp <= 126)) {
        return true;
    }
    switch (cp) {
        case 0x2013:  // en dash
        case 0x2014:  // em dash
        case 0x2018:
        case 0x2019:  // single quotes
        case 0x201C:
        case 0x201D:  // double quotes
        case 0x2026:  // ellipsis
            return true;
        default:
            return false;
    }
}

inline bool is_combining_mark(char32_t cp) {
    return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x1AB0 && cp <= 0x1AFF) ||
           (cp >= 0x20D0 && cp <= 0x20FF);
}

// Lowercased, accent-stripped ASCII form of a Latin-1 / Latin Extended-A
// letter; empty string if the codepoint has no such mapping.
inline const char* accent_fold(char32_t cp) {
    switch (cp) {
        case 0x00C0: return "a";
        case 0x00C1: return "a";
        case 0x00C2: return "a";
        case 0x00C3: return "a";
        case 0x00C4: return "a";
        case 0x00C5: return "a";
        case 0x00C7: return "c";
        case 0x00C8: return "e";
        case 0x00C9: return "e";
        case 0x00CA: return "e";
        case 0x00CB: return "e";
        case 0x00CC: return "i";
        case 0x00CD: return "i";
        case 0x00CE: return "i";
        case 0x00CF: return "i";
        case 0x00D1: return "n";
        case 0x00D2: return "o";
        case 0x00D3: return "o";
        case 0x00D4: return "o";
        case 0x00D5: return "o";
        case 0x00D6: return "o";
        case 0x00D9: return "u";
        case 0x00DA: return "u";
        case 0x00DB: return "u";
        case 0x00DC: return "u";
        case 0x00DD: return "y";
        case 0x00E0: return "a";
        case 0x00E1: return "a";
        case 0x00E2: return "a";
        case 0x00E3: return "a";
        case 0x00E4: return "a";
        case 0x00E5: return "a";
        case 0x00E7: return "c";
        case 0x00E8: return "e";
        case 0x00E9: return "e";
        case 0x00EA: return "e";
        case 0x00EB: return "e";
        case 0x00EC: return "i";
        case 0x00ED: return "i";
        case 0x00EE: return "i";
        case 0x00EF: return "i";
        case 0x00F1: return "n";
        case 0x00F2: return "o";
        case 0x00F3: return "o";
        case 0x00F4: return "o";
        case 0x00F5: return "o";
        case 0x00F6: return "o";
        case 0x00F9: return "u";
        case 0x00FA: return "u";
        case 0x00FB: return "u";
        case 0x00FC: return "u";
        case 0x00FD: return "y";
        case 0x00FF: return "y";
        case 0x0100: return "a";
        case 0x0101: return "a";
        case 0x0102: return "a";
        case 0x0103: return "a";
        case 0x0104: return "a";
        case 0x0105: return "a";
        case 0x0106: return "c";
        case 0x0107: return "c";
        case 0x0108: return "c";
        case 0x0109: return "c";
        case 0x010A: return "c";
        case 0x010B: return "c";
        case 0x010C: return "c";
        case 0x010D: return "c";
        case 0x010E: return "d";
        case 0x010F: return "d";
        case 0x0112: return "e";
        case 0x0113: return "e";
        case 0x0114: return "e";
        case 0x0115: return "e";
        case 0x0116: return "e";
        case 0x0117: return "e";
        case 0x0118: return "e";
        case 0x0119: return "e";
        case 0x011A: return "e";
        case 0x011B: return "e";
        case 0x011C: return "g";
        case 0x011D: return "g";
        case 0x011E: return "g";
        case 0x011F: return "g";
        case 0x0120: return "g";
        case 0x0121: return "g";
        case 0x0122: return "g";
        case 0x0123: return "g";
        case 0x0124: return "h";
        case 0x0125: return "h";
        case 0x0128: return "i";
        case 0x0129: return "i";
        case 0x012A: return "i";
        case 0x012B: return "i";
        case 0x012C: return "i";
        case 0x012D: return "i";
        case 0x012E: return "i";
        case 0x012F: return "i";
        case 0x0130: return "i";
        case 0x0134: return "j";
        case 0x0135: return "j";
        case 0x0136: return "k";
        case 0x0137: return "k";
        case 0x0139: return "l";
        case 0x013A: return "l";
        case 0x013B: return "l";
        case 0x013C: return "l";
        case 0x013D: return "l";
        case 0x013E: return "l";
        case 0x0143: return "n";
        case 0x0144: return "n";
        case 0x0145: return "n";
        case 0x0146: return "n";
        case 0x0147: return "n";
        case 0x0148: return "n";
        case 0x014C: return "o";
        case 0x014D: return "o";
        case 0x014E: return "o";
        case 0x014F: return "o";
        case 0x0150: return "o";
        case 0x0151: return "o";
        case 0x0154: return "r";
        case 0x0155: return "r";
        case 0x0156: return "r";
        case 0x0157: return "r";
        case 0x0158: return "r";
        case 0x0159: return "r";
        case 0x015A: return "s";
        case 0x015B: return "s";
        case 0x015C: return "s";
        case 0x015D: return "s";
        case 0x015E: return "s";
        case 0x015F: return "s";
        case 0x0160: return "s";
        case 0x0161: return "s";
        case 0x0162: return "t";
        case 0x0163: return "t";
        case 0x0164: return "t";
        case 0x0165: return "t";
        case 0x0168: return "u";
        case 0x0169: return "u";
        case 0x016A: return "u";
        case 0x016B: return "u";
        case 0x016C: return "u";
        case 0x016D: return "u";
        case 0x016E: return "u";
        case 0x016F: return "u";
        case 0x0170: return "u";
        case 0x0171: return "u";
        case 0x0172: return "u";
        case 0x0173: return "u";
        case 0x0174: return "w";
        case 0x0175: return "w";
        case 0x0176: return "y";
        case 0x0177: return "y";
        case 0x0178: return "y";
        case 0x0179: return "z";
        case 0x017A: return "z";
        case 0x017B: return "z";
        case 0x017C: return "z";
        case 0x017D: return "z";
        case 0x017E: return "z";
        default: return nullptr;
    }
}

inline bool is_ascii_upper(char32_t cp) { return cp >= U'A' && cp <= U'Z'; }
inline bool is_ascii_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

}  // namespace sbae::uni
