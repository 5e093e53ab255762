#include "cfqp/text.hpp"

#include <unicode/unorm2.h>
#include <unicode/ustring.h>

#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <stdexcept>
#include <unordered_set>

#include "cfqp/errors.hpp"

namespace cfqp::text {

namespace {

std::u16string utf8_to_utf16(std::string_view utf8) {
    std::u16string out(utf8.size() + 1, u'\0');
    UErrorCode status = U_ZERO_ERROR;
    int32_t len = 0;
    u_strFromUTF8(out.data(), static_cast<int32_t>(out.size()), &len, utf8.data(),
                  static_cast<int32_t>(utf8.size()), &status);
    if (U_FAILURE(status)) {
        throw SchemaError("invalid UTF-8 input");
    }
    out.resize(static_cast<std::size_t>(len));
    return out;
}

std::string utf16_to_utf8(const std::u16string& utf16) {
    std::string out(utf16.size() * 4 + 1, '\0');
    UErrorCode status = U_ZERO_ERROR;
    int32_t len = 0;
    u_strToUTF8(out.data(), static_cast<int32_t>(out.size()), &len, utf16.data(),
                static_cast<int32_t>(utf16.size()), &status);
    if (U_FAILURE(status)) {
        throw SchemaError("UTF-16 to UTF-8 conversion failed");
    }
    out.resize(static_cast<std::size_t>(len));
    return out;
}

// Decode one UTF-8 codepoint at i; advances i. Throws on malformed input.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    unsigned char b0 = byte(i);
    auto cont = [&](std::size_t k) {
        return k < s.size() && (byte(k) & 0xC0) == 0x80;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
        char32_t cp = (char32_t(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
        i += 2;
        if (cp < 0x80) throw SchemaError("overlong UTF-8 sequence");
        return cp;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
        char32_t cp = (char32_t(b0 & 0x0F) << 12) | (char32_t(byte(i + 1) & 0x3F) << 6) |
                      (byte(i + 2) & 0x3F);
        i += 3;
        if (cp < 0x800) throw SchemaError("overlong UTF-8 sequence");
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        char32_t cp = (char32_t(b0 & 0x07) << 18) | (char32_t(byte(i + 1) & 0x3F) << 12) |
                      (char32_t(byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
        i += 4;
        if (cp < 0x10000 || cp > 0x10FFFF) throw SchemaError("invalid UTF-8 sequence");
        return cp;
    }
    throw SchemaError("invalid UTF-8 sequence");
}

void encode_utf8(char32_t cp, std::string& out) {
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

const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> kStop = {
        "a",     "about", "also",  "an",    "and",   "anything", "are",  "as",
        "at",    "be",    "but",   "by",    "can",   "could",    "did",  "do",
        "does",
        "else",  "for",   "from",  "had",   "has",      "have", "hmm",   "how",
        "i",     "if",    "in",    "is",    "it",       "its",  "just",  "me",
        "my",    "of",    "okay",  "on",    "or",       "our",  "please", "shall",
        "should", "so",   "tell",  "that",  "the",      "their", "then",  "there",
        "these", "they",  "this",  "those", "though",   "to",    "was",   "we",
        "were",  "what",  "when",  "where", "which",    "who",   "why",   "will",
        "with",  "would", "you",   "your",
    };
    return kStop;
}

}  // namespace

std::string nfc(std::string_view utf8) {
    if (utf8.empty()) return {};
    UErrorCode status = U_ZERO_ERROR;
    const UNormalizer2* norm = unorm2_getNFCInstance(&status);
    if (U_FAILURE(status)) {
        throw std::runtime_error("ICU NFC normalizer unavailable");
    }
    std::u16string in = utf8_to_utf16(utf8);
    std::u16string out(in.size() * 2 + 8, u'\0');
    status = U_ZERO_ERROR;
    int32_t len = unorm2_normalize(norm, in.data(), static_cast<int32_t>(in.size()), out.data(),
                                   static_cast<int32_t>(out.size()), &status);
    if (U_FAILURE(status)) {
        throw SchemaError("NFC normalization failed");
    }
    out.resize(static_cast<std::size_t>(len));
    return utf16_to_utf8(out);
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (b < e && is_ws(s[b])) ++b;
    while (e > b && is_ws(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // CJK Unified Ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // Extension A
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // Compatibility Ideographs
           (cp >= 0x20000 && cp <= 0x2A6DF);    // Extension B
}

std::vector<std::string> tokenize(std::string_view utf8) {
    std::vector<std::string> tokens;
    std::string run;
    auto flush = [&] {
        if (!run.empty()) {
            tokens.push_back(run);
            run.clear();
        }
    };
    std::size_t i = 0;
    while (i < utf8.size()) {
        char32_t cp = decode_utf8(utf8, i);
        if (cp < 0x80 && std::isalnum(static_cast<int>(cp))) {
            run.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
        } else if (is_cjk(cp)) {
            flush();
            std::string one;
            encode_utf8(cp, one);
            tokens.push_back(std::move(one));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string format_weight(double w) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", w);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

std::optional<double> parse_first_real(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        bool starts_number = std::isdigit(static_cast<unsigned char>(c)) ||
                             ((c == '-' || c == '+' || c == '.') && i + 1 < s.size() &&
                              std::isdigit(static_cast<unsigned char>(s[i + 1])));
        if (!starts_number) continue;
        std::string tail(s.substr(i));
        char* end = nullptr;
        double v = std::strtod(tail.c_str(), &end);
        if (end != tail.c_str()) return v;
    }
    return std::nullopt;
}

std::optional<long> parse_strict_int(std::string_view s) {
    std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    std::size_t pos = 0;
    if (t[0] == '-' || t[0] == '+') pos = 1;
    if (pos == t.size()) return std::nullopt;
    for (std::size_t i = pos; i < t.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(t[i]))) return std::nullopt;
    }
    try {
        return std::stol(t);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        std::string_view line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::string rfc3339_utc(std::int64_t unix_seconds) {
    std::time_t t = static_cast<std::time_t>(unix_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string now_rfc3339() {
    return rfc3339_utc(static_cast<std::int64_t>(std::time(nullptr)));
}

bool is_stopword(std::string_view token) {
    return stopwords().count(token) > 0;
}

}  // namespace cfqp::text
