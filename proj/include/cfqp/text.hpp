#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfqp::text {

// Canonical composition (NFC). Throws SchemaError on invalid UTF-8.
std::string nfc(std::string_view utf8);

// ASCII whitespace trim (space, tab, CR, LF).
std::string trim(std::string_view s);

// Shared tokenizer: each CJK ideograph is its own token; maximal runs of
// ASCII alphanumerics are tokens, folded to lowercase. Everything else
// separates. Used identically by the hash embedder, the topic extractor and
// the Jaccard metric so their notions of "word" agree.
std::vector<std::string> tokenize(std::string_view utf8);

bool is_cjk(char32_t cp);

std::uint64_t fnv1a64(std::string_view bytes);

std::string sha256_hex(std::string_view bytes);

// "0.9", "0.65", "1" -- weight rendering for memory blocks.
std::string format_weight(double w);

// First real number appearing in s, if any (for judge replies).
std::optional<double> parse_first_real(std::string_view s);

// Whole string (after trim) must be a base-10 integer.
std::optional<long> parse_strict_int(std::string_view s);

std::string to_lower_ascii(std::string_view s);

bool contains(std::string_view haystack, std::string_view needle);

std::vector<std::string> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// RFC3339 UTC timestamp for a unix time; now_rfc3339() uses the wall clock.
std::string rfc3339_utc(std::int64_t unix_seconds);
std::string now_rfc3339();

bool is_stopword(std::string_view token);

}  // namespace cfqp::text
