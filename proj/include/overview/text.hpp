#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace overview::text {

std::string_view trim(std::string_view s) noexcept;
std::string_view trim_right(std::string_view s) noexcept;

// Maximal non-whitespace runs, verbatim.
std::vector<std::string> words(std::string_view s);

// Lowercased words with leading/trailing ASCII punctuation stripped; words that
// are pure punctuation are dropped. This is the token notion used for keyword
// overlap and payload-marker detection.
std::vector<std::string> tokens(std::string_view s);
std::set<std::string> token_set(std::string_view s);

std::string normalize_token(std::string_view word);

// Number of maximal non-whitespace runs.
std::size_t token_count(std::string_view s) noexcept;

// |a ∩ b| / |a ∪ b|, 0 when both are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string to_lower(std::string_view s);

// True when the right-trimmed text ends with "..." or U+2026.
bool ends_with_ellipsis(std::string_view s) noexcept;

// Scheme plus non-empty host, e.g. "https://www.example.com/path".
bool is_valid_url(std::string_view url);

// Lowercased host with any leading "www." removed; nullopt if the URL has no host.
std::optional<std::string> url_domain(std::string_view url);

} // namespace overview::text
