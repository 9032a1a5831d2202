#include "overview/text.hpp"

#include <algorithm>
#include <cctype>

namespace overview::text {

namespace {

bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(char c) noexcept {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

} // namespace

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    return trim_right(s);
}

std::string_view trim_right(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) out.emplace_back(s.substr(start, i - start));
    }
    return out;
}

std::string normalize_token(std::string_view word) {
    while (!word.empty() && is_punct(word.front())) word.remove_prefix(1);
    while (!word.empty() && is_punct(word.back())) word.remove_suffix(1);
    return to_lower(word);
}

std::vector<std::string> tokens(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& w : words(s)) {
        auto t = normalize_token(w);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

std::set<std::string> token_set(std::string_view s) {
    auto toks = tokens(s);
    return {toks.begin(), toks.end()};
}

std::size_t token_count(std::string_view s) noexcept {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& t : a) common += b.count(t);
    const std::size_t uni = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(uni);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool ends_with_ellipsis(std::string_view s) noexcept {
    s = trim_right(s);
    return s.ends_with("...") || s.ends_with("…");
}

namespace {

struct UrlParts {
    std::string_view scheme;
    std::string_view host;
};

std::optional<UrlParts> split_url(std::string_view url) {
    url = trim(url);
    const auto sep = url.find("://");
    if (sep == std::string_view::npos || sep == 0) return std::nullopt;
    const auto scheme = url.substr(0, sep);
    if (!std::isalpha(static_cast<unsigned char>(scheme.front()))) return std::nullopt;
    for (char c : scheme) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') return std::nullopt;
    }
    auto rest = url.substr(sep + 3);
    auto host = rest.substr(0, rest.find_first_of("/?#"));
    if (const auto at = host.rfind('@'); at != std::string_view::npos) host.remove_prefix(at + 1);
    if (const auto colon = host.find(':'); colon != std::string_view::npos) host = host.substr(0, colon);
    if (host.empty()) return std::nullopt;
    for (char c : host) {
        if (is_space(c)) return std::nullopt;
    }
    return UrlParts{scheme, host};
}

} // namespace

bool is_valid_url(std::string_view url) {
    return split_url(url).has_value();
}

std::optional<std::string> url_domain(std::string_view url) {
    const auto parts = split_url(url);
    if (!parts) return std::nullopt;
    auto host = to_lower(parts->host);
    if (host.starts_with("www.")) host.erase(0, 4);
    return host;
}

} // namespace overview::text
