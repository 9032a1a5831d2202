#include "overview/judge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include <fmt/format.h>
#include <json.hpp>

#include "overview/error.hpp"
#include "overview/rng.hpp"
#include "overview/text.hpp"

namespace overview {

std::string_view to_string(PromptVariant v) noexcept {
    switch (v) {
    case PromptVariant::Baseline: return "baseline";
    case PromptVariant::SlightChange: return "slight_change";
    case PromptVariant::SignificantChange: return "significant_change";
    }
    return "baseline";
}

std::string_view to_string(JudgeKind k) noexcept {
    switch (k) {
    case JudgeKind::Remote: return "remote";
    case JudgeKind::Synthetic: return "synthetic";
    case JudgeKind::Uniform: return "uniform";
    }
    return "synthetic";
}

PromptVariant parse_prompt_variant(std::string_view s) {
    if (s == "baseline") return PromptVariant::Baseline;
    if (s == "slight_change" || s == "slight") return PromptVariant::SlightChange;
    if (s == "significant_change" || s == "significant") return PromptVariant::SignificantChange;
    throw ConfigError(fmt::format("unknown prompt variant '{}'", s));
}

JudgeKind parse_judge_kind(std::string_view s) {
    if (s == "remote") return JudgeKind::Remote;
    if (s == "synthetic") return JudgeKind::Synthetic;
    if (s == "uniform") return JudgeKind::Uniform;
    throw ConfigError(fmt::format("unknown judge kind '{}'", s));
}

void SyntheticWeights::validate() const {
    for (double w : {w_keyword, w_length, w_domain, w_title, w_favored}) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("synthetic judge weights must be finite and >= 0");
    }
    if (w_keyword + w_length + w_domain + w_title + w_favored <= 0.0) {
        throw ConfigError("synthetic judge needs at least one positive weight");
    }
    for (const auto& [domain, prior] : domain_priors) {
        if (!(prior >= 0.0 && prior <= 1.0)) throw ConfigError(fmt::format("domain prior for '{}' outside [0,1]", domain));
    }
}

void JudgeConfig::validate() const {
    if (urls_k < 1) throw ConfigError("urls_k must be >= 1");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("judge temperature must be >= 0");
    switch (kind) {
    case JudgeKind::Remote:
        if (remote.endpoint.empty()) throw ConfigError("remote judge requires an endpoint");
        if (model_id.empty()) throw ConfigError("remote judge requires a model_id");
        break;
    case JudgeKind::Synthetic: weights.validate(); break;
    case JudgeKind::Uniform: break;
    }
}

double effective_temperature(std::string_view model_id, double requested) noexcept {
    return model_id.starts_with("gpt-5") ? 1.0 : requested;
}

std::string JudgeFingerprint::to_string() const {
    return fmt::format("{}:{}:{}:t={}", overview::to_string(kind), model_id, overview::to_string(prompt_variant),
                       temperature);
}

bool SelectionOutcome::contains(int id) const {
    return std::find(selected_ids.begin(), selected_ids.end(), id) != selected_ids.end();
}

// ---------------------------------------------------------------------------
// Prompts

namespace {

constexpr std::string_view kBaselineTemplate =
    "The user will provide a dictionary of search results in JSON format \n"
    "for search query \"{search_term}\".\n"
    "Return only ids of {urls_k} most relevant sources for the provided search query. \n"
    "Return the answer in the format: \"Answer: {ds}\"";

constexpr std::string_view kSlightTemplate =
    "The user will provide a dictionary of search results in JSON format \n"
    "for search query \"{search_term}\". \n"
    "Prepare the answer to the user's search query based on {urls_k} most relevant sources \n"
    "for the provided search query. Return me just the refences ids. \n"
    "Return the answer in the format: \"Answer: {ds}\"";

constexpr std::string_view kSignificantTemplate =
    "The user will provide a dictionary of search results in JSON format \n"
    "for search query \"{search_term}\".\n"
    "Prepare the answer to the user's search query. Use at most three reference, provide \n"
    "source URLs for each of them in the form of [link: ...]";

std::string_view template_for(PromptVariant v) {
    switch (v) {
    case PromptVariant::Baseline: return kBaselineTemplate;
    case PromptVariant::SlightChange: return kSlightTemplate;
    case PromptVariant::SignificantChange: return kSignificantTemplate;
    }
    return kBaselineTemplate;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

} // namespace

std::string results_payload(std::span<const SearchResult> results) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < results.size(); ++i) {
        nlohmann::ordered_json item;
        item["url"] = results[i].url;
        item["title"] = results[i].title;
        item["snippet"] = results[i].snippet;
        doc[std::to_string(i)] = std::move(item);
    }
    return doc.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

RenderedPrompt render_prompt(PromptVariant variant, std::string_view query, std::span<const SearchResult> results,
                             std::size_t urls_k) {
    std::vector<std::string> ds(urls_k, "ID");
    std::string system(template_for(variant));
    replace_all(system, "{search_term}", query);
    replace_all(system, "{urls_k}", std::to_string(urls_k));
    replace_all(system, "{ds}", text::join(ds, ", "));
    return {std::move(system), results_payload(results)};
}

std::string format_answer(std::span<const int> ids) {
    std::string out = "Answer: ";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(ids[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

std::vector<int> parse_selection(std::string_view raw, std::size_t n_results, std::size_t urls_k) {
    static const std::regex kAnswer(R"(Answer:\s*\[?\s*(-?\d+(?:\s*,\s*-?\d+)*))");
    const std::string text(raw);
    std::smatch last;
    bool found = false;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kAnswer); it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    if (!found) {
        throw SelectionParseError(SelectionErrorKind::NoAnswerPattern, "no \"Answer:\" line with ids found", text);
    }

    std::vector<int> ids;
    static const std::regex kInt(R"(-?\d+)");
    const std::string list = last[1].str();
    for (auto it = std::sregex_iterator(list.begin(), list.end(), kInt); it != std::sregex_iterator(); ++it) {
        try {
            ids.push_back(std::stoi(it->str()));
        } catch (const std::out_of_range&) {
            throw SelectionParseError(SelectionErrorKind::IdOutOfRange, fmt::format("id {} out of range", it->str()), text);
        }
    }
    if (ids.size() != urls_k) {
        throw SelectionParseError(SelectionErrorKind::WrongCount,
                                  fmt::format("expected {} ids, got {}", urls_k, ids.size()), text);
    }
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= n_results) {
            throw SelectionParseError(SelectionErrorKind::IdOutOfRange,
                                      fmt::format("id {} outside [0, {})", id, n_results), text);
        }
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (std::find(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(i), ids[i]) != ids.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw SelectionParseError(SelectionErrorKind::DuplicateId, fmt::format("duplicate id {}", ids[i]), text);
        }
    }
    return ids;
}

namespace {

std::string normalize_url(std::string_view url) {
    auto s = text::to_lower(text::trim(url));
    while (!s.empty() && s.back() == '/') s.pop_back();
    return s;
}

} // namespace

std::vector<int> parse_link_selection(std::string_view raw, std::span<const SearchResult> results) {
    static const std::regex kLink(R"(\[link:\s*([^\]\s]+)\s*\])");
    const std::string text(raw);
    std::vector<int> ids;
    bool any_link = false;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kLink); it != std::sregex_iterator(); ++it) {
        any_link = true;
        const auto cited = normalize_url((*it)[1].str());
        for (std::size_t i = 0; i < results.size(); ++i) {
            const int id = static_cast<int>(i);
            if (normalize_url(results[i].url) == cited && std::find(ids.begin(), ids.end(), id) == ids.end()) {
                ids.push_back(id);
            }
        }
    }
    if (!any_link) throw SelectionParseError(SelectionErrorKind::NoAnswerPattern, "no [link: ...] citation found", text);
    if (ids.empty()) {
        throw SelectionParseError(SelectionErrorKind::IdOutOfRange, "cited links match no presented result", text);
    }
    return ids;
}

std::vector<int> parse_response(PromptVariant variant, std::string_view raw, std::span<const SearchResult> results,
                                std::size_t urls_k) {
    if (variant == PromptVariant::SignificantChange) {
        // Models sometimes answer in the id form anyway; accept it when present.
        try {
            return parse_link_selection(raw, results);
        } catch (const SelectionParseError& e) {
            if (e.kind() != SelectionErrorKind::NoAnswerPattern) throw;
            return parse_selection(raw, results.size(), urls_k);
        }
    }
    return parse_selection(raw, results.size(), urls_k);
}

// ---------------------------------------------------------------------------
// Synthetic judge

double synthetic_score(const SyntheticWeights& w, std::string_view query, const SearchResult& result,
                       std::size_t max_len_in_set) {
    if (max_len_in_set < 1) throw DomainError("max_len_in_set must be >= 1");
    const auto q = text::token_set(query);
    double score = 0.0;
    if (w.w_keyword > 0.0) score += w.w_keyword * text::jaccard(q, text::token_set(result.snippet));
    if (w.w_title > 0.0) score += w.w_title * text::jaccard(q, text::token_set(result.title));
    if (w.w_length > 0.0) {
        const double ratio = static_cast<double>(text::token_count(result.snippet)) / static_cast<double>(max_len_in_set);
        score += w.w_length * std::min(ratio, 1.0);
    }
    if (w.w_domain > 0.0) {
        if (const auto domain = text::url_domain(result.url)) {
            if (auto it = w.domain_priors.find(*domain); it != w.domain_priors.end()) score += w.w_domain * it->second;
        }
    }
    if (w.w_favored > 0.0 && !w.favored_tokens.empty()) {
        const auto toks = text::token_set(result.snippet);
        std::size_t hits = 0;
        for (const auto& t : w.favored_tokens) hits += toks.count(t);
        score += w.w_favored * static_cast<double>(hits) / static_cast<double>(w.favored_tokens.size());
    }
    return score;
}

std::vector<double> synthetic_scores(const SyntheticWeights& w, std::string_view query,
                                     std::span<const SearchResult> results) {
    std::size_t max_len = 1;
    for (const auto& r : results) max_len = std::max(max_len, text::token_count(r.snippet));
    std::vector<double> scores;
    scores.reserve(results.size());
    for (const auto& r : results) scores.push_back(synthetic_score(w, query, r, max_len));
    return scores;
}

namespace {

void check_k(const JudgeConfig& config, std::size_t n) {
    if (config.urls_k > n) {
        throw DomainError(fmt::format("urls_k={} exceeds the {} presented results", config.urls_k, n));
    }
}

JudgeFingerprint fingerprint_of(const JudgeConfig& c) {
    const double t = c.kind == JudgeKind::Remote ? effective_temperature(c.model_id, c.temperature) : c.temperature;
    return {c.kind, c.model_id, c.prompt_variant, t};
}

} // namespace

SelectionOutcome synthetic_select(const JudgeConfig& config, std::string_view query,
                                  std::span<const SearchResult> results) {
    check_k(config, results.size());
    auto scores = synthetic_scores(config.weights, query, results);
    if (config.temperature > 0.0) {
        Rng rng(config.seed);
        for (auto& s : scores) s += config.temperature * rng.gumbel();
    }
    std::vector<int> order(results.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    order.resize(config.urls_k);
    SelectionOutcome out{order, format_answer(order), fingerprint_of(config)};
    return out;
}

SelectionOutcome uniform_select(const JudgeConfig& config, std::span<const SearchResult> results) {
    check_k(config, results.size());
    std::vector<int> ids(results.size());
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(config.seed);
    for (std::size_t i = 0; i < config.urls_k; ++i) std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
    ids.resize(config.urls_k);
    return {ids, format_answer(ids), fingerprint_of(config)};
}

// ---------------------------------------------------------------------------
// Judge

Judge::Judge(JudgeConfig config, std::shared_ptr<ApiClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
    config_.validate();
    if (config_.kind == JudgeKind::Remote && !client_) client_ = std::make_shared<ApiClient>(config_.remote);
}

JudgeFingerprint Judge::fingerprint() const { return fingerprint_of(config_); }

Judge Judge::with_override(const JudgeOverride& o) const {
    JudgeConfig c = config_;
    if (o.temperature) c.temperature = *o.temperature;
    if (o.prompt_variant) c.prompt_variant = *o.prompt_variant;
    if (o.model_id) c.model_id = *o.model_id;
    return Judge(std::move(c), client_);
}

Judge Judge::with_seed(std::uint64_t seed) const {
    JudgeConfig c = config_;
    c.seed = seed;
    return Judge(std::move(c), client_);
}

SelectionOutcome Judge::select(std::string_view query, std::span<const SearchResult> results) const {
    switch (config_.kind) {
    case JudgeKind::Synthetic: return synthetic_select(config_, query, results);
    case JudgeKind::Uniform: return uniform_select(config_, results);
    case JudgeKind::Remote: return remote_select(query, results);
    }
    throw ConfigError("unknown judge kind");
}

SelectionOutcome Judge::remote_select(std::string_view query, std::span<const SearchResult> results) const {
    check_k(config_, results.size());
    const auto prompt = render_prompt(config_.prompt_variant, query, results, config_.urls_k);
    const double temperature = effective_temperature(config_.model_id, config_.temperature);
    std::vector<ChatMessage> messages = {{"system", prompt.system}, {"user", prompt.user}};

    std::string raw = client_->chat(config_.model_id, temperature, messages);
    try {
        return {parse_response(config_.prompt_variant, raw, results, config_.urls_k), raw, fingerprint()};
    } catch (const SelectionParseError&) {
        const std::string reminder =
            config_.prompt_variant == PromptVariant::SignificantChange
                ? std::string("Cite the sources in the form of [link: ...]")
                : fmt::format("Return the answer in the format: \"Answer: {}\"",
                              text::join(std::vector<std::string>(config_.urls_k, "ID"), ", "));
        messages.push_back({"assistant", raw});
        messages.push_back({"user", reminder});
        raw = client_->chat(config_.model_id, temperature, messages);
        return {parse_response(config_.prompt_variant, raw, results, config_.urls_k), raw, fingerprint()};
    }
}

SelectionOutcome judge_select(const JudgeConfig& config, std::string_view query, std::span<const SearchResult> results) {
    return Judge(config).select(query, results);
}

} // namespace overview
