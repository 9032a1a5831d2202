#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "overview/corpus.hpp"
#include "overview/http.hpp"

namespace overview {

enum class PromptVariant { Baseline, SlightChange, SignificantChange };

// kUniform is the null-model judge: it ignores content and picks urls_k
// results uniformly at random from the config seed.
enum class JudgeKind { Remote, Synthetic, Uniform };

std::string_view to_string(PromptVariant v) noexcept;
std::string_view to_string(JudgeKind k) noexcept;
PromptVariant parse_prompt_variant(std::string_view s);
JudgeKind parse_judge_kind(std::string_view s);

// Weights of the deterministic synthetic judge. `favored_tokens` is an
// optional lexicon term used to model a judge that prefers specific wording.
struct SyntheticWeights {
    double w_keyword = 1.0;
    double w_length = 0.0;
    double w_domain = 0.0;
    double w_title = 0.0;
    std::map<std::string, double> domain_priors;
    double w_favored = 0.0;
    std::set<std::string> favored_tokens;

    void validate() const;
};

struct JudgeConfig {
    JudgeKind kind = JudgeKind::Synthetic;
    std::string model_id = "gpt-4.1-nano";
    double temperature = 0.0;
    PromptVariant prompt_variant = PromptVariant::Baseline;
    std::size_t urls_k = 3;
    RemoteSettings remote;
    SyntheticWeights weights;
    std::uint64_t seed = 0;

    void validate() const;
};

// Temperature actually sent for a model: GPT-5 family models only accept 1.0.
double effective_temperature(std::string_view model_id, double requested) noexcept;

struct JudgeFingerprint {
    JudgeKind kind = JudgeKind::Synthetic;
    std::string model_id;
    PromptVariant prompt_variant = PromptVariant::Baseline;
    double temperature = 0.0;

    bool operator==(const JudgeFingerprint&) const = default;
    std::string to_string() const;
};

struct SelectionOutcome {
    // Distinct, in-range result IDs in the order the judge gave them.
    std::vector<int> selected_ids;
    std::string raw_response;
    JudgeFingerprint fingerprint;

    bool contains(int id) const;
    bool operator==(const SelectionOutcome&) const = default;
};

struct RenderedPrompt {
    std::string system;
    std::string user;
};

// Instruction template for a variant with {search_term}, {urls_k} and {ds}
// substituted; `user` carries the results as a JSON object keyed "0".."n-1".
RenderedPrompt render_prompt(PromptVariant variant, std::string_view query, std::span<const SearchResult> results,
                             std::size_t urls_k);

// The results payload of the user message.
std::string results_payload(std::span<const SearchResult> results);

// "Answer: 3, 1, 7"
std::string format_answer(std::span<const int> ids);

// Parses the last "Answer:" line carrying exactly `urls_k` comma-separated ids.
std::vector<int> parse_selection(std::string_view raw, std::size_t n_results, std::size_t urls_k);

// Parses "[link: URL]" citations (the significant-change prompt's answer form).
// Each cited URL credits every presented result carrying that URL, so the list
// may be shorter or longer than urls_k.
std::vector<int> parse_link_selection(std::string_view raw, std::span<const SearchResult> results);

// Dispatches on the variant's answer form.
std::vector<int> parse_response(PromptVariant variant, std::string_view raw, std::span<const SearchResult> results,
                                std::size_t urls_k);

double synthetic_score(const SyntheticWeights& w, std::string_view query, const SearchResult& result,
                       std::size_t max_len_in_set);

// Content-only scores for every result, as used by synthetic_select.
std::vector<double> synthetic_scores(const SyntheticWeights& w, std::string_view query,
                                     std::span<const SearchResult> results);

SelectionOutcome synthetic_select(const JudgeConfig& config, std::string_view query,
                                  std::span<const SearchResult> results);

SelectionOutcome uniform_select(const JudgeConfig& config, std::span<const SearchResult> results);

// Per-call overrides applied by permutation experiments.
struct JudgeOverride {
    std::optional<double> temperature;
    std::optional<PromptVariant> prompt_variant;
    std::optional<std::string> model_id;

    bool empty() const noexcept { return !temperature && !prompt_variant && !model_id; }
};

// A configured judge. Copies share the remote client, so the in-flight limit
// applies across every copy derived from the same judge.
class Judge {
public:
    explicit Judge(JudgeConfig config, std::shared_ptr<ApiClient> client = nullptr);

    const JudgeConfig& config() const noexcept { return config_; }
    JudgeFingerprint fingerprint() const;

    Judge with_override(const JudgeOverride& o) const;
    Judge with_seed(std::uint64_t seed) const;

    SelectionOutcome select(std::string_view query, std::span<const SearchResult> results) const;

    // Null for non-remote judges.
    const std::shared_ptr<ApiClient>& client() const noexcept { return client_; }

private:
    SelectionOutcome remote_select(std::string_view query, std::span<const SearchResult> results) const;

    JudgeConfig config_;
    std::shared_ptr<ApiClient> client_;
};

SelectionOutcome judge_select(const JudgeConfig& config, std::string_view query, std::span<const SearchResult> results);

} // namespace overview
