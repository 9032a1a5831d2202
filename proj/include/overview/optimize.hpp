#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "overview/corpus.hpp"
#include "overview/error.hpp"
#include "overview/http.hpp"
#include "overview/judge.hpp"
#include "overview/permute.hpp"
#include "overview/reward.hpp"

namespace overview {

// ---------------------------------------------------------------------------
// Policy

enum class PolicyKind {
    BuiltinBorrower, // seeded derivative-free mutation of the snippet
    RemoteRewriter,  // completion-style sampling from a remote model
    Identity,        // returns the text unchanged; a no-op baseline
};

std::string_view to_string(PolicyKind k) noexcept;
PolicyKind parse_policy_kind(std::string_view s);

// Relative weights of the borrower's mutation operators.
struct MutationRates {
    double splice = 3.0;          // insert a 2-5 word phrase from a reference snippet
    double insert_query = 1.0;    // insert a query word
    double delete_span = 1.0;     // delete 1-3 consecutive words
    double reorder_clauses = 0.5; // swap two punctuation-delimited clauses
    std::size_t max_ops = 3;      // each candidate applies 1..max_ops operators
};

struct RewriterSettings {
    RemoteSettings remote;
    std::string model_id = "gemma-3-1b-it";
    double temperature = 3.0;
    int max_tokens = 128;
};

struct PolicyConfig {
    PolicyKind kind = PolicyKind::BuiltinBorrower;
    bool conditional = true;
    std::size_t group_size = 8;
    MutationRates rates;
    RewriterSettings rewriter;

    void validate() const;
};

// Completion-protocol rewriting prompt. With conditional=false the references
// block and its header are left out.
std::string render_policy_prompt(const std::vector<std::string>& references, std::string_view target, bool conditional);

// Snippets of every result except the target, in presentation order.
std::vector<std::string> reference_snippets(const QueryCase& c, std::size_t target_index);

// Text of a raw completion up to the first blank line or end-of-turn marker.
std::string strip_completion(std::string_view raw);

struct Proposal {
    std::vector<std::string> candidates;
    // The endpoint lacked a completion route and the template went out as a
    // single chat user message instead.
    bool used_chat_fallback = false;
};

class Policy {
public:
    explicit Policy(PolicyConfig config, std::shared_ptr<ApiClient> client = nullptr);

    const PolicyConfig& config() const noexcept { return config_; }

    // G candidate rewrites of the target snippet. The borrower mutates
    // `incumbent` when given (else the target snippet); the remote rewriter
    // always rewrites the original target.
    Proposal propose(const QueryCase& c, std::size_t target_index, std::size_t G, std::uint64_t seed,
                     std::optional<std::string_view> incumbent = std::nullopt) const;

private:
    std::vector<std::string> borrow(const QueryCase& c, std::size_t target_index, std::size_t G, std::uint64_t seed,
                                    std::string_view base) const;
    Proposal rewrite_remote(const QueryCase& c, std::size_t target_index, std::size_t G) const;

    PolicyConfig config_;
    std::shared_ptr<ApiClient> client_;
};

std::vector<std::string> propose_candidates(const Policy& policy, const QueryCase& c, std::size_t target_index,
                                            std::size_t G, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Group scoring and advantages

enum class AdvantageMode { Grpo, DrGrpo };

std::string_view to_string(AdvantageMode m) noexcept;
AdvantageMode parse_advantage_mode(std::string_view s);

// DrGrpo: r - mean(r). Grpo: (r - mean) / population std, all zeros when std < 1e-12.
std::vector<double> advantages(std::span<const double> rewards, AdvantageMode mode);

struct ScoredCandidate {
    RewardBreakdown breakdown;
    SelectionOutcome outcome;
};

// Copy of the case with the target snippet replaced.
QueryCase substitute_snippet(const QueryCase& c, std::size_t target_index, std::string_view snippet);

// Judges the case with `snippet` substituted at the target. The judge seed is
// derived from the judge's seed and the snippet text, so identical texts get
// identical judgments.
SelectionOutcome judge_substituted(const Judge& judge, const QueryCase& c, std::size_t target_index,
                                   std::string_view snippet);

struct ScoreOptions {
    std::size_t step = 0;
    // Original text for the length and similarity terms; defaults to the
    // case's target snippet.
    std::optional<std::string> reference_text;
    EmbeddingProvider* embedder = nullptr; // defaults to a HashingEmbedder
    std::size_t parallel = 1;
};

std::vector<ScoredCandidate> score_group(const Judge& judge, const RewardConfig& reward, const QueryCase& c,
                                         std::size_t target_index, std::span<const std::string> candidates,
                                         const ScoreOptions& options = {});

struct RolloutGroup {
    std::string case_id;
    std::size_t target_index = 0;
    std::vector<std::string> candidates;
    std::vector<RewardBreakdown> breakdowns;
    std::vector<double> advantages;
    AdvantageMode mode = AdvantageMode::DrGrpo;
    std::size_t step = 0;
};

RolloutGroup make_rollout_group(const QueryCase& c, std::size_t target_index, std::vector<std::string> candidates,
                                const std::vector<ScoredCandidate>& scored, AdvantageMode mode, std::size_t step);

// ---------------------------------------------------------------------------
// Closed-loop optimization

struct GenerationStats {
    std::size_t generation = 0;
    double best_total = 0.0; // incumbent after this generation
    double mean_total = 0.0; // over the proposed group
    double mean_length_ratio = 0.0;
    int best_cited = 0;
    double best_length_ratio = 0.0;
    std::string best_text;
};

struct OptimizationTrace {
    std::vector<GenerationStats> generations;
    bool used_chat_fallback = false;
};

struct OptimizationResult {
    std::string best_text;
    RewardBreakdown best;
    RewardBreakdown initial;
    OptimizationTrace trace;
};

// Thrown when a judge or policy error aborts optimization; carries the trace so far.
class OptimizationError : public Error {
public:
    OptimizationError(const std::string& message, OptimizationTrace partial)
        : Error(message), partial_(std::move(partial)) {}
    const OptimizationTrace& partial_trace() const noexcept { return partial_; }

private:
    OptimizationTrace partial_;
};

struct OptimizeOptions {
    AdvantageMode mode = AdvantageMode::DrGrpo;
    EmbeddingProvider* embedder = nullptr;
    std::size_t parallel = 1;
};

// Generation loop with elitism: the incumbent is replaced only by a candidate
// with a strictly higher total reward.
OptimizationResult closed_loop_optimize(const QueryCase& c, std::size_t target_index, const Policy& policy,
                                        const Judge& judge, const RewardConfig& reward, std::size_t generations,
                                        std::uint64_t seed, const OptimizeOptions& options = {});

// ---------------------------------------------------------------------------
// Evaluation under permutations

// Lowest index not cited by the Direct outcome.
std::size_t default_target(const SelectionOutcome& direct, std::size_t n_results);

struct KindShare {
    PermutationKind kind = PermutationKind::Direct;
    std::size_t n = 0;
    std::size_t cited_before = 0;
    std::size_t cited_after = 0;

    double share_before() const noexcept { return n ? static_cast<double>(cited_before) / static_cast<double>(n) : 0.0; }
    double share_after() const noexcept { return n ? static_cast<double>(cited_after) / static_cast<double>(n) : 0.0; }
};

struct CaseEvaluation {
    std::string case_id;
    std::size_t target_index = 0;
    std::string original;
    std::string rewritten;
    std::vector<PermutationKind> cited_before;
    std::vector<PermutationKind> cited_after;
};

struct CaseFailure {
    std::string case_id;
    std::string message;
};

struct EvaluationReport {
    std::vector<KindShare> kinds;
    std::vector<CaseEvaluation> cases;
    std::vector<CaseFailure> failures;

    const KindShare* find(PermutationKind k) const;
};

struct EvaluateOptions {
    RewardConfig reward;
    // 0: one sampled rewrite. >0: that many closed-loop generations against the
    // Direct judge, keeping the best rewrite.
    std::size_t generations = 0;
    SuiteOptions suite;
    EmbeddingProvider* embedder = nullptr;
};

EvaluationReport evaluate_policy(const Corpus& test_corpus, const Policy& policy, const Judge& judge,
                                 const std::vector<PermutationKind>& kinds, std::uint64_t seed,
                                 const EvaluateOptions& options = {});

} // namespace overview
