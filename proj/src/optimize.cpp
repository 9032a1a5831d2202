#include "overview/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overview/error.hpp"
#include "overview/parallel.hpp"
#include "overview/rng.hpp"
#include "overview/text.hpp"

namespace overview {

std::string_view to_string(PolicyKind k) noexcept {
    switch (k) {
    case PolicyKind::BuiltinBorrower: return "builtin";
    case PolicyKind::RemoteRewriter: return "remote";
    case PolicyKind::Identity: return "identity";
    }
    return "builtin";
}

PolicyKind parse_policy_kind(std::string_view s) {
    if (s == "builtin" || s == "borrower") return PolicyKind::BuiltinBorrower;
    if (s == "remote") return PolicyKind::RemoteRewriter;
    if (s == "identity") return PolicyKind::Identity;
    throw ConfigError(fmt::format("unknown policy kind '{}'", s));
}

std::string_view to_string(AdvantageMode m) noexcept { return m == AdvantageMode::Grpo ? "grpo" : "dr_grpo"; }

AdvantageMode parse_advantage_mode(std::string_view s) {
    if (s == "grpo") return AdvantageMode::Grpo;
    if (s == "dr_grpo") return AdvantageMode::DrGrpo;
    throw ConfigError(fmt::format("unknown advantage mode '{}'", s));
}

void PolicyConfig::validate() const {
    if (group_size < 1) throw ConfigError("policy group size must be >= 1");
    if (kind == PolicyKind::RemoteRewriter) {
        if (!(rewriter.temperature > 0.0)) throw ConfigError("remote rewriter temperature must be > 0");
        if (rewriter.remote.endpoint.empty()) throw ConfigError("remote rewriter requires an endpoint");
    }
    if (kind == PolicyKind::BuiltinBorrower) {
        for (double r : {rates.splice, rates.insert_query, rates.delete_span, rates.reorder_clauses}) {
            if (!(r >= 0.0)) throw ConfigError("mutation rates must be >= 0");
        }
        if (rates.splice + rates.insert_query + rates.delete_span + rates.reorder_clauses <= 0.0) {
            throw ConfigError("at least one mutation rate must be positive");
        }
        if (rates.max_ops < 1) throw ConfigError("max_ops must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// Prompt

std::string render_policy_prompt(const std::vector<std::string>& references, std::string_view target, bool conditional) {
    if (text::trim(target).empty()) throw DomainError("target phrase is empty");
    if (conditional && references.empty()) throw DomainError("conditional rewriting needs reference snippets");
    std::string out =
        "<start_of_turn>user\n"
        "Just rewrite the target phrase to make it better. Remain same formatting, no markdown.\n"
        "Look at references, take the best from them. Return just the rewritten phrase.\n"
        "\n";
    if (conditional) {
        out += "**References**:\n";
        for (std::size_t i = 0; i < references.size(); ++i) {
            std::string line = references[i];
            std::replace(line.begin(), line.end(), '\n', ' ');
            if (i) out += '\n';
            out += "- " + line;
        }
        out += "\n\n";
    }
    out += "**Target phrase**:\n";
    out += target;
    out += "<end_of_turn>\n<start_of_turn>model\nRewritten phrase:";
    return out;
}

std::vector<std::string> reference_snippets(const QueryCase& c, std::size_t target_index) {
    std::vector<std::string> refs;
    for (std::size_t i = 0; i < c.results.size(); ++i) {
        if (i != target_index) refs.push_back(c.results[i].snippet);
    }
    return refs;
}

std::string strip_completion(std::string_view raw) {
    if (const auto cue = raw.rfind("Rewritten phrase:"); cue != std::string_view::npos) {
        raw.remove_prefix(cue + std::string_view("Rewritten phrase:").size());
    }
    while (!raw.empty() && (raw.front() == ' ' || raw.front() == '\n' || raw.front() == '\r' || raw.front() == '\t')) {
        raw.remove_prefix(1);
    }
    for (std::string_view stop : {"<end_of_turn>", "\n\n", "\r\n\r\n"}) {
        if (const auto pos = raw.find(stop); pos != std::string_view::npos) raw = raw.substr(0, pos);
    }
    return std::string(text::trim(raw));
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(PolicyConfig config, std::shared_ptr<ApiClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
    config_.validate();
    if (config_.kind == PolicyKind::RemoteRewriter && !client_) {
        client_ = std::make_shared<ApiClient>(config_.rewriter.remote);
    }
}

namespace {

enum class MutationOp { Splice, InsertQuery, DeleteSpan, ReorderClauses };

bool ends_clause(const std::string& word) {
    if (word.empty()) return false;
    const char c = word.back();
    return c == '.' || c == ',' || c == ';' || c == '!' || c == '?';
}

std::vector<std::pair<std::size_t, std::size_t>> clauses(const std::vector<std::string>& words) {
    std::vector<std::pair<std::size_t, std::size_t>> out; // [begin, end)
    std::size_t begin = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (ends_clause(words[i]) || i + 1 == words.size()) {
            out.emplace_back(begin, i + 1);
            begin = i + 1;
        }
    }
    return out;
}

struct MutationContext {
    const std::vector<std::vector<std::string>>& references; // words of each reference
    const std::vector<std::string>& query_words;
};

bool apply_op(MutationOp op, std::vector<std::string>& words, const MutationContext& ctx, Rng& rng) {
    switch (op) {
    case MutationOp::Splice: {
        std::vector<std::size_t> usable;
        for (std::size_t i = 0; i < ctx.references.size(); ++i) {
            if (!ctx.references[i].empty()) usable.push_back(i);
        }
        if (usable.empty()) return false;
        const auto& ref = ctx.references[usable[rng.below(usable.size())]];
        const std::size_t len = std::min(rng.between(2, 5), ref.size());
        const std::size_t start = rng.below(ref.size() - len + 1);
        const auto pos = static_cast<std::ptrdiff_t>(rng.below(words.size() + 1));
        words.insert(words.begin() + pos, ref.begin() + static_cast<std::ptrdiff_t>(start),
                     ref.begin() + static_cast<std::ptrdiff_t>(start + len));
        return true;
    }
    case MutationOp::InsertQuery: {
        if (ctx.query_words.empty()) return false;
        const auto pos = static_cast<std::ptrdiff_t>(rng.below(words.size() + 1));
        words.insert(words.begin() + pos, rng.pick(ctx.query_words));
        return true;
    }
    case MutationOp::DeleteSpan: {
        if (words.size() < 2) return false;
        const std::size_t len = rng.between(1, std::min<std::size_t>(3, words.size() - 1));
        const auto start = static_cast<std::ptrdiff_t>(rng.below(words.size() - len + 1));
        words.erase(words.begin() + start, words.begin() + start + static_cast<std::ptrdiff_t>(len));
        return true;
    }
    case MutationOp::ReorderClauses: {
        const auto parts = clauses(words);
        if (parts.size() < 2) return false;
        const std::size_t a = rng.below(parts.size());
        std::size_t b = rng.below(parts.size() - 1);
        if (b >= a) ++b;
        std::vector<std::vector<std::string>> pieces;
        for (const auto& [lo, hi] : parts) {
            pieces.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(lo), words.begin() + static_cast<std::ptrdiff_t>(hi));
        }
        std::swap(pieces[a], pieces[b]);
        words.clear();
        for (auto& p : pieces) words.insert(words.end(), p.begin(), p.end());
        return true;
    }
    }
    return false;
}

} // namespace

std::vector<std::string> Policy::borrow(const QueryCase& c, std::size_t target_index, std::size_t G, std::uint64_t seed,
                                        std::string_view base) const {
    std::vector<std::vector<std::string>> refs;
    if (config_.conditional) {
        for (const auto& r : reference_snippets(c, target_index)) refs.push_back(text::words(r));
    }
    const auto query_words = text::words(c.query);
    const MutationContext ctx{refs, query_words};
    const auto base_words = text::words(base);

    constexpr MutationOp kOps[] = {MutationOp::Splice, MutationOp::InsertQuery, MutationOp::DeleteSpan,
                                   MutationOp::ReorderClauses};
    const double rates[] = {config_.conditional ? config_.rates.splice : 0.0, config_.rates.insert_query,
                            config_.rates.delete_span, config_.rates.reorder_clauses};

    std::vector<std::string> out;
    out.reserve(G);
    for (std::size_t i = 0; i < G; ++i) {
        Rng rng(derive_seed(seed, i));
        auto words = base_words;
        const std::size_t n_ops = rng.between(1, config_.rates.max_ops);
        for (std::size_t k = 0; k < n_ops; ++k) {
            double w[4];
            std::copy(std::begin(rates), std::end(rates), w);
            // Draw until an applicable operator fires or none remain.
            while (w[0] + w[1] + w[2] + w[3] > 0.0) {
                const std::size_t pick = rng.weighted(w);
                if (apply_op(kOps[pick], words, ctx, rng)) break;
                w[pick] = 0.0;
            }
        }
        auto candidate = text::join(words, " ");
        if (text::trim(candidate).empty()) candidate = std::string(base);
        out.push_back(std::move(candidate));
    }
    return out;
}

Proposal Policy::rewrite_remote(const QueryCase& c, std::size_t target_index, std::size_t G) const {
    const auto& target = c.results[target_index].snippet;
    const auto prompt = render_policy_prompt(config_.conditional ? reference_snippets(c, target_index)
                                                                 : std::vector<std::string>{},
                                             target, config_.conditional);
    const auto& rw = config_.rewriter;
    Proposal proposal;
    const auto sample = [&]() -> std::string {
        if (!proposal.used_chat_fallback) {
            try {
                return rw.max_tokens > 0 ? client_->complete(rw.model_id, rw.temperature, prompt, rw.max_tokens)
                                         : client_->complete(rw.model_id, rw.temperature, prompt);
            } catch (const TransportError& e) {
                if (e.status() != 404 && e.status() != 405) throw;
                spdlog::warn("completion route unavailable (HTTP {}); falling back to chat", e.status());
                proposal.used_chat_fallback = true;
            }
        }
        return client_->chat(rw.model_id, rw.temperature, {{"user", prompt}});
    };
    for (std::size_t i = 0; i < G; ++i) {
        auto text = strip_completion(sample());
        if (text.empty()) text = strip_completion(sample());
        if (text.empty()) throw TransportError(fmt::format("rewriter returned an empty candidate twice (slot {})", i), 200);
        proposal.candidates.push_back(std::move(text));
    }
    return proposal;
}

Proposal Policy::propose(const QueryCase& c, std::size_t target_index, std::size_t G, std::uint64_t seed,
                         std::optional<std::string_view> incumbent) const {
    if (target_index >= c.results.size()) {
        throw DomainError(fmt::format("target_index {} outside [0, {})", target_index, c.results.size()));
    }
    const std::string_view base = incumbent ? *incumbent : std::string_view(c.results[target_index].snippet);
    switch (config_.kind) {
    case PolicyKind::Identity: return {std::vector<std::string>(G, std::string(base)), false};
    case PolicyKind::BuiltinBorrower: return {borrow(c, target_index, G, seed, base), false};
    case PolicyKind::RemoteRewriter: return rewrite_remote(c, target_index, G);
    }
    throw ConfigError("unknown policy kind");
}

std::vector<std::string> propose_candidates(const Policy& policy, const QueryCase& c, std::size_t target_index,
                                            std::size_t G, std::uint64_t seed) {
    return policy.propose(c, target_index, G, seed).candidates;
}

// ---------------------------------------------------------------------------
// Advantages and scoring

std::vector<double> advantages(std::span<const double> rewards, AdvantageMode mode) {
    if (rewards.empty()) throw DomainError("advantages need at least one reward");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back(r - mean);
    if (mode == AdvantageMode::DrGrpo) return out;

    double var = 0.0;
    for (double a : out) var += a * a;
    const double sd = std::sqrt(var / static_cast<double>(rewards.size()));
    if (sd < 1e-12) return std::vector<double>(rewards.size(), 0.0);
    for (double& a : out) a /= sd;
    return out;
}

QueryCase substitute_snippet(const QueryCase& c, std::size_t target_index, std::string_view snippet) {
    if (target_index >= c.results.size()) {
        throw DomainError(fmt::format("target_index {} outside [0, {})", target_index, c.results.size()));
    }
    QueryCase out = c;
    out.results[target_index].snippet = std::string(snippet);
    return out;
}

SelectionOutcome judge_substituted(const Judge& judge, const QueryCase& c, std::size_t target_index,
                                   std::string_view snippet) {
    const auto substituted = substitute_snippet(c, target_index, snippet);
    const auto seeded = judge.with_seed(derive_seed(judge.config().seed, snippet));
    return seeded.select(substituted.query, substituted.results);
}

namespace {

EmbeddingProvider& default_embedder() {
    static HashingEmbedder embedder;
    return embedder;
}

} // namespace

std::vector<ScoredCandidate> score_group(const Judge& judge, const RewardConfig& reward, const QueryCase& c,
                                         std::size_t target_index, std::span<const std::string> candidates,
                                         const ScoreOptions& options) {
    if (candidates.empty()) throw DomainError("score_group needs at least one candidate");
    if (target_index >= c.results.size()) {
        throw DomainError(fmt::format("target_index {} outside [0, {})", target_index, c.results.size()));
    }
    const std::string& reference = options.reference_text ? *options.reference_text : c.results[target_index].snippet;
    const std::size_t orig_tokens = token_count(reference);
    EmbeddingProvider& embedder = options.embedder ? *options.embedder : default_embedder();

    std::vector<ScoredCandidate> out(candidates.size());
    parallel_for(candidates.size(), options.parallel, [&](std::size_t i) {
        const auto& cand = candidates[i];
        if (text::trim(cand).empty()) throw DomainError(fmt::format("candidate {} is empty", i));
        SelectionOutcome outcome;
        try {
            outcome = judge_substituted(judge, c, target_index, cand);
        } catch (const Error& e) {
            throw Error(fmt::format("candidate {}: {}", i, e.what()));
        }
        const std::size_t new_tokens = token_count(cand);
        const double len_r = length_reward(orig_tokens, new_tokens, reward.length);
        const double sim_r = reward.weights.w_sim > 0.0 ? similarity_reward(embedder, reference, cand)
                                                        : similarity_reward(default_embedder(), reference, cand);
        auto breakdown = total_reward(reward.weights, len_r, sim_r,
                                      citation_reward(outcome, static_cast<int>(target_index)), options.step);
        breakdown.orig_tokens = orig_tokens;
        breakdown.new_tokens = new_tokens;
        out[i] = {breakdown, std::move(outcome)};
    });
    return out;
}

RolloutGroup make_rollout_group(const QueryCase& c, std::size_t target_index, std::vector<std::string> candidates,
                                const std::vector<ScoredCandidate>& scored, AdvantageMode mode, std::size_t step) {
    RolloutGroup g;
    g.case_id = c.case_id;
    g.target_index = target_index;
    g.candidates = std::move(candidates);
    g.mode = mode;
    g.step = step;
    std::vector<double> totals;
    for (const auto& s : scored) {
        g.breakdowns.push_back(s.breakdown);
        totals.push_back(s.breakdown.total);
    }
    g.advantages = advantages(totals, mode);
    return g;
}

// ---------------------------------------------------------------------------
// Closed loop

OptimizationResult closed_loop_optimize(const QueryCase& c, std::size_t target_index, const Policy& policy,
                                        const Judge& judge, const RewardConfig& reward, std::size_t generations,
                                        std::uint64_t seed, const OptimizeOptions& options) {
    if (generations < 1) throw DomainError("closed-loop optimization needs at least one generation");
    if (target_index >= c.results.size()) {
        throw DomainError(fmt::format("target_index {} outside [0, {})", target_index, c.results.size()));
    }
    reward.validate();
    const std::string original = c.results[target_index].snippet;
    const std::size_t G = policy.config().group_size;

    OptimizationResult result;
    ScoreOptions score_opts;
    score_opts.embedder = options.embedder;
    score_opts.parallel = options.parallel;

    std::string incumbent = original;
    RewardBreakdown incumbent_score;
    try {
        const std::vector<std::string> start{original};
        incumbent_score = score_group(judge, reward, c, target_index, start, score_opts).front().breakdown;
    } catch (const Error& e) {
        throw OptimizationError(fmt::format("scoring the original snippet failed: {}", e.what()), {});
    }
    result.initial = incumbent_score;

    for (std::size_t gen = 0; gen < generations; ++gen) {
        score_opts.step = gen;
        // The length term may switch on under a delayed schedule.
        incumbent_score = total_reward(reward.weights, incumbent_score.len_r, incumbent_score.sim_r,
                                       incumbent_score.cit_r, gen);
        incumbent_score.orig_tokens = token_count(original);
        incumbent_score.new_tokens = token_count(incumbent);

        std::vector<ScoredCandidate> scored;
        Proposal proposal;
        try {
            proposal = policy.propose(c, target_index, G, derive_seed(seed, gen), incumbent);
            scored = score_group(judge, reward, c, target_index, proposal.candidates, score_opts);
        } catch (const Error& e) {
            throw OptimizationError(fmt::format("generation {}: {}", gen, e.what()), result.trace);
        }
        result.trace.used_chat_fallback |= proposal.used_chat_fallback;

        const auto group = make_rollout_group(c, target_index, proposal.candidates, scored, options.mode, gen);
        const auto best = static_cast<std::size_t>(
            std::max_element(group.advantages.begin(), group.advantages.end()) - group.advantages.begin());
        if (scored[best].breakdown.total > incumbent_score.total) {
            incumbent = group.candidates[best];
            incumbent_score = scored[best].breakdown;
        }

        GenerationStats stats;
        stats.generation = gen;
        stats.best_total = incumbent_score.total;
        double mean_total = 0.0, mean_ratio = 0.0;
        for (const auto& s : scored) {
            mean_total += s.breakdown.total;
            mean_ratio += s.breakdown.length_ratio();
        }
        stats.mean_total = mean_total / static_cast<double>(scored.size());
        stats.mean_length_ratio = mean_ratio / static_cast<double>(scored.size());
        stats.best_cited = incumbent_score.cit_r;
        stats.best_length_ratio = incumbent_score.length_ratio();
        stats.best_text = incumbent;
        result.trace.generations.push_back(std::move(stats));
    }

    result.best_text = incumbent;
    result.best = incumbent_score;
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation

std::size_t default_target(const SelectionOutcome& direct, std::size_t n_results) {
    for (std::size_t i = 0; i < n_results; ++i) {
        if (!direct.contains(static_cast<int>(i))) return i;
    }
    throw DomainError("every result is cited by the Direct baseline; no default target");
}

const KindShare* EvaluationReport::find(PermutationKind k) const {
    for (const auto& s : kinds) {
        if (s.kind == k) return &s;
    }
    return nullptr;
}

namespace {

std::vector<PermutationKind> cited_kinds(const ExperimentRecord& record, std::size_t target) {
    std::vector<PermutationKind> out;
    for (const auto& run : record.runs) {
        const auto originals = map_to_original(run.outcome, run.identity_map);
        if (std::find(originals.begin(), originals.end(), static_cast<int>(target)) != originals.end()) {
            out.push_back(run.kind);
        }
    }
    return out;
}

} // namespace

EvaluationReport evaluate_policy(const Corpus& test_corpus, const Policy& policy, const Judge& judge,
                                 const std::vector<PermutationKind>& kinds, std::uint64_t seed,
                                 const EvaluateOptions& options) {
    if (kinds.empty()) throw ConfigError("evaluation needs at least one permutation kind");
    std::vector<PermutationKind> suite_kinds = kinds;
    if (std::find(kinds.begin(), kinds.end(), PermutationKind::Direct) == kinds.end()) {
        suite_kinds.insert(suite_kinds.begin(), PermutationKind::Direct);
    }

    EvaluationReport report;
    for (auto k : kinds) report.kinds.push_back({k, 0, 0, 0});

    for (const auto& c : test_corpus.cases) {
        try {
            const auto before = run_experiment_suite(c, suite_kinds, judge, seed, options.suite);
            const auto* direct = before.find(PermutationKind::Direct);
            const std::size_t target = default_target(direct->outcome, c.results.size());

            // The Direct judge of the suite, seeded the same way, is the reward judge.
            std::string rewritten;
            const auto rewrite_seed = derive_seed(seed, "rewrite/" + c.case_id);
            if (options.generations == 0) {
                rewritten = policy.propose(c, target, 1, rewrite_seed).candidates.front();
            } else {
                OptimizeOptions opt;
                opt.embedder = options.embedder;
                opt.parallel = options.suite.parallel;
                rewritten = closed_loop_optimize(c, target, policy, judge, options.reward, options.generations,
                                                 rewrite_seed, opt)
                                .best_text;
            }

            const auto after = run_experiment_suite(substitute_snippet(c, target, rewritten), suite_kinds, judge, seed,
                                                    options.suite);
            CaseEvaluation ev{c.case_id, target, c.results[target].snippet, rewritten, cited_kinds(before, target),
                              cited_kinds(after, target)};
            for (auto& share : report.kinds) {
                ++share.n;
                share.cited_before += std::count(ev.cited_before.begin(), ev.cited_before.end(), share.kind) > 0;
                share.cited_after += std::count(ev.cited_after.begin(), ev.cited_after.end(), share.kind) > 0;
            }
            report.cases.push_back(std::move(ev));
        } catch (const Error& e) {
            report.failures.push_back({c.case_id, e.what()});
        }
    }
    return report;
}

} // namespace overview
