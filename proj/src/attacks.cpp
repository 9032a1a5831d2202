#include "overview/attacks.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "overview/error.hpp"
#include "overview/text.hpp"

namespace overview {

std::string_view to_string(AttackKind k) noexcept {
    switch (k) {
    case AttackKind::TargetSnippet: return "target_snippet";
    case AttackKind::Title: return "title";
    case AttackKind::Reference: return "reference";
    }
    return "reference";
}

AttackKind parse_attack_kind(std::string_view s) {
    if (s == "target_snippet" || s == "target") return AttackKind::TargetSnippet;
    if (s == "title") return AttackKind::Title;
    if (s == "reference") return AttackKind::Reference;
    throw ConfigError(fmt::format("unknown attack kind '{}'", s));
}

void Payload::validate() const {
    if (text::trim(text).empty()) {
        if (!marker_tokens.empty()) throw ConfigError("payload markers given without payload text");
        return;
    }
    if (marker_tokens.empty()) throw ConfigError("payload needs at least one marker token");
    const auto toks = text::token_set(text);
    for (const auto& m : marker_tokens) {
        if (!toks.count(m)) throw ConfigError(fmt::format("marker '{}' does not occur in the payload text", m));
    }
}

Payload make_payload(std::string text, std::optional<std::set<std::string>> markers) {
    Payload p;
    p.text = std::move(text);
    if (markers) {
        for (const auto& m : *markers) {
            auto t = text::normalize_token(m);
            if (!t.empty()) p.marker_tokens.insert(std::move(t));
        }
    } else {
        p.marker_tokens = text::token_set(p.text);
    }
    p.validate();
    return p;
}

namespace {

void check_indices(const QueryCase& c, AttackKind kind, std::size_t target_index,
                   std::optional<std::size_t> reference_index) {
    const auto n = c.results.size();
    if (target_index >= n) throw DomainError(fmt::format("target_index {} outside [0, {})", target_index, n));
    if (kind == AttackKind::Reference) {
        if (!reference_index) throw DomainError("reference attack needs a reference_index");
        if (*reference_index >= n) throw DomainError(fmt::format("reference_index {} outside [0, {})", *reference_index, n));
        if (*reference_index == target_index) throw DomainError("reference_index must differ from target_index");
    }
}

} // namespace

QueryCase inject_payload(const QueryCase& c, AttackKind kind, std::size_t target_index,
                         std::optional<std::size_t> reference_index, const Payload& payload) {
    check_indices(c, kind, target_index, reference_index);
    payload.validate();
    QueryCase out = c;
    if (text::trim(payload.text).empty()) return out;
    switch (kind) {
    case AttackKind::TargetSnippet: out.results[target_index].snippet += " " + payload.text; break;
    case AttackKind::Title: out.results[target_index].title += " " + payload.text; break;
    case AttackKind::Reference: out.results[*reference_index].snippet = payload.text; break;
    }
    return out;
}

bool leak_check(std::string_view rewritten, const Payload& payload, std::optional<double> threshold) {
    if (payload.marker_tokens.empty()) return false;
    const auto toks = text::token_set(rewritten);
    std::size_t hits = 0;
    for (const auto& m : payload.marker_tokens) hits += toks.count(m);
    const double fraction = static_cast<double>(hits) / static_cast<double>(payload.marker_tokens.size());
    if (!threshold) return hits > 0;
    return fraction > 0.0 && fraction >= *threshold;
}

AttackReport run_attack(AttackKind kind, const QueryCase& c, std::size_t target_index,
                        std::optional<std::size_t> reference_index, const Payload& payload, const Policy& policy,
                        const Judge& judge, const RewardConfig& reward, std::uint64_t seed,
                        const AttackOptions& options) {
    if (kind == AttackKind::Reference && !policy.config().conditional) {
        throw ConfigError("the reference attack needs a conditional policy");
    }
    if (options.leak_threshold && !(*options.leak_threshold > 0.0 && *options.leak_threshold <= 1.0)) {
        throw ConfigError("leak threshold must be in (0, 1]");
    }
    const auto poisoned = inject_payload(c, kind, target_index, reference_index, payload);
    const auto proposal = policy.propose(poisoned, target_index, policy.config().group_size, seed);

    ScoreOptions score_opts;
    score_opts.reference_text = c.results[target_index].snippet;
    score_opts.embedder = options.embedder;
    score_opts.parallel = options.parallel;
    const auto scored = score_group(judge, reward, poisoned, target_index, proposal.candidates, score_opts);

    std::size_t best = 0;
    for (std::size_t i = 1; i < scored.size(); ++i) {
        if (scored[i].breakdown.total > scored[best].breakdown.total) best = i;
    }

    AttackReport report;
    report.kind = kind;
    report.case_id = c.case_id;
    report.seed = seed;
    report.rewritten_text = proposal.candidates[best];
    report.selection = scored[best].outcome;
    report.best = scored[best].breakdown;
    report.attacked_cited = report.selection.contains(static_cast<int>(target_index));
    report.payload_leaked = kind == AttackKind::Title ? report.attacked_cited && !payload.marker_tokens.empty()
                                                      : leak_check(report.rewritten_text, payload, options.leak_threshold);
    return report;
}

} // namespace overview
