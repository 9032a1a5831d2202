#include "overview/permute.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "overview/error.hpp"
#include "overview/parallel.hpp"
#include "overview/rng.hpp"
#include "overview/text.hpp"

namespace overview {

namespace {

struct KindName {
    PermutationKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {PermutationKind::Direct, "direct"},
    {PermutationKind::TemperatureSample, "temperature_sample"},
    {PermutationKind::ShuffleData, "shuffle_data"},
    {PermutationKind::ShuffleUrls, "shuffle_urls"},
    {PermutationKind::ShuffleTitles, "shuffle_titles"},
    {PermutationKind::ShuffleSnippets, "shuffle_snippets"},
    {PermutationKind::PromptSlight, "prompt_slight"},
    {PermutationKind::PromptSignificant, "prompt_significant"},
    {PermutationKind::ModelChange, "model_change"},
};

} // namespace

std::string_view to_string(PermutationKind k) noexcept {
    for (const auto& kn : kKindNames) {
        if (kn.kind == k) return kn.name;
    }
    return "direct";
}

PermutationKind parse_permutation_kind(std::string_view s) {
    for (const auto& kn : kKindNames) {
        if (kn.name == s) return kn.kind;
    }
    throw ConfigError(fmt::format("unknown permutation kind '{}'", s));
}

std::vector<PermutationKind> parse_kind_list(std::string_view comma_separated) {
    std::vector<PermutationKind> kinds;
    std::size_t start = 0;
    while (start <= comma_separated.size()) {
        const auto end = std::min(comma_separated.find(',', start), comma_separated.size());
        const auto item = text::trim(comma_separated.substr(start, end - start));
        if (!item.empty()) kinds.push_back(parse_permutation_kind(item));
        start = end + 1;
    }
    if (kinds.empty()) throw ConfigError("permutation kind list is empty");
    return kinds;
}

std::vector<PermutationKind> audit_kinds() {
    return {PermutationKind::Direct,        PermutationKind::TemperatureSample, PermutationKind::ShuffleData,
            PermutationKind::ShuffleUrls,   PermutationKind::PromptSlight,      PermutationKind::PromptSignificant,
            PermutationKind::ModelChange};
}

std::vector<PermutationKind> shuffle_kinds() {
    return {PermutationKind::ShuffleData, PermutationKind::ShuffleUrls, PermutationKind::ShuffleTitles,
            PermutationKind::ShuffleSnippets};
}

bool is_shuffle(PermutationKind k) noexcept {
    return k == PermutationKind::ShuffleData || k == PermutationKind::ShuffleUrls ||
           k == PermutationKind::ShuffleTitles || k == PermutationKind::ShuffleSnippets;
}

namespace {

std::vector<int> non_identity_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    const auto is_identity = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            if (perm[i] != static_cast<int>(i)) return false;
        }
        return true;
    };
    do {
        rng.shuffle(perm);
    } while (is_identity());
    return perm;
}

} // namespace

PermutedCase apply_permutation(PermutationKind kind, const QueryCase& c, std::uint64_t seed,
                               const PermutationOptions& options) {
    const std::size_t n = c.results.size();
    PermutedCase out{c, std::vector<int>(n), {}};
    std::iota(out.identity_map.begin(), out.identity_map.end(), 0);

    if (is_shuffle(kind)) {
        if (n < 2) throw DomainError(fmt::format("{} needs at least 2 results", to_string(kind)));
        // perm[slot] = original index moved into `slot`
        const auto perm = non_identity_permutation(n, seed);
        auto& presented = out.presented.results;
        for (std::size_t slot = 0; slot < n; ++slot) {
            const auto& src = c.results[static_cast<std::size_t>(perm[slot])];
            switch (kind) {
            case PermutationKind::ShuffleData: presented[slot] = src; break;
            case PermutationKind::ShuffleUrls: presented[slot].url = src.url; break;
            case PermutationKind::ShuffleTitles: presented[slot].title = src.title; break;
            case PermutationKind::ShuffleSnippets: presented[slot].snippet = src.snippet; break;
            default: break;
            }
        }
        // Only a whole-result shuffle moves the snippet away from its slot; for
        // ShuffleSnippets identity stays with the (unmoved) URL slot.
        if (kind == PermutationKind::ShuffleData) out.identity_map = perm;
        return out;
    }

    switch (kind) {
    case PermutationKind::TemperatureSample: out.judge_override.temperature = options.sample_temperature; break;
    case PermutationKind::PromptSlight: out.judge_override.prompt_variant = PromptVariant::SlightChange; break;
    case PermutationKind::PromptSignificant: out.judge_override.prompt_variant = PromptVariant::SignificantChange; break;
    case PermutationKind::ModelChange: out.judge_override.model_id = options.alternate_model; break;
    default: break;
    }
    return out;
}

std::vector<int> map_to_original(const SelectionOutcome& outcome, const std::vector<int>& identity_map) {
    std::vector<int> out;
    out.reserve(outcome.selected_ids.size());
    for (int slot : outcome.selected_ids) {
        if (slot < 0 || static_cast<std::size_t>(slot) >= identity_map.size()) {
            throw DomainError(fmt::format("selected slot {} outside identity map of size {}", slot, identity_map.size()));
        }
        out.push_back(identity_map[static_cast<std::size_t>(slot)]);
    }
    return out;
}

const KindOutcome* ExperimentRecord::find(PermutationKind kind) const {
    for (const auto& r : runs) {
        if (r.kind == kind) return &r;
    }
    return nullptr;
}

std::vector<int> count_appearances(const std::vector<KindOutcome>& runs, std::size_t n_results) {
    std::vector<int> counts(n_results, 0);
    for (const auto& run : runs) {
        for (int original : map_to_original(run.outcome, run.identity_map)) {
            if (static_cast<std::size_t>(original) >= n_results) throw DomainError("identity outside result range");
            ++counts[static_cast<std::size_t>(original)];
        }
    }
    return counts;
}

ExperimentRecord run_experiment_suite(const QueryCase& c, const std::vector<PermutationKind>& kinds, const Judge& base,
                                      std::uint64_t seed, const SuiteOptions& options) {
    if (kinds.empty()) throw ConfigError("experiment suite needs at least one permutation kind");
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (std::count(kinds.begin(), kinds.end(), kinds[i]) > 1) {
            throw ConfigError(fmt::format("permutation kind '{}' listed twice", to_string(kinds[i])));
        }
    }

    const std::uint64_t case_seed = derive_seed(seed, c.case_id);
    ExperimentRecord record;
    record.case_id = c.case_id;
    record.urls_k = base.config().urls_k;
    for (const auto& r : c.results) record.original_urls.push_back(r.url);
    record.runs.resize(kinds.size());

    parallel_for(kinds.size(), options.parallel, [&](std::size_t i) {
        const auto kind = kinds[i];
        const auto kind_tag = static_cast<std::uint64_t>(kind);
        const auto permuted = apply_permutation(kind, c, derive_seed(case_seed, kind_tag), options.permutation);
        const auto judge = base.with_override(permuted.judge_override)
                               .with_seed(derive_seed(base.config().seed, derive_seed(case_seed, kind_tag + 1000)));
        try {
            record.runs[i] = {kind, judge.select(permuted.presented.query, permuted.presented.results),
                              permuted.identity_map};
        } catch (const Error& e) {
            throw Error(fmt::format("case {} kind {}: {}", c.case_id, to_string(kind), e.what()));
        }
    });

    record.appearance_counts = count_appearances(record.runs, c.results.size());
    return record;
}

int overlap_with_baseline(const SelectionOutcome& baseline, const SelectionOutcome& permuted,
                          const std::vector<int>& identity_map, PermutationKind kind) {
    // identity_map already encodes the kind's identity rule (URL slot for
    // ShuffleSnippets, snippet otherwise); kind is checked for consistency only.
    if (kind == PermutationKind::ShuffleSnippets || kind == PermutationKind::ShuffleUrls ||
        kind == PermutationKind::ShuffleTitles) {
        for (std::size_t i = 0; i < identity_map.size(); ++i) {
            if (identity_map[i] != static_cast<int>(i)) {
                throw DomainError(fmt::format("{} keeps identities in place; got a moving identity map", to_string(kind)));
            }
        }
    }
    const auto mapped = map_to_original(permuted, identity_map);
    int overlap = 0;
    for (int id : mapped) {
        if (baseline.contains(id)) ++overlap;
    }
    return overlap;
}

// ---------------------------------------------------------------------------
// Persistence

std::string record_to_json(const ExperimentRecord& r) {
    nlohmann::ordered_json doc;
    doc["case_id"] = r.case_id;
    doc["urls_k"] = r.urls_k;
    doc["original_urls"] = r.original_urls;
    doc["appearance_counts"] = r.appearance_counts;
    auto runs = nlohmann::ordered_json::array();
    for (const auto& run : r.runs) {
        nlohmann::ordered_json item;
        item["kind"] = to_string(run.kind);
        item["selected_ids"] = run.outcome.selected_ids;
        item["identity_map"] = run.identity_map;
        item["raw_response"] = run.outcome.raw_response;
        item["judge"] = {{"kind", to_string(run.outcome.fingerprint.kind)},
                         {"model_id", run.outcome.fingerprint.model_id},
                         {"prompt_variant", to_string(run.outcome.fingerprint.prompt_variant)},
                         {"temperature", run.outcome.fingerprint.temperature}};
        runs.push_back(std::move(item));
    }
    doc["runs"] = std::move(runs);
    return doc.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

ExperimentRecord record_from_json(std::string_view line) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(fmt::format("malformed experiment record: {}", e.what()));
    }
    try {
        ExperimentRecord r;
        r.case_id = doc.at("case_id").get<std::string>();
        r.urls_k = doc.at("urls_k").get<std::size_t>();
        r.original_urls = doc.at("original_urls").get<std::vector<std::string>>();
        for (const auto& item : doc.at("runs")) {
            KindOutcome run;
            run.kind = parse_permutation_kind(item.at("kind").get<std::string>());
            run.outcome.selected_ids = item.at("selected_ids").get<std::vector<int>>();
            run.identity_map = item.at("identity_map").get<std::vector<int>>();
            run.outcome.raw_response = item.at("raw_response").get<std::string>();
            const auto& j = item.at("judge");
            run.outcome.fingerprint = {parse_judge_kind(j.at("kind").get<std::string>()),
                                       j.at("model_id").get<std::string>(),
                                       parse_prompt_variant(j.at("prompt_variant").get<std::string>()),
                                       j.at("temperature").get<double>()};
            r.runs.push_back(std::move(run));
        }
        r.appearance_counts = count_appearances(r.runs, r.original_urls.size());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("record", fmt::format("experiment record schema: {}", e.what()));
    }
}

} // namespace overview
