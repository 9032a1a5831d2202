#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "overview/corpus.hpp"
#include "overview/judge.hpp"

namespace overview {

enum class PermutationKind {
    Direct,
    TemperatureSample,
    ShuffleData,
    ShuffleUrls,
    ShuffleTitles,
    ShuffleSnippets,
    PromptSlight,
    PromptSignificant,
    ModelChange,
};

std::string_view to_string(PermutationKind k) noexcept;
PermutationKind parse_permutation_kind(std::string_view s);
std::vector<PermutationKind> parse_kind_list(std::string_view comma_separated);

// Direct plus the six randomizers of the persistence audit.
std::vector<PermutationKind> audit_kinds();
// The four element-wise shuffles compared against Direct in robustness runs.
std::vector<PermutationKind> shuffle_kinds();

bool is_shuffle(PermutationKind k) noexcept;

struct PermutationOptions {
    double sample_temperature = 1.0;
    std::string alternate_model = "gpt-5-nano";
};

struct PermutedCase {
    QueryCase presented;
    // identity_map[slot] = original index whose identity-bearing element sits at
    // `slot`. Identity follows the snippet, except for ShuffleSnippets where it
    // follows the URL slot.
    std::vector<int> identity_map;
    JudgeOverride judge_override;
};

// Shuffles always produce a non-identity permutation when there are >= 2 results.
PermutedCase apply_permutation(PermutationKind kind, const QueryCase& c, std::uint64_t seed,
                               const PermutationOptions& options = {});

// Original identities selected by an outcome.
std::vector<int> map_to_original(const SelectionOutcome& outcome, const std::vector<int>& identity_map);

struct KindOutcome {
    PermutationKind kind = PermutationKind::Direct;
    SelectionOutcome outcome;
    std::vector<int> identity_map;
};

struct ExperimentRecord {
    std::string case_id;
    std::vector<KindOutcome> runs;
    // Indexed by original result position.
    std::vector<int> appearance_counts;
    std::vector<std::string> original_urls;
    std::size_t urls_k = 3;

    std::size_t K() const noexcept { return runs.size(); }
    std::size_t N() const noexcept { return appearance_counts.size(); }
    const KindOutcome* find(PermutationKind kind) const;
};

// Tallies original identities per run into appearance counts.
std::vector<int> count_appearances(const std::vector<KindOutcome>& runs, std::size_t n_results);

struct SuiteOptions {
    PermutationOptions permutation;
    // Upper bound on concurrent judge calls inside one suite.
    std::size_t parallel = 1;
};

// Runs the judge once per kind on the permuted case. Judge errors are rethrown
// with the failing kind in the message.
ExperimentRecord run_experiment_suite(const QueryCase& c, const std::vector<PermutationKind>& kinds, const Judge& base,
                                      std::uint64_t seed, const SuiteOptions& options = {});

// Number of original identities selected in both outcomes.
int overlap_with_baseline(const SelectionOutcome& baseline, const SelectionOutcome& permuted,
                          const std::vector<int>& identity_map, PermutationKind kind);

std::string record_to_json(const ExperimentRecord& r);
ExperimentRecord record_from_json(std::string_view line);

} // namespace overview
