#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "overview/attacks.hpp"
#include "overview/corpus.hpp"
#include "overview/judge.hpp"
#include "overview/optimize.hpp"
#include "overview/permute.hpp"
#include "overview/reward.hpp"

namespace overview {

struct CorpusSource {
    // JSONL corpus; when absent a synthetic corpus is generated.
    std::optional<std::string> path;
    std::size_t min_results = kDefaultMinResults;
    std::uint64_t synth_seed = 1;
    std::size_t synth_queries = 90;
    std::size_t synth_results = 7;
    std::string synth_profile = "default";
};

struct EmbedderSettings {
    std::string kind = "hashing"; // hashing | remote
    std::size_t dimension = 1024;
    std::string model_id = "e5-small";
    RemoteSettings remote;
};

struct AuditSettings {
    double threshold = 0.05;
};

struct RobustnessSettings {
    // Judge temperature for every run of the robustness protocol.
    double temperature = 1.0;
    std::vector<PermutationKind> kinds = {PermutationKind::Direct, PermutationKind::ShuffleData,
                                          PermutationKind::ShuffleUrls, PermutationKind::ShuffleTitles,
                                          PermutationKind::ShuffleSnippets};
};

struct OptimizeSettings {
    std::string case_id; // empty: first case
    std::optional<std::size_t> target_index; // default: lowest index the Direct run leaves uncited
    std::size_t generations = 30;
    AdvantageMode mode = AdvantageMode::DrGrpo;
};

struct EvaluateSettings {
    std::size_t generations = 0;
};

struct AttackSettings {
    AttackKind kind = AttackKind::Reference;
    std::string payload{kRopePayload};
    std::vector<std::string> markers{"rope", "people"};
    std::optional<std::size_t> target_index;
    std::optional<std::size_t> reference_index;
    std::optional<double> leak_threshold;
    std::uint64_t seed_first = 0;
    std::uint64_t seed_last = 19;
    std::string case_id; // empty: every case
};

struct ServeSettings {
    std::string bind = "127.0.0.1:8080";
};

struct RunConfig {
    CorpusSource corpus;
    JudgeConfig judge;
    RewardConfig reward;
    EmbedderSettings embedder;
    PolicyConfig policy;
    std::vector<PermutationKind> kinds = audit_kinds();
    PermutationOptions permutation;
    AuditSettings audit;
    RobustnessSettings robustness;
    OptimizeSettings optimize;
    EvaluateSettings evaluate;
    AttackSettings attack;
    ServeSettings serve;
    std::uint64_t seed = 0;
    std::size_t parallel = 1;
    std::string out = "out";

    void validate() const;
};

// Unknown keys are rejected so that typos surface as ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON of everything that affects results
// (the output directory and parallelism are excluded), as 16 hex digits.
std::string config_hash(const RunConfig& c);

// "HOST:PORT"
std::pair<std::string, int> parse_bind_address(std::string_view s);

} // namespace overview
