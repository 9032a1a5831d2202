#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "overview/http.hpp"
#include "overview/judge.hpp"

namespace overview {

// Soft/hard length bounds as multiples of the original snippet length.
struct LengthPolicy {
    double alpha = 1.0;
    double beta = 2.0;

    void validate() const;
};

enum class RewardSchedule { Static, DelayedLength };

struct RewardWeights {
    double w_len = 0.2;
    double w_sim = 0.0;
    double w_cit = 1.0;
    RewardSchedule schedule = RewardSchedule::Static;
    // DelayedLength: the length term is off for steps before this one.
    std::size_t activation_step = 0;

    void validate() const;
    double effective_w_len(std::size_t step) const noexcept;
};

struct RewardBreakdown {
    double len_r = 0.0;
    double sim_r = 0.0;
    int cit_r = 0;
    double total = 0.0;
    std::size_t orig_tokens = 0;
    std::size_t new_tokens = 0;

    double length_ratio() const noexcept;
};

std::size_t token_count(std::string_view text) noexcept;

double length_reward(std::size_t orig_tokens, std::size_t new_tokens, const LengthPolicy& policy = {});

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<double> embed(std::string_view text) = 0;
    virtual std::size_t dimension() const = 0;
};

// Bag-of-tokens feature hashing: each normalized token adds 1 to the bucket
// fnv1a(token) mod dimension. Deterministic and dependency-free.
class HashingEmbedder final : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dimension = 1024);
    std::vector<double> embed(std::string_view text) override;
    std::size_t dimension() const override { return dimension_; }

    std::size_t bucket(std::string_view token) const noexcept;

private:
    std::size_t dimension_;
};

// POST {endpoint}/embeddings. The dimension is learned from the first response.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    RemoteEmbedder(std::shared_ptr<ApiClient> client, std::string model_id = "e5-small");
    std::vector<double> embed(std::string_view text) override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::shared_ptr<ApiClient> client_;
    std::string model_id_;
    std::atomic<std::size_t> dimension_{0};
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Cosine of the two embeddings, clamped below at 0. A zero vector yields 0.
double similarity_reward(EmbeddingProvider& provider, std::string_view orig_text, std::string_view new_text);

int citation_reward(const SelectionOutcome& outcome, int target_id);

RewardBreakdown total_reward(const RewardWeights& weights, double len_r, double sim_r, int cit_r, std::size_t step);

struct RewardConfig {
    LengthPolicy length;
    RewardWeights weights;

    void validate() const;
};

} // namespace overview
