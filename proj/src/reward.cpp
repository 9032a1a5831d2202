#include "overview/reward.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overview/error.hpp"
#include "overview/rng.hpp"
#include "overview/text.hpp"

namespace overview {

void LengthPolicy::validate() const {
    if (!(alpha >= 1.0 && alpha < beta)) {
        throw ConfigError(fmt::format("length policy needs 1 <= alpha < beta, got alpha={} beta={}", alpha, beta));
    }
}

void RewardWeights::validate() const {
    if (!(w_len >= 0.0 && w_sim >= 0.0 && w_cit > 0.0)) {
        throw ConfigError("reward weights must be >= 0 with w_cit > 0");
    }
}

double RewardWeights::effective_w_len(std::size_t step) const noexcept {
    if (schedule == RewardSchedule::DelayedLength && step < activation_step) return 0.0;
    return w_len;
}

void RewardConfig::validate() const {
    length.validate();
    weights.validate();
}

double RewardBreakdown::length_ratio() const noexcept {
    return orig_tokens ? static_cast<double>(new_tokens) / static_cast<double>(orig_tokens) : 0.0;
}

std::size_t token_count(std::string_view text) noexcept { return text::token_count(text); }

double length_reward(std::size_t orig_tokens, std::size_t new_tokens, const LengthPolicy& policy) {
    if (orig_tokens == 0) throw DomainError("length reward needs a non-empty original");
    const double orig = static_cast<double>(orig_tokens);
    const double soft = std::ceil(policy.alpha * orig);
    const double hard = std::ceil(policy.beta * orig);
    const double n = static_cast<double>(new_tokens);
    if (n <= soft) return 1.0;
    if (n >= hard) return 0.0;
    return (hard - n) / (hard - soft);
}

// ---------------------------------------------------------------------------
// Embeddings

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::size_t HashingEmbedder::bucket(std::string_view token) const noexcept {
    return static_cast<std::size_t>(fnv1a64(token) % dimension_);
}

std::vector<double> HashingEmbedder::embed(std::string_view s) {
    std::vector<double> v(dimension_, 0.0);
    for (const auto& t : text::tokens(s)) v[bucket(t)] += 1.0;
    return v;
}

RemoteEmbedder::RemoteEmbedder(std::shared_ptr<ApiClient> client, std::string model_id)
    : client_(std::move(client)), model_id_(std::move(model_id)) {
    if (!client_) throw ConfigError("remote embedder needs a client");
}

std::vector<double> RemoteEmbedder::embed(std::string_view s) {
    auto out = client_->embed(model_id_, {std::string(s)});
    auto v = std::move(out.front());
    std::size_t expected = 0;
    if (!dimension_.compare_exchange_strong(expected, v.size()) && expected != v.size()) {
        throw TransportError(fmt::format("embedding dimension changed from {} to {}", expected, v.size()), 200);
    }
    return v;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DomainError("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double similarity_reward(EmbeddingProvider& provider, std::string_view orig_text, std::string_view new_text) {
    if (text::trim(orig_text).empty() || text::trim(new_text).empty()) {
        throw DomainError("similarity reward needs non-empty texts");
    }
    const auto a = provider.embed(orig_text);
    const auto b = provider.embed(new_text);
    const bool zero_a = std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; });
    const bool zero_b = std::all_of(b.begin(), b.end(), [](double x) { return x == 0.0; });
    if (zero_a || zero_b) {
        spdlog::warn("zero embedding vector; similarity reward set to 0");
        return 0.0;
    }
    return std::clamp(cosine_similarity(a, b), 0.0, 1.0);
}

int citation_reward(const SelectionOutcome& outcome, int target_id) { return outcome.contains(target_id) ? 1 : 0; }

RewardBreakdown total_reward(const RewardWeights& weights, double len_r, double sim_r, int cit_r, std::size_t step) {
    if (!(len_r >= 0.0 && len_r <= 1.0) || !(sim_r >= 0.0 && sim_r <= 1.0) || (cit_r != 0 && cit_r != 1)) {
        throw DomainError(fmt::format("reward components out of range: len={} sim={} cit={}", len_r, sim_r, cit_r));
    }
    RewardBreakdown b;
    b.len_r = len_r;
    b.sim_r = sim_r;
    b.cit_r = cit_r;
    b.total = weights.effective_w_len(step) * len_r + weights.w_sim * sim_r + weights.w_cit * cit_r;
    return b;
}

} // namespace overview
