#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "overview/judge.hpp"
#include "overview/optimize.hpp"
#include "overview/reward.hpp"

namespace httplib {
class Server;
}

namespace overview {

struct RolloutServiceConfig {
    Judge judge;
    RewardConfig reward;
    AdvantageMode default_mode = AdvantageMode::DrGrpo;
    std::string config_hash;
    EmbeddingProvider* embedder = nullptr;
    std::size_t parallel = 1;
};

// Thrown for a request the service rejects with HTTP 400; `field` names the
// offending request key.
class RequestError : public Error {
public:
    RequestError(std::string field, const std::string& message) : Error(message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Scores one candidate group:
//   {"query", "results", "target_index", "candidates", "mode"?, "step"?}
//   -> {"breakdowns": [{"len","sim","cit","total"}], "advantages", "judge_fingerprint"}
nlohmann::json score_request(const RolloutServiceConfig& config, const nlohmann::json& request);

class RolloutService {
public:
    explicit RolloutService(RolloutServiceConfig config);
    ~RolloutService();

    RolloutService(const RolloutService&) = delete;
    RolloutService& operator=(const RolloutService&) = delete;

    // Binds and serves until stop(); throws TransportError when the address
    // cannot be bound. Port 0 picks a free port (see port()).
    void bind(const std::string& host, int port);
    void serve();
    void stop();
    int port() const noexcept { return port_; }

    const RolloutServiceConfig& config() const noexcept { return config_; }

private:
    RolloutServiceConfig config_;
    std::unique_ptr<httplib::Server> server_;
    int port_ = 0;
};

} // namespace overview
