#include "overview/rollout_service.hpp"

#include <httplib.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overview/corpus.hpp"
#include "overview/error.hpp"

namespace overview {

using nlohmann::json;

namespace {

const json& require(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end()) throw RequestError(key, fmt::format("missing field '{}'", key));
    return *it;
}

std::size_t require_index(const json& body, const char* key) {
    const auto& v = require(body, key);
    if (!v.is_number_integer()) throw RequestError(key, fmt::format("'{}' must be an integer", key));
    const auto i = v.get<std::int64_t>();
    if (i < 0) throw RequestError(key, fmt::format("'{}' must be non-negative", key));
    return static_cast<std::size_t>(i);
}

} // namespace

json score_request(const RolloutServiceConfig& config, const json& request) {
    if (!request.is_object()) throw RequestError("body", "request body must be a JSON object");

    QueryCase c;
    {
        json case_json = {{"query", require(request, "query")}, {"results", require(request, "results")}};
        try {
            c = parse_case_line(case_json.dump());
        } catch (const SchemaError& e) {
            throw RequestError(e.field(), e.what());
        } catch (const Error& e) {
            throw RequestError("results", e.what());
        }
    }

    const std::size_t target = require_index(request, "target_index");
    if (target >= c.results.size()) {
        throw RequestError("target_index",
                           fmt::format("target_index {} outside [0, {})", target, c.results.size()));
    }

    const auto& cands = require(request, "candidates");
    if (!cands.is_array() || cands.empty()) throw RequestError("candidates", "'candidates' must be a non-empty array");
    std::vector<std::string> candidates;
    for (const auto& v : cands) {
        if (!v.is_string() || v.get<std::string>().find_first_not_of(" \t\r\n") == std::string::npos) {
            throw RequestError("candidates", "every candidate must be a non-empty string");
        }
        candidates.push_back(v.get<std::string>());
    }

    AdvantageMode mode = config.default_mode;
    if (const auto it = request.find("mode"); it != request.end()) {
        if (!it->is_string()) throw RequestError("mode", "'mode' must be \"dr_grpo\" or \"grpo\"");
        try {
            mode = parse_advantage_mode(it->get<std::string>());
        } catch (const ConfigError& e) {
            throw RequestError("mode", e.what());
        }
    }
    std::size_t step = 0;
    if (request.contains("step")) step = require_index(request, "step");

    ScoreOptions options;
    options.step = step;
    options.embedder = config.embedder;
    options.parallel = config.parallel;
    const auto scored = score_group(config.judge, config.reward, c, target, candidates, options);
    const auto group = make_rollout_group(c, target, candidates, scored, mode, step);

    json breakdowns = json::array();
    for (const auto& b : group.breakdowns) {
        breakdowns.push_back({{"len", b.len_r}, {"sim", b.sim_r}, {"cit", b.cit_r}, {"total", b.total}});
    }
    return {{"breakdowns", std::move(breakdowns)},
            {"advantages", group.advantages},
            {"judge_fingerprint", config.judge.fingerprint().to_string()}};
}

RolloutService::RolloutService(RolloutServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
    config_.reward.validate();

    server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"ok", true}, {"config_hash", config_.config_hash}}.dump(), "application/json");
    });

    server_->Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
        const auto fail = [&](int status, const std::string& field, const std::string& reason) {
            res.status = status;
            res.set_content(json{{"error", reason}, {"field", field}}.dump(), "application/json");
        };
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            return fail(400, "body", fmt::format("malformed JSON: {}", e.what()));
        }
        try {
            res.set_content(score_request(config_, body).dump(), "application/json");
        } catch (const RequestError& e) {
            fail(400, e.field(), e.what());
        } catch (const DomainError& e) {
            fail(400, "candidates", e.what());
        } catch (const std::exception& e) {
            spdlog::error("score request failed: {}", e.what());
            fail(500, "", e.what());
        }
    });
}

RolloutService::~RolloutService() { stop(); }

void RolloutService::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ <= 0) throw TransportError(fmt::format("cannot bind {}:0", host));
    } else {
        if (!server_->bind_to_port(host, port)) throw TransportError(fmt::format("cannot bind {}:{}", host, port));
        port_ = port;
    }
}

void RolloutService::serve() {
    if (port_ == 0) throw TransportError("serve() called before bind()");
    server_->listen_after_bind();
}

void RolloutService::stop() {
    if (server_) server_->stop();
}

} // namespace overview
