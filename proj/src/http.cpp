#include "overview/http.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "overview/error.hpp"

namespace overview {

using json = nlohmann::json;

namespace {

struct SplitEndpoint {
    std::string origin;    // scheme://host[:port]
    std::string base_path; // "" or "/v1"
};

SplitEndpoint split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError(fmt::format("endpoint '{}' has no scheme", endpoint));
    const auto path_start = endpoint.find('/', scheme_end + 3);
    SplitEndpoint out;
    out.origin = endpoint.substr(0, path_start);
    if (path_start != std::string::npos) out.base_path = endpoint.substr(path_start);
    while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
    return out;
}

bool is_transient(int status) { return status == 408 || status == 429 || (status >= 500 && status <= 599); }

// Releases the in-flight slot on scope exit.
class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
    ~SlotGuard() { sem_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<1024>& sem_;
};

} // namespace

ApiClient::ApiClient(RemoteSettings settings)
    : settings_(std::move(settings)), in_flight_(std::clamp(settings_.max_in_flight, 1, 1024)) {
    if (settings_.endpoint.empty()) throw ConfigError("remote endpoint is empty");
    split_endpoint(settings_.endpoint);
}

ApiClient::~ApiClient() = default;

std::string ApiClient::api_key() const {
    const char* key = std::getenv(settings_.api_key_env.c_str());
    if (!key || !*key) throw AuthError(fmt::format("environment variable {} is not set", settings_.api_key_env));
    return key;
}

ClientStats ApiClient::stats() const {
    return {requests_.load(), attempts_.load(), retries_.load()};
}

json ApiClient::post_json(std::string_view path, const json& body) {
    if (cancelled_.load()) throw CancelledError("client cancelled");
    const auto key = api_key();
    const auto ep = split_endpoint(settings_.endpoint);
    const std::string full_path = ep.base_path + std::string(path);
    const std::string payload = body.dump();
    ++requests_;

    SlotGuard slot(in_flight_);
    httplib::Client client(ep.origin);
    const auto timeout = std::chrono::duration<double>(settings_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    const httplib::Headers headers = {{"Authorization", "Bearer " + key}};

    double backoff = settings_.backoff_initial_s;
    for (int attempt = 0;; ++attempt) {
        if (cancelled_.load()) throw CancelledError("client cancelled");
        ++attempts_;
        auto res = client.Post(full_path, headers, payload, "application/json");
        int status = 0;
        std::string reason;
        if (!res) {
            reason = httplib::to_string(res.error());
        } else {
            status = res->status;
            if (status >= 200 && status < 300) {
                try {
                    return json::parse(res->body);
                } catch (const json::parse_error& e) {
                    throw TransportError(fmt::format("invalid JSON from {}: {}", full_path, e.what()), status);
                }
            }
            if (status == 401 || status == 403) {
                throw AuthError(fmt::format("{} rejected credentials (HTTP {})", full_path, status));
            }
            reason = fmt::format("HTTP {}", status);
            if (!is_transient(status)) {
                throw TransportError(fmt::format("{} failed: {}: {}", full_path, reason, res->body), status);
            }
        }
        if (attempt >= settings_.max_retries) {
            throw TransportError(fmt::format("{} failed after {} attempts: {}", full_path, attempt + 1, reason), status);
        }
        ++retries_;
        spdlog::debug("retrying {} after {} (attempt {})", full_path, reason, attempt + 1);
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff = std::min(backoff * 2.0, settings_.backoff_max_s);
    }
}

json ApiClient::chat_body(std::string_view model, double temperature, const std::vector<ChatMessage>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", model}, {"temperature", temperature}, {"messages", std::move(msgs)}};
}

std::string ApiClient::chat(std::string_view model, double temperature, const std::vector<ChatMessage>& messages) {
    const auto res = post_json("/chat/completions", chat_body(model, temperature, messages));
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(fmt::format("chat response missing choices[0].message.content: {}", e.what()), 200);
    }
}

std::string ApiClient::complete(std::string_view model, double temperature, std::string_view prompt, int max_tokens) {
    json body = {{"model", model}, {"prompt", prompt}, {"temperature", temperature}, {"max_tokens", max_tokens}};
    const auto res = post_json("/completions", body);
    try {
        return res.at("choices").at(0).at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(fmt::format("completion response missing choices[0].text: {}", e.what()), 200);
    }
}

std::vector<std::vector<double>> ApiClient::embed(std::string_view model, const std::vector<std::string>& inputs) {
    json body = {{"model", model}, {"input", inputs}};
    const auto res = post_json("/embeddings", body);
    std::vector<std::vector<double>> out;
    try {
        const auto& data = res.at("data");
        out.reserve(data.size());
        for (const auto& item : data) out.push_back(item.at("embedding").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw TransportError(fmt::format("embedding response malformed: {}", e.what()), 200);
    }
    if (out.size() != inputs.size()) {
        throw TransportError(fmt::format("embedding response has {} vectors for {} inputs", out.size(), inputs.size()), 200);
    }
    return out;
}

} // namespace overview
