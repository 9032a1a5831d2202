#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace overview {

// Connection and retry settings shared by every remote endpoint
// (judge chat completions, rewriter completions, embeddings).
struct RemoteSettings {
    std::string endpoint;                        // base URL, e.g. "https://api.openai.com/v1"
    std::string api_key_env = "OVERVIEW_API_KEY";
    double timeout_s = 60.0;
    int max_retries = 4;                         // retries after the first attempt
    double backoff_initial_s = 0.5;
    double backoff_max_s = 8.0;
    int max_in_flight = 4;
};

struct ClientStats {
    std::size_t requests = 0;  // logical calls
    std::size_t attempts = 0;  // HTTP attempts including retries
    std::size_t retries = 0;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

// Thin OpenAI-compatible client. Transient failures (connection errors,
// timeouts, HTTP 429 and 5xx) are retried with capped exponential backoff;
// 401/403 raise AuthError immediately. At most `max_in_flight` requests run
// concurrently per client.
class ApiClient {
public:
    explicit ApiClient(RemoteSettings settings);
    ~ApiClient();

    ApiClient(const ApiClient&) = delete;
    ApiClient& operator=(const ApiClient&) = delete;

    // Request body that chat() would send; exposed for snapshot tests.
    static nlohmann::json chat_body(std::string_view model, double temperature, const std::vector<ChatMessage>& messages);

    // Returns choices[0].message.content.
    std::string chat(std::string_view model, double temperature, const std::vector<ChatMessage>& messages);

    // POST {endpoint}/completions; returns choices[0].text. Throws TransportError
    // with status 404/405 when the route does not exist.
    std::string complete(std::string_view model, double temperature, std::string_view prompt, int max_tokens = 128);

    // POST {endpoint}/embeddings; returns data[i].embedding in input order.
    std::vector<std::vector<double>> embed(std::string_view model, const std::vector<std::string>& inputs);

    // Sends a JSON body to {endpoint}{path} and returns the parsed response.
    nlohmann::json post_json(std::string_view path, const nlohmann::json& body);

    // Pending and future calls fail with CancelledError.
    void cancel() noexcept { cancelled_.store(true); }

    ClientStats stats() const;
    const RemoteSettings& settings() const noexcept { return settings_; }

private:
    std::string api_key() const;

    RemoteSettings settings_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<bool> cancelled_{false};
    std::atomic<std::size_t> requests_{0};
    std::atomic<std::size_t> attempts_{0};
    std::atomic<std::size_t> retries_{0};
};

} // namespace overview
