#include <gtest/gtest.h>

#include <atomic>
#include <mutex>

#include "overview/error.hpp"
#include "overview/http.hpp"
#include "overview/judge.hpp"
#include "test_support.hpp"

using namespace overview;
using overview::testing::MockServer;
using overview::testing::ScopedEnv;
using overview::testing::starbucks_case;
using nlohmann::json;

namespace {

json chat_reply(const std::string& content) {
    return {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}};
}

RemoteSettings fast_settings(const std::string& endpoint) {
    RemoteSettings s;
    s.endpoint = endpoint;
    s.timeout_s = 5.0;
    s.max_retries = 3;
    s.backoff_initial_s = 0.001;
    s.backoff_max_s = 0.004;
    return s;
}

JudgeConfig remote_judge(const std::string& endpoint) {
    JudgeConfig c;
    c.kind = JudgeKind::Remote;
    c.model_id = "gpt-4.1-nano";
    c.remote = fast_settings(endpoint);
    return c;
}

} // namespace

TEST(ApiClient, HappyPathSendsBearerAndParsesAnswer) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    std::string auth, body;
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            auth = req.get_header_value("Authorization");
            body = req.body;
            res.set_content(chat_reply("Answer: 0, 1, 2").dump(), "application/json");
        });
    });
    const auto c = starbucks_case();
    const Judge judge(remote_judge(mock.endpoint()));
    const auto out = judge.select(c.query, c.results);
    EXPECT_EQ(out.selected_ids, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(auth, "Bearer sk-test");
    const auto sent = json::parse(body);
    EXPECT_EQ(sent.at("model"), "gpt-4.1-nano");
    EXPECT_EQ(sent.at("messages").size(), 2u);
    EXPECT_EQ(sent.at("messages")[0].at("role"), "system");
}

TEST(ApiClient, RetriesOn429ThenSucceeds) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    std::atomic<int> calls{0};
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            if (calls++ == 0) {
                res.status = 429;
                return;
            }
            res.set_content(chat_reply("Answer: 4, 2, 0").dump(), "application/json");
        });
    });
    auto client = std::make_shared<ApiClient>(fast_settings(mock.endpoint()));
    const auto c = starbucks_case();
    const Judge judge(remote_judge(mock.endpoint()), client);
    EXPECT_EQ(judge.select(c.query, c.results).selected_ids, (std::vector<int>{4, 2, 0}));
    EXPECT_EQ(client->stats().retries, 1u);
    EXPECT_EQ(client->stats().attempts, 2u);
}

TEST(ApiClient, GivesUpAfterRetryCap) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    std::atomic<int> calls{0};
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.status = 503;
        });
    });
    ApiClient client(fast_settings(mock.endpoint()));
    try {
        client.chat("m", 0.0, {{"user", "hi"}});
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 503);
    }
    EXPECT_EQ(calls.load(), 4);
}

TEST(ApiClient, AuthErrorIsNotRetried) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-bad");
    std::atomic<int> calls{0};
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.status = 401;
        });
    });
    ApiClient client(fast_settings(mock.endpoint()));
    EXPECT_THROW(client.chat("m", 0.0, {{"user", "hi"}}), AuthError);
    EXPECT_EQ(calls.load(), 1);
}

TEST(ApiClient, MissingKeyIsAuthError) {
    ScopedEnv key("OVERVIEW_API_KEY", nullptr);
    ApiClient client(fast_settings("http://127.0.0.1:9/v1"));
    EXPECT_THROW(client.chat("m", 0.0, {{"user", "hi"}}), AuthError);
}

TEST(ApiClient, ConnectionFailureIsTransportError) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    auto s = fast_settings("http://127.0.0.1:1/v1");
    s.max_retries = 1;
    ApiClient client(s);
    EXPECT_THROW(client.chat("m", 0.0, {{"user", "hi"}}), TransportError);
    EXPECT_EQ(client.stats().attempts, 2u);
}

TEST(ApiClient, CancelledClientRefusesCalls) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    ApiClient client(fast_settings("http://127.0.0.1:1/v1"));
    client.cancel();
    EXPECT_THROW(client.chat("m", 0.0, {{"user", "hi"}}), CancelledError);
}

TEST(ApiClient, EndpointWithoutSchemeRejected) {
    EXPECT_THROW(ApiClient(fast_settings("localhost:8080")), ConfigError);
}

TEST(RemoteJudge, ReasksOnceAfterUnparseableReply) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    std::vector<json> bodies;
    std::mutex mu;
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mu);
            bodies.push_back(json::parse(req.body));
            res.set_content(chat_reply(bodies.size() == 1 ? "The best ones are bestbuy and amazon." : "Answer: 1, 0, 3")
                                .dump(),
                            "application/json");
        });
    });
    const auto c = starbucks_case();
    const auto out = Judge(remote_judge(mock.endpoint())).select(c.query, c.results);
    EXPECT_EQ(out.selected_ids, (std::vector<int>{1, 0, 3}));
    ASSERT_EQ(bodies.size(), 2u);
    const auto& msgs = bodies[1].at("messages");
    ASSERT_EQ(msgs.size(), 4u);
    EXPECT_EQ(msgs[2].at("role"), "assistant");
    EXPECT_EQ(msgs[3].at("content"), "Return the answer in the format: \"Answer: ID, ID, ID\"");
}

TEST(RemoteJudge, FailsAfterSecondBadReply) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content(chat_reply("Answer: 1, 1, 2").dump(), "application/json");
        });
    });
    const auto c = starbucks_case();
    EXPECT_THROW(Judge(remote_judge(mock.endpoint())).select(c.query, c.results), ParseError);
}

TEST(RemoteJudge, Gpt5ModelsSendTemperatureOne) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    json sent;
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            sent = json::parse(req.body);
            res.set_content(chat_reply("Answer: 0, 1, 2").dump(), "application/json");
        });
    });
    auto cfg = remote_judge(mock.endpoint());
    cfg.model_id = "gpt-5-mini";
    const auto c = starbucks_case();
    const auto out = Judge(cfg).select(c.query, c.results);
    EXPECT_EQ(sent.at("temperature"), 1.0);
    EXPECT_EQ(out.fingerprint.temperature, 1.0);
}

TEST(RemoteJudge, LinkAnswersForSignificantVariant) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content(chat_reply("See [link: https://www.walmart.com] and [link: https://www.bestbuy.com].").dump(),
                            "application/json");
        });
    });
    auto cfg = remote_judge(mock.endpoint());
    cfg.prompt_variant = PromptVariant::SignificantChange;
    const auto c = starbucks_case();
    EXPECT_EQ(Judge(cfg).select(c.query, c.results).selected_ids, (std::vector<int>{5, 0}));
}

TEST(ChatBody, SnapshotIsByteStable) {
    const auto c = starbucks_case();
    const auto p = render_prompt(PromptVariant::Baseline, c.query, c.results, 3);
    const auto body = ApiClient::chat_body("gpt-4.1-nano", 0.0, {{"system", p.system}, {"user", p.user}}).dump();
    EXPECT_EQ(body, ApiClient::chat_body("gpt-4.1-nano", 0.0, {{"system", p.system}, {"user", p.user}}).dump());
    const std::string expected_prefix =
        R"({"messages":[{"content":"The user will provide a dictionary of search results in JSON format \nfor search query \"starbucks gift cards 10\".\nReturn only ids of 3 most relevant sources for the provided search query. \nReturn the answer in the format: \"Answer: ID, ID, ID\"","role":"system"},{"content":"{\"0\":{\"url\":\"https://www.bestbuy.com\",\"title\":\"Starbucks - $10 Gift Cards (3-Pack)\",)";
    EXPECT_EQ(body.substr(0, expected_prefix.size()), expected_prefix);
    const std::string expected_suffix = R"(Walmart and save.\"}}","role":"user"}],"model":"gpt-4.1-nano","temperature":0.0})";
    EXPECT_EQ(body.substr(body.size() - expected_suffix.size()), expected_suffix);
}

TEST(ApiClient, EmbeddingsAndCompletions) {
    ScopedEnv key("OVERVIEW_API_KEY", "sk-test");
    MockServer mock([&](httplib::Server& s) {
        s.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
            const auto in = json::parse(req.body);
            json data = json::array();
            for (std::size_t i = 0; i < in.at("input").size(); ++i) data.push_back({{"embedding", {1.0, double(i)}}});
            res.set_content(json{{"data", data}}.dump(), "application/json");
        });
        s.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
            const auto in = json::parse(req.body);
            EXPECT_EQ(in.at("max_tokens"), 128);
            res.set_content(json{{"choices", json::array({{{"text", " done"}}})}}.dump(), "application/json");
        });
    });
    ApiClient client(fast_settings(mock.endpoint()));
    const auto e = client.embed("e5-small", {"a", "b"});
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[1], (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(client.complete("gemma-3-1b-it", 3.0, "prompt"), " done");
}
