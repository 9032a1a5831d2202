#pragma once

#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "overview/corpus.hpp"

namespace overview::testing {

inline SearchResult result(std::string url, std::string title, std::string snippet) {
    return {std::move(url), std::move(title), std::move(snippet)};
}

// n results on distinct domains with bland, query-free snippets.
inline QueryCase plain_case(std::string query, std::size_t n, std::string case_id = "plain") {
    static const char* domains[] = {"alpha.com", "bravo.com", "charlie.com", "delta.com", "echo.com",
                                    "foxtrot.com", "golf.com", "hotel.com", "india.com", "juliet.com"};
    QueryCase c;
    c.case_id = std::move(case_id);
    c.query = std::move(query);
    for (std::size_t i = 0; i < n; ++i) {
        c.results.push_back(result(std::string("https://www.") + domains[i % 10] + "/p" + std::to_string(i),
                                   "Item " + std::to_string(i) + " page",
                                   "plain listing text number " + std::to_string(i) + " with general details."));
    }
    return c;
}

// The six results of the "starbucks gift cards 10" example, in table order.
inline QueryCase starbucks_case() {
    QueryCase c;
    c.case_id = "starbucks-gift-cards-10";
    c.query = "starbucks gift cards 10";
    c.results = {
        result("https://www.bestbuy.com", "Starbucks - $10 Gift Cards (3-Pack)",
               "Shop Starbucks $10 Gift Cards (3 Pack) products at Best Buy. Find low everyday prices and buy online "
               "for delivery or in-store pick-up."),
        result("https://www.amazon.com", "Amazon.com: Starbucks $10 Gift Cards (4-Pack)",
               "This item contains 4 separate $10 gift cards; Starbucks Cards redeemable at most SB locations; It's a "
               "great way to treat a friend."),
        result("https://www.starbucks.com", "Gift Cards - Starbucks",
               "# Gift cards. Carousel content with 8 slides. Carousel content with 2 slides. Carousel content with 3 "
               "slides. ## Thank You. Carousel content with 3 slides. Carousel content with 3 slides. Carousel content "
               "with 3 slides. Carousel content with 2 slides. Carousel content with 1 slides...."),
        result("https://www.amazon.com", "Starbucks Coffee: Gift Cards - Amazon.com",
               "Image of Starbucks $10 Gift Cards (4-Pack). Starbucks $10 Gift Cards (4-Pack). 4.7 out of 5 stars "
               "15,726 customer reviews. $40.00."),
        result("https://www.brookshires.com", "Starbucks $10 X4 Giftcard - 1 Each - Brookshire's",
               "$10 x 4. You'll always have the perfect gift, on hand. Four cards to share with four of your luckiest "
               "friends. Cards have no value until activated by cashier."),
        result("https://www.walmart.com", "Starbucks Gift Cards in Restaurant Gift Cards - Walmart.com",
               "Shop for Starbucks Gift Cards in Restaurant Gift Cards. Buy products such as Starbucks Gift Card, "
               "Starbucks $40MP (4x$10) Gift Card at Walmart and save."),
    };
    return c;
}

// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
public:
    ScopedEnv(std::string name, const char* value) : name_(std::move(name)) {
        if (const char* old = std::getenv(name_.c_str())) old_ = old;
        if (value) ::setenv(name_.c_str(), value, 1);
        else ::unsetenv(name_.c_str());
    }
    ~ScopedEnv() {
        if (old_) ::setenv(name_.c_str(), old_->c_str(), 1);
        else ::unsetenv(name_.c_str());
    }

private:
    std::string name_;
    std::optional<std::string> old_;
};

// Local HTTP server on an ephemeral port, running on a background thread.
// Routes are installed by `setup` before the server starts listening.
class MockServer {
public:
    explicit MockServer(const std::function<void(httplib::Server&)>& setup) {
        setup(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace overview::testing
