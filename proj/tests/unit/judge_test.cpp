#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "overview/error.hpp"
#include "overview/judge.hpp"
#include "overview/rng.hpp"
#include "test_support.hpp"

using namespace overview;
using overview::testing::plain_case;
using overview::testing::result;
using overview::testing::starbucks_case;

namespace {

bool contains(const std::string& haystack, std::string_view needle) {
    return haystack.find(needle) != std::string::npos;
}

SelectionErrorKind parse_error_kind(std::string_view raw, std::size_t n, std::size_t k) {
    try {
        parse_selection(raw, n, k);
    } catch (const SelectionParseError& e) {
        EXPECT_EQ(e.raw(), raw);
        return e.kind();
    }
    ADD_FAILURE() << "no error for: " << raw;
    return SelectionErrorKind::NoAnswerPattern;
}

JudgeConfig keyword_judge(std::size_t k = 3) {
    JudgeConfig c;
    c.kind = JudgeKind::Synthetic;
    c.weights = {};
    c.weights.w_keyword = 1.0;
    c.urls_k = k;
    return c;
}

} // namespace

TEST(RenderPrompt, BaselineTemplate) {
    const auto c = plain_case("casio watch bands", 7);
    const auto p = render_prompt(PromptVariant::Baseline, c.query, c.results, 3);
    EXPECT_TRUE(contains(p.system, "Return only ids of 3 most relevant sources"));
    EXPECT_TRUE(contains(p.system, "for search query \"casio watch bands\"."));
    EXPECT_TRUE(contains(p.system, "Return the answer in the format: \"Answer: ID, ID, ID\""));
    EXPECT_EQ(p.system,
              "The user will provide a dictionary of search results in JSON format \n"
              "for search query \"casio watch bands\".\n"
              "Return only ids of 3 most relevant sources for the provided search query. \n"
              "Return the answer in the format: \"Answer: ID, ID, ID\"");
}

TEST(RenderPrompt, SlightChangeKeepsSpelling) {
    const auto c = plain_case("q", 7);
    const auto p = render_prompt(PromptVariant::SlightChange, c.query, c.results, 2);
    EXPECT_TRUE(contains(p.system, "Return me just the refences ids"));
    EXPECT_TRUE(contains(p.system, "based on 2 most relevant sources"));
    EXPECT_TRUE(contains(p.system, "\"Answer: ID, ID\""));
}

TEST(RenderPrompt, SignificantChangeAsksForLinks) {
    const auto c = plain_case("q", 7);
    const auto p = render_prompt(PromptVariant::SignificantChange, c.query, c.results, 3);
    EXPECT_TRUE(contains(p.system, "[link: ...]"));
    EXPECT_FALSE(contains(p.system, "Answer:"));
}

TEST(RenderPrompt, PayloadIsKeyedObjectInOrder) {
    const auto c = starbucks_case();
    const auto p = render_prompt(PromptVariant::Baseline, c.query, c.results, 3);
    const auto doc = nlohmann::json::parse(p.user);
    ASSERT_EQ(doc.size(), 6u);
    EXPECT_EQ(doc.at("3").at("title"), c.results[3].title);
    EXPECT_EQ(doc.at("5").at("snippet"), c.results[5].snippet);
    EXPECT_LT(p.user.find("\"0\""), p.user.find("\"1\""));
    EXPECT_LT(p.user.find("\"url\""), p.user.find("\"title\""));
}

TEST(ParseSelection, Examples) {
    EXPECT_EQ(parse_selection("Answer: 3, 1, 7", 10, 3), (std::vector<int>{3, 1, 7}));
    EXPECT_EQ(parse_selection("I considered all.\nAnswer: 2, 4, 9", 10, 3), (std::vector<int>{2, 4, 9}));
    EXPECT_EQ(parse_selection("Answer: 1, 2, 3\nOn reflection,\nAnswer: [5, 6, 0]", 10, 3), (std::vector<int>{5, 6, 0}));
    EXPECT_EQ(parse_error_kind("Answer: 3, 3, 7", 10, 3), SelectionErrorKind::DuplicateId);
}

TEST(ParseSelection, ErrorKinds) {
    EXPECT_EQ(parse_error_kind("no ids here", 10, 3), SelectionErrorKind::NoAnswerPattern);
    EXPECT_EQ(parse_error_kind("Answer: 1, 2", 10, 3), SelectionErrorKind::WrongCount);
    EXPECT_EQ(parse_error_kind("Answer: 1, 2, 10", 10, 3), SelectionErrorKind::IdOutOfRange);
    EXPECT_EQ(parse_error_kind("Answer: -1, 2, 3", 10, 3), SelectionErrorKind::IdOutOfRange);
}

TEST(ParseSelection, RoundTripsFormattedAnswers) {
    Rng rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = rng.between(1, 12);
        const std::size_t k = rng.between(1, n);
        std::vector<int> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        rng.shuffle(ids);
        ids.resize(k);
        EXPECT_EQ(parse_selection(format_answer(ids), n, k), ids);
    }
}

TEST(ParseLinkSelection, CreditsEveryResultWithTheUrl) {
    const auto c = starbucks_case();
    const auto ids = parse_link_selection(
        "Try [link: https://www.bestbuy.com] or [link: https://www.amazon.com/] and [link: https://www.brookshires.com]",
        c.results);
    EXPECT_EQ(ids, (std::vector<int>{0, 1, 3, 4}));
    EXPECT_THROW(parse_link_selection("nothing cited", c.results), SelectionParseError);
    EXPECT_THROW(parse_link_selection("[link: https://unknown.org]", c.results), SelectionParseError);
}

TEST(SyntheticScore, Examples) {
    SyntheticWeights w;
    w.w_keyword = 1.0;
    EXPECT_DOUBLE_EQ(synthetic_score(w, "red shoes", result("https://a.com", "t", "Red shoes!"), 2), 1.0);

    SyntheticWeights d;
    d.w_keyword = 0.0;
    d.w_domain = 1.0;
    d.domain_priors = {{"amazon.com", 0.7}};
    EXPECT_DOUBLE_EQ(synthetic_score(d, "q", result("https://www.amazon.com/x", "t", "s"), 1), 0.7);
    EXPECT_DOUBLE_EQ(synthetic_score(d, "q", result("https://other.com/x", "t", "s"), 1), 0.0);

    SyntheticWeights l;
    l.w_keyword = 0.0;
    l.w_length = 1.0;
    EXPECT_DOUBLE_EQ(synthetic_score(l, "q", result("https://a.com", "t", "one two three four"), 4), 1.0);
    EXPECT_DOUBLE_EQ(synthetic_score(l, "q", result("https://a.com", "t", "one two"), 4), 0.5);

    SyntheticWeights t;
    t.w_keyword = 0.0;
    t.w_title = 2.0;
    EXPECT_DOUBLE_EQ(synthetic_score(t, "a b", result("https://a.com", "a c", "s"), 1), 2.0 / 3.0);
    EXPECT_THROW(synthetic_score(t, "a", result("https://a.com", "a", "s"), 0), DomainError);
}

TEST(SyntheticWeights, Validation) {
    SyntheticWeights w;
    w.w_keyword = 0.0;
    EXPECT_THROW(w.validate(), ConfigError);
    w.w_title = -1.0;
    EXPECT_THROW(w.validate(), ConfigError);
    SyntheticWeights p;
    p.domain_priors = {{"a.com", 1.5}};
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(SyntheticSelect, TiesGoToLowerIndex) {
    // Scores 0.9, 0.5, 0.5, 0.1 via domain priors.
    JudgeConfig c;
    c.weights.w_keyword = 0.0;
    c.weights.w_domain = 1.0;
    c.weights.domain_priors = {{"a.com", 0.9}, {"b.com", 0.5}, {"c.com", 0.5}, {"d.com", 0.1}};
    std::vector<SearchResult> rs = {result("https://a.com", "t", "s"), result("https://b.com", "t", "s"),
                                    result("https://c.com", "t", "s"), result("https://d.com", "t", "s")};
    const auto out = synthetic_select(c, "q", rs);
    EXPECT_EQ(out.selected_ids, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(out.raw_response, "Answer: 0, 1, 2");
    EXPECT_EQ(synthetic_select(c, "q", rs), out);
}

TEST(SyntheticSelect, GumbelSamplingFavorsHigherScore) {
    JudgeConfig c;
    c.weights.w_keyword = 0.0;
    c.weights.w_domain = 1.0;
    c.weights.domain_priors = {{"a.com", 1.0}, {"b.com", 0.9}, {"c.com", 0.1}, {"d.com", 0.1}};
    c.temperature = 1.0;
    c.urls_k = 1;
    std::vector<SearchResult> rs = {result("https://a.com", "t", "s"), result("https://b.com", "t", "s"),
                                    result("https://c.com", "t", "s"), result("https://d.com", "t", "s")};
    int first = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        c.seed = derive_seed(7, s);
        first += synthetic_select(c, "q", rs).selected_ids.front() == 0;
    }
    // Gumbel-max draws the top item with softmax probability.
    const double p = std::exp(1.0) / (std::exp(1.0) + std::exp(0.9) + 2 * std::exp(0.1));
    EXPECT_NEAR(first / 1000.0, p, 0.05);
}

TEST(SyntheticSelect, PermutationCovariantAtZeroTemperature) {
    const auto c = plain_case("listing details", 8);
    auto cfg = keyword_judge();
    cfg.weights.w_length = 0.3;
    const auto base = synthetic_select(cfg, c.query, c.results);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> perm(c.results.size());
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        std::vector<SearchResult> shuffled;
        for (int p : perm) shuffled.push_back(c.results[static_cast<std::size_t>(p)]);
        const auto out = synthetic_select(cfg, c.query, shuffled);
        std::vector<int> mapped;
        for (int id : out.selected_ids) mapped.push_back(perm[static_cast<std::size_t>(id)]);
        // Same set of original results; order may differ only among exact ties.
        auto a = mapped, b = base.selected_ids;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        const auto scores = synthetic_scores(cfg.weights, c.query, c.results);
        bool tie_at_cut = false;
        std::vector<double> sorted = scores;
        std::sort(sorted.rbegin(), sorted.rend());
        tie_at_cut = sorted[2] == sorted[3];
        if (!tie_at_cut) EXPECT_EQ(a, b);
    }
}

TEST(SyntheticSelect, KTooLarge) {
    const auto c = plain_case("q", 7);
    EXPECT_THROW(synthetic_select(keyword_judge(8), c.query, c.results), DomainError);
}

TEST(UniformSelect, DistinctAndSeeded) {
    const auto c = plain_case("q", 7);
    JudgeConfig cfg;
    cfg.kind = JudgeKind::Uniform;
    for (std::uint64_t s = 0; s < 200; ++s) {
        cfg.seed = s;
        const auto out = Judge(cfg).select(c.query, c.results);
        ASSERT_EQ(out.selected_ids.size(), 3u);
        auto ids = out.selected_ids;
        std::sort(ids.begin(), ids.end());
        EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
        EXPECT_EQ(out, Judge(cfg).select(c.query, c.results));
    }
}

TEST(Judge, SyntheticDispatchEqualsSyntheticSelect) {
    const auto c = starbucks_case();
    const auto cfg = keyword_judge();
    EXPECT_EQ(judge_select(cfg, c.query, c.results), synthetic_select(cfg, c.query, c.results));
}

TEST(Judge, EffectiveTemperature) {
    EXPECT_EQ(effective_temperature("gpt-5-mini", 0.0), 1.0);
    EXPECT_EQ(effective_temperature("gpt-4.1-nano", 0.0), 0.0);
}

TEST(JudgeConfig, Validation) {
    JudgeConfig c;
    c.urls_k = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    JudgeConfig r;
    r.kind = JudgeKind::Remote;
    EXPECT_THROW(r.validate(), ConfigError);
    JudgeConfig t;
    t.temperature = -1.0;
    EXPECT_THROW(t.validate(), ConfigError);
}
