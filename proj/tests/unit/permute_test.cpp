#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "overview/biasstat.hpp"
#include "overview/corpus.hpp"
#include "overview/error.hpp"
#include "overview/permute.hpp"
#include "test_support.hpp"

using namespace overview;
using overview::testing::plain_case;
using overview::testing::starbucks_case;

namespace {

Judge keyword_judge(double w = 1.0) {
    JudgeConfig c;
    c.weights.w_keyword = w;
    return Judge(c);
}

std::multiset<std::string> field(const QueryCase& c, std::string SearchResult::*member) {
    std::multiset<std::string> out;
    for (const auto& r : c.results) out.insert(r.*member);
    return out;
}

bool is_bijection(const std::vector<int>& m) {
    std::vector<int> sorted = m;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] != static_cast<int>(i)) return false;
    }
    return true;
}

KindOutcome stored(PermutationKind kind, std::vector<int> ids) {
    KindOutcome k;
    k.kind = kind;
    k.outcome.selected_ids = std::move(ids);
    k.identity_map = {0, 1, 2, 3, 4, 5};
    return k;
}

} // namespace

TEST(PermutationKind, NamesRoundTrip) {
    for (auto k : {PermutationKind::Direct, PermutationKind::TemperatureSample, PermutationKind::ShuffleData,
                   PermutationKind::ShuffleUrls, PermutationKind::ShuffleTitles, PermutationKind::ShuffleSnippets,
                   PermutationKind::PromptSlight, PermutationKind::PromptSignificant, PermutationKind::ModelChange}) {
        EXPECT_EQ(parse_permutation_kind(to_string(k)), k);
    }
    EXPECT_EQ(parse_kind_list("direct, shuffle_urls").size(), 2u);
    EXPECT_THROW(parse_permutation_kind("nope"), ConfigError);
}

TEST(ApplyPermutation, ShuffleUrlsIsolatesTheField) {
    const auto c = plain_case("q", 3);
    const auto p = apply_permutation(PermutationKind::ShuffleUrls, c, 17);
    EXPECT_EQ(field(p.presented, &SearchResult::url), field(c, &SearchResult::url));
    bool moved = false;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(p.presented.results[i].title, c.results[i].title);
        EXPECT_EQ(p.presented.results[i].snippet, c.results[i].snippet);
        moved |= p.presented.results[i].url != c.results[i].url;
    }
    EXPECT_TRUE(moved);
}

TEST(ApplyPermutation, EveryShuffleKeepsMultisetsAndOtherFields) {
    const auto corpus = synth_corpus(4, 20, 8);
    for (const auto& c : corpus.cases) {
        for (auto kind : shuffle_kinds()) {
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                const auto p = apply_permutation(kind, c, seed);
                ASSERT_TRUE(is_bijection(p.identity_map));
                EXPECT_EQ(field(p.presented, &SearchResult::url), field(c, &SearchResult::url));
                EXPECT_EQ(field(p.presented, &SearchResult::title), field(c, &SearchResult::title));
                EXPECT_EQ(field(p.presented, &SearchResult::snippet), field(c, &SearchResult::snippet));
                EXPECT_NE(p.presented, c) << "shuffle must not be the identity";
                std::size_t moved_urls = 0, moved_titles = 0, moved_snippets = 0;
                for (std::size_t i = 0; i < c.results.size(); ++i) {
                    moved_urls += p.presented.results[i].url != c.results[i].url;
                    moved_titles += p.presented.results[i].title != c.results[i].title;
                    moved_snippets += p.presented.results[i].snippet != c.results[i].snippet;
                }
                if (kind == PermutationKind::ShuffleUrls) EXPECT_EQ(moved_titles + moved_snippets, 0u);
                if (kind == PermutationKind::ShuffleTitles) EXPECT_EQ(moved_urls + moved_snippets, 0u);
                if (kind == PermutationKind::ShuffleSnippets) EXPECT_EQ(moved_urls + moved_titles, 0u);
                // identity_map points at the original that owns the identity-bearing element.
                for (std::size_t slot = 0; slot < c.results.size(); ++slot) {
                    const auto& orig = c.results[static_cast<std::size_t>(p.identity_map[slot])];
                    if (kind == PermutationKind::ShuffleSnippets) EXPECT_EQ(orig.url, p.presented.results[slot].url);
                    else EXPECT_EQ(orig.snippet, p.presented.results[slot].snippet);
                }
            }
        }
    }
}

TEST(ApplyPermutation, DirectIsIdentity) {
    const auto c = starbucks_case();
    const auto p = apply_permutation(PermutationKind::Direct, c, 1);
    EXPECT_EQ(p.presented, c);
    EXPECT_EQ(p.identity_map, (std::vector<int>{0, 1, 2, 3, 4, 5}));
    EXPECT_TRUE(p.judge_override.empty());
}

TEST(ApplyPermutation, ShuffleDataDeterministic) {
    const auto c = plain_case("q", 9);
    const auto a = apply_permutation(PermutationKind::ShuffleData, c, 99);
    const auto b = apply_permutation(PermutationKind::ShuffleData, c, 99);
    EXPECT_EQ(a.identity_map, b.identity_map);
    EXPECT_EQ(a.presented, b.presented);
}

TEST(ApplyPermutation, TwoResultsAlwaysSwap) {
    const auto c = plain_case("q", 2);
    for (std::uint64_t s = 0; s < 20; ++s) {
        EXPECT_EQ(apply_permutation(PermutationKind::ShuffleData, c, s).identity_map, (std::vector<int>{1, 0}));
    }
    EXPECT_THROW(apply_permutation(PermutationKind::ShuffleData, plain_case("q", 1), 0), DomainError);
}

TEST(ApplyPermutation, Overrides) {
    const auto c = plain_case("q", 7);
    EXPECT_EQ(apply_permutation(PermutationKind::TemperatureSample, c, 0).judge_override.temperature, 1.0);
    EXPECT_EQ(apply_permutation(PermutationKind::PromptSlight, c, 0).judge_override.prompt_variant,
              PromptVariant::SlightChange);
    EXPECT_EQ(apply_permutation(PermutationKind::PromptSignificant, c, 0).judge_override.prompt_variant,
              PromptVariant::SignificantChange);
    PermutationOptions opt;
    opt.alternate_model = "gpt-5-mini";
    EXPECT_EQ(apply_permutation(PermutationKind::ModelChange, c, 0, opt).judge_override.model_id, "gpt-5-mini");
}

TEST(ExperimentSuite, DirectOnlyCountsThree) {
    const auto c = plain_case("listing", 7);
    const auto rec = run_experiment_suite(c, {PermutationKind::Direct}, keyword_judge(), 5);
    EXPECT_EQ(rec.K(), 1u);
    EXPECT_EQ(std::count(rec.appearance_counts.begin(), rec.appearance_counts.end(), 1), 3);
    EXPECT_EQ(std::count(rec.appearance_counts.begin(), rec.appearance_counts.end(), 0), 4);
}

TEST(ExperimentSuite, DominantSnippetSurvivesEverything) {
    auto c = plain_case("casio watch bands replacement", 7);
    c.results[4].snippet = "Casio watch bands replacement for every model.";
    std::vector<PermutationKind> kinds = audit_kinds();
    const auto rec = run_experiment_suite(c, kinds, keyword_judge(10.0), 8);
    EXPECT_EQ(rec.K(), 7u);
    EXPECT_EQ(rec.appearance_counts[4], 7);
    int total = std::accumulate(rec.appearance_counts.begin(), rec.appearance_counts.end(), 0);
    EXPECT_EQ(total, 21);
    for (int n : rec.appearance_counts) {
        EXPECT_GE(n, 0);
        EXPECT_LE(n, 7);
    }
}

TEST(ExperimentSuite, ShuffleDataNeverChangesTheSelectedSetAtZeroTemperature) {
    const auto corpus = synth_corpus(21, 40, 9);
    JudgeConfig cfg;
    cfg.weights.w_keyword = 1.0;
    cfg.weights.w_length = 0.37;
    const Judge judge(cfg);
    for (const auto& c : corpus.cases) {
        const auto rec = run_experiment_suite(c, {PermutationKind::Direct, PermutationKind::ShuffleData}, judge, 3);
        const auto scores = synthetic_scores(cfg.weights, c.query, c.results);
        auto sorted = scores;
        std::sort(sorted.rbegin(), sorted.rend());
        if (sorted[2] == sorted[3]) continue; // a tie at the cut is broken by position
        auto a = map_to_original(rec.runs[0].outcome, rec.runs[0].identity_map);
        auto b = map_to_original(rec.runs[1].outcome, rec.runs[1].identity_map);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b) << c.case_id;
    }
}

TEST(ExperimentSuite, ReproducibleAndRejectsDuplicates) {
    const auto c = synth_corpus(2, 1, 7).cases.front();
    JudgeConfig cfg;
    cfg.temperature = 0.5;
    const Judge judge(cfg);
    const auto a = run_experiment_suite(c, audit_kinds(), judge, 77);
    SuiteOptions par;
    par.parallel = 4;
    const auto b = run_experiment_suite(c, audit_kinds(), judge, 77, par);
    EXPECT_EQ(record_to_json(a), record_to_json(b));
    EXPECT_THROW(run_experiment_suite(c, {PermutationKind::Direct, PermutationKind::Direct}, judge, 1), ConfigError);
    EXPECT_THROW(run_experiment_suite(c, {}, judge, 1), ConfigError);
}

TEST(ExperimentSuite, JudgeErrorsNameTheKind) {
    const auto c = plain_case("q", 7);
    JudgeConfig cfg;
    cfg.urls_k = 3;
    const Judge judge(cfg);
    auto small = c;
    small.results.resize(2);
    try {
        run_experiment_suite(small, {PermutationKind::Direct, PermutationKind::ShuffleUrls}, judge, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("direct"), std::string::npos);
    }
}

TEST(ExperimentRecord, JsonRoundTrip) {
    const auto c = synth_corpus(6, 1, 8).cases.front();
    const auto rec = run_experiment_suite(c, audit_kinds(), keyword_judge(), 1);
    const auto back = record_from_json(record_to_json(rec));
    EXPECT_EQ(record_to_json(back), record_to_json(rec));
    EXPECT_EQ(back.appearance_counts, rec.appearance_counts);
    EXPECT_EQ(back.K(), rec.K());
}

TEST(Overlap, Examples) {
    SelectionOutcome base, perm;
    base.selected_ids = {1, 2, 3};
    const std::vector<int> ident = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    perm.selected_ids = {2, 3, 9};
    EXPECT_EQ(overlap_with_baseline(base, perm, ident, PermutationKind::ShuffleUrls), 2);
    perm.selected_ids = {3, 1, 2};
    EXPECT_EQ(overlap_with_baseline(base, perm, ident, PermutationKind::ShuffleTitles), 3);
    perm.selected_ids = {4, 5, 6};
    EXPECT_EQ(overlap_with_baseline(base, perm, ident, PermutationKind::ShuffleSnippets), 0);
    // Whole-result shuffle: slots map back through the permutation.
    const std::vector<int> moved = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
    perm.selected_ids = {8, 7, 0};
    EXPECT_EQ(overlap_with_baseline(base, perm, moved, PermutationKind::ShuffleData), 2);
    EXPECT_THROW(overlap_with_baseline(base, perm, moved, PermutationKind::ShuffleUrls), DomainError);
}

// Stored outcomes of the seven experiments for "starbucks gift cards 10". The
// significant-change run answers with links; both amazon.com results carry the
// same URL, so that run credits four results.
TEST(StarbucksReplay, AppearanceCounts) {
    const auto c = starbucks_case();
    const auto linked = parse_link_selection(
        "Best Buy has a 3-pack [link: https://www.bestbuy.com], Amazon sells a 4-pack [link: https://www.amazon.com] "
        "and Brookshire's stocks them too [link: https://www.brookshires.com].",
        c.results);
    ASSERT_EQ(linked, (std::vector<int>{0, 1, 3, 4}));

    std::vector<KindOutcome> runs = {
        stored(PermutationKind::Direct, {0, 1, 2}),
        stored(PermutationKind::TemperatureSample, {1, 0, 2}),
        stored(PermutationKind::ShuffleData, {0, 1, 3}),
        stored(PermutationKind::ShuffleUrls, {0, 3, 1}),
        stored(PermutationKind::PromptSlight, {0, 1, 4}),
        stored(PermutationKind::PromptSignificant, linked),
        stored(PermutationKind::ModelChange, {4, 0, 1}),
    };
    const auto counts = count_appearances(runs, c.results.size());
    EXPECT_EQ(counts, (std::vector<int>{7, 7, 2, 3, 3, 0}));

    ExperimentRecord rec;
    rec.case_id = c.case_id;
    rec.runs = runs;
    rec.appearance_counts = counts;
    for (const auto& r : c.results) rec.original_urls.push_back(r.url);
    const std::vector<ExperimentRecord> records = {rec};
    const auto report = persistence_report(records, 0.05);
    ASSERT_EQ(report.snippets.size(), 6u);
    EXPECT_NEAR(report.snippets[0].p_tail_ge, 0.0078125, 1e-12);
    EXPECT_TRUE(report.snippets[0].persistent);
    EXPECT_TRUE(report.snippets[1].persistent);
    EXPECT_FALSE(report.snippets[3].persistent);
    EXPECT_EQ(report.snippets[5].appearances, 0);
    EXPECT_TRUE(report.snippets[5].never_selected);
    EXPECT_EQ(report.summary.cases_fully_persistent, 1u);
}
