#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace overview {

// One search hit as presented to the judge. The snippet is the only field a
// rewriting policy is allowed to change.
struct SearchResult {
    std::string url;
    std::string title;
    std::string snippet;

    bool operator==(const SearchResult&) const = default;
};

// A query with its ordered results. A result's ID is its zero-based position in
// the list presented to the judge.
struct QueryCase {
    std::string case_id;
    std::string query;
    std::vector<SearchResult> results;

    bool operator==(const QueryCase&) const = default;
};

struct Corpus {
    std::vector<QueryCase> cases;
    std::string provenance;

    const QueryCase* find(std::string_view case_id) const;
};

struct LoadStats {
    std::size_t read = 0;
    std::size_t kept = 0;
    std::size_t dropped_short = 0;
    // Individual results removed because their snippet was truncated.
    std::size_t dropped_incomplete_snippets = 0;
};

struct LoadedCorpus {
    Corpus corpus;
    LoadStats stats;
};

inline constexpr std::size_t kDefaultMinResults = 7;
inline constexpr std::size_t kMaxResults = 10;

// Throws SchemaError if a result violates the SearchResult invariants.
void validate_result(const SearchResult& result);

// Parses one JSONL corpus line. `line_no` only feeds error messages and the
// fallback case id ("case-<line_no>") used when the line has no "case_id" key.
QueryCase parse_case_line(std::string_view line, std::size_t line_no = 0);

// Inverse of parse_case_line; emits "case_id" alongside the required keys.
std::string serialize_case(const QueryCase& c);

// Drops results with truncated snippets, keeps at most kMaxResults from the head,
// and returns the case only if at least `min_results` remain.
std::optional<QueryCase> filter_case(const QueryCase& c, std::size_t min_results);

// Reads a JSONL corpus. Blank lines and lines starting with '#' are skipped.
LoadedCorpus load_corpus(const std::filesystem::path& path, std::size_t min_results = kDefaultMinResults);
LoadedCorpus load_corpus_stream(std::istream& in, std::size_t min_results, std::string provenance);

struct VocabProfile {
    std::size_t snippet_min_tokens = 8;
    std::size_t snippet_max_tokens = 40;
    // Each result draws the fraction of query tokens its snippet contains from this band.
    double query_fraction_min = 0.0;
    double query_fraction_max = 1.0;
    std::size_t title_min_tokens = 3;
    std::size_t title_max_tokens = 8;

    static VocabProfile by_name(std::string_view name);
};

Corpus synth_corpus(std::uint64_t seed, std::size_t n_queries, std::size_t results_per_query,
                    const VocabProfile& profile = {});

// Domains used by synth_corpus, in a fixed order.
const std::vector<std::string>& synth_domain_pool();

void write_corpus(std::ostream& out, const Corpus& corpus);

} // namespace overview
