#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "overview/permute.hpp"

namespace overview {

// Null model of unbiased citation: each of K independent experiments cites
// k_select of N candidates uniformly, so a given candidate's appearance count
// is Binomial(K, k_select / N).
class BinomialNull {
public:
    BinomialNull(std::size_t K, std::size_t N, std::size_t k_select = 3);

    std::size_t K() const noexcept { return K_; }
    std::size_t N() const noexcept { return N_; }
    std::size_t k_select() const noexcept { return k_select_; }
    double p() const noexcept { return p_; }

    // P(X = k), evaluated in log space.
    double pmf(std::size_t k) const;
    // P(X >= x); exactly 1 for x = 0.
    double tail_at_least(std::size_t x) const;
    // P(X <= x); exactly 1 for x = K.
    double tail_at_most(std::size_t x) const;
    // (K p, K p (1 - p))
    std::pair<double, double> moments() const noexcept;

private:
    double log_pmf(std::size_t k) const;

    std::size_t K_;
    std::size_t N_;
    std::size_t k_select_;
    double p_;
};

struct SnippetPersistence {
    std::string case_id;
    std::size_t index = 0;
    std::string url;
    int appearances = 0;
    std::size_t K = 0;
    std::size_t N = 0;
    double p_tail_ge = 1.0;
    double p_tail_le = 1.0;
    bool persistent = false;
    bool never_selected = false;
};

struct PersistenceSummary {
    std::size_t cases = 0;
    // Cases where some snippet was cited in every experiment and that count is significant.
    std::size_t cases_fully_persistent = 0;
    // Cases with at least two snippets that were never cited.
    std::size_t cases_multi_never_selected = 0;
    std::size_t snippets = 0;
    std::size_t snippets_persistent = 0;
    std::size_t snippets_never_selected = 0;
};

struct PersistenceReport {
    double threshold = 0.05;
    std::vector<SnippetPersistence> snippets;
    PersistenceSummary summary;
};

PersistenceReport persistence_report(std::span<const ExperimentRecord> records, double threshold = 0.05);

struct CaseOverlaps {
    std::string case_id;
    std::map<PermutationKind, int> overlap;
};

struct KindRobustness {
    PermutationKind kind = PermutationKind::Direct;
    double mean_overlap = 0.0;
    double std = 0.0; // population standard deviation
    std::size_t n = 0;
};

struct RobustnessSummary {
    std::vector<KindRobustness> kinds;

    const KindRobustness* find(PermutationKind k) const;
};

// Mean and population std of baseline overlap per kind; kinds absent from every
// case are left out with a warning.
RobustnessSummary robustness_summary(std::span<const CaseOverlaps> overlaps,
                                     const std::vector<PermutationKind>& kinds);

// Overlap of every non-Direct run with the record's Direct run.
CaseOverlaps overlaps_from_record(const ExperimentRecord& record);

} // namespace overview
