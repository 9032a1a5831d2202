#include "overview/biasstat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overview/error.hpp"

namespace overview {

BinomialNull::BinomialNull(std::size_t K, std::size_t N, std::size_t k_select) : K_(K), N_(N), k_select_(k_select) {
    if (K < 1) throw DomainError("binomial null needs K >= 1 experiments");
    if (k_select < 1 || k_select > N) {
        throw DomainError(fmt::format("binomial null needs 1 <= k_select <= N, got k_select={} N={}", k_select, N));
    }
    p_ = static_cast<double>(k_select) / static_cast<double>(N);
}

double BinomialNull::log_pmf(std::size_t k) const {
    const double n = static_cast<double>(K_);
    const double kk = static_cast<double>(k);
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(n - kk + 1.0);
    const double log_p = kk > 0.0 ? kk * std::log(p_) : 0.0;
    const double log_q = (n - kk) > 0.0 ? (n - kk) * std::log1p(-p_) : 0.0;
    return log_choose + log_p + log_q;
}

double BinomialNull::pmf(std::size_t k) const {
    if (k > K_) throw DomainError(fmt::format("pmf argument {} outside [0, {}]", k, K_));
    if (p_ == 1.0) return k == K_ ? 1.0 : 0.0;
    if (K_ == k || k == 0) {
        // Exact powers avoid lgamma rounding at the support edges.
        return k == 0 ? std::pow(1.0 - p_, static_cast<double>(K_)) : std::pow(p_, static_cast<double>(K_));
    }
    return std::exp(log_pmf(k));
}

double BinomialNull::tail_at_least(std::size_t x) const {
    if (x > K_) throw DomainError(fmt::format("tail argument {} outside [0, {}]", x, K_));
    if (x == 0) return 1.0;
    double sum = 0.0;
    for (std::size_t k = K_ + 1; k-- > x;) sum += pmf(k);
    return std::min(sum, 1.0);
}

double BinomialNull::tail_at_most(std::size_t x) const {
    if (x > K_) throw DomainError(fmt::format("tail argument {} outside [0, {}]", x, K_));
    if (x == K_) return 1.0;
    double sum = 0.0;
    for (std::size_t k = 0; k <= x; ++k) sum += pmf(k);
    return std::min(sum, 1.0);
}

std::pair<double, double> BinomialNull::moments() const noexcept {
    const double n = static_cast<double>(K_);
    return {n * p_, n * p_ * (1.0 - p_)};
}

PersistenceReport persistence_report(std::span<const ExperimentRecord> records, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("threshold must be in (0, 1]");
    PersistenceReport report;
    report.threshold = threshold;
    if (records.empty()) return report;

    const std::size_t K = records.front().K();
    for (const auto& rec : records) {
        if (rec.K() != K) {
            throw DomainError(fmt::format("inconsistent experiment count: case {} has K={}, expected {}", rec.case_id,
                                          rec.K(), K));
        }
        const BinomialNull null(K, rec.N(), rec.urls_k);
        bool fully_persistent = false;
        std::size_t never = 0;
        for (std::size_t i = 0; i < rec.N(); ++i) {
            SnippetPersistence s;
            s.case_id = rec.case_id;
            s.index = i;
            s.url = i < rec.original_urls.size() ? rec.original_urls[i] : std::string{};
            s.appearances = rec.appearance_counts[i];
            s.K = K;
            s.N = rec.N();
            // Link-form answers can credit two results sharing a URL in one run.
            const auto x = static_cast<std::size_t>(std::min<int>(s.appearances, static_cast<int>(K)));
            s.p_tail_ge = null.tail_at_least(x);
            s.p_tail_le = null.tail_at_most(x);
            s.persistent = s.p_tail_ge < threshold;
            s.never_selected = s.appearances == 0 && s.p_tail_le < threshold;
            if (s.persistent && x == K) fully_persistent = true;
            if (s.appearances == 0) ++never;
            report.summary.snippets_persistent += s.persistent;
            report.summary.snippets_never_selected += s.appearances == 0;
            report.snippets.push_back(std::move(s));
        }
        ++report.summary.cases;
        report.summary.cases_fully_persistent += fully_persistent;
        report.summary.cases_multi_never_selected += never >= 2;
    }
    report.summary.snippets = report.snippets.size();
    return report;
}

const KindRobustness* RobustnessSummary::find(PermutationKind k) const {
    for (const auto& r : kinds) {
        if (r.kind == k) return &r;
    }
    return nullptr;
}

RobustnessSummary robustness_summary(std::span<const CaseOverlaps> overlaps, const std::vector<PermutationKind>& kinds) {
    if (overlaps.empty()) throw DomainError("robustness summary needs at least one case");
    RobustnessSummary summary;
    for (const auto kind : kinds) {
        std::vector<double> values;
        for (const auto& c : overlaps) {
            if (auto it = c.overlap.find(kind); it != c.overlap.end()) values.push_back(it->second);
        }
        if (values.empty()) {
            spdlog::warn("no overlap samples for kind '{}'; excluded from robustness summary", to_string(kind));
            continue;
        }
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());
        summary.kinds.push_back({kind, mean, std::sqrt(var), values.size()});
    }
    return summary;
}

CaseOverlaps overlaps_from_record(const ExperimentRecord& record) {
    const auto* direct = record.find(PermutationKind::Direct);
    if (!direct) throw DomainError(fmt::format("case {} has no Direct baseline run", record.case_id));
    CaseOverlaps out{record.case_id, {}};
    const auto baseline = map_to_original(direct->outcome, direct->identity_map);
    SelectionOutcome base_outcome;
    base_outcome.selected_ids = baseline;
    for (const auto& run : record.runs) {
        if (run.kind == PermutationKind::Direct) continue;
        out.overlap[run.kind] = overlap_with_baseline(base_outcome, run.outcome, run.identity_map, run.kind);
    }
    return out;
}

} // namespace overview
