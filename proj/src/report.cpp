#include "overview/report.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "overview/error.hpp"
#include "overview/version.hpp"

namespace overview {

std::string file_header(std::string_view config_hash, std::uint64_t seed) {
    return fmt::format("# config_hash={} seed={}\n", config_hash, seed);
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_number(double v) { return fmt::format("{}", v); }

void write_persistence_csv(std::ostream& out, const ReportStamp& stamp, const PersistenceReport& report) {
    out << file_header(stamp.config_hash, stamp.seed);
    out << "case_id,snippet_key,url,appearances,K,N,p_tail_ge,p_tail_le,flags\n";
    for (const auto& s : report.snippets) {
        std::string flags;
        if (s.persistent) flags = "persistent";
        if (s.never_selected) flags += flags.empty() ? "never_selected" : "|never_selected";
        out << fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(s.case_id), s.index, csv_field(s.url),
                           s.appearances, s.K, s.N, format_number(s.p_tail_ge), format_number(s.p_tail_le), flags);
    }
}

void write_robustness_csv(std::ostream& out, const ReportStamp& stamp, const RobustnessSummary& summary) {
    out << file_header(stamp.config_hash, stamp.seed);
    out << "kind,mean_overlap,std,n\n";
    for (const auto& k : summary.kinds) {
        out << fmt::format("{},{},{},{}\n", to_string(k.kind), format_number(k.mean_overlap), format_number(k.std), k.n);
    }
}

void write_trace_csv(std::ostream& out, const ReportStamp& stamp, const OptimizationTrace& trace) {
    out << file_header(stamp.config_hash, stamp.seed);
    out << "generation,best_total,mean_total,mean_length_ratio,best_cited,best_length_ratio,best_text\n";
    for (const auto& g : trace.generations) {
        out << fmt::format("{},{},{},{},{},{},{}\n", g.generation, format_number(g.best_total),
                           format_number(g.mean_total), format_number(g.mean_length_ratio), g.best_cited,
                           format_number(g.best_length_ratio), csv_field(g.best_text));
    }
}

void write_evaluation_csv(std::ostream& out, const ReportStamp& stamp, const EvaluationReport& report) {
    out << file_header(stamp.config_hash, stamp.seed);
    out << "kind,n,cited_before,cited_after,share_before,share_after\n";
    for (const auto& k : report.kinds) {
        out << fmt::format("{},{},{},{},{},{}\n", to_string(k.kind), k.n, k.cited_before, k.cited_after,
                           format_number(k.share_before()), format_number(k.share_after()));
    }
}

void write_evaluation_cases_csv(std::ostream& out, const ReportStamp& stamp, const EvaluationReport& report) {
    const auto kinds_text = [](const std::vector<PermutationKind>& kinds) {
        std::string s;
        for (auto k : kinds) {
            if (!s.empty()) s += '|';
            s += to_string(k);
        }
        return s;
    };
    out << file_header(stamp.config_hash, stamp.seed);
    out << "case_id,target_index,cited_before,cited_after,original,rewritten,error\n";
    for (const auto& c : report.cases) {
        out << fmt::format("{},{},{},{},{},{},\n", csv_field(c.case_id), c.target_index, kinds_text(c.cited_before),
                           kinds_text(c.cited_after), csv_field(c.original), csv_field(c.rewritten));
    }
    for (const auto& f : report.failures) {
        out << fmt::format("{},,,,,,{}\n", csv_field(f.case_id), csv_field(f.message));
    }
}

void write_attacks_csv(std::ostream& out, const ReportStamp& stamp, std::span<const AttackReport> reports) {
    out << file_header(stamp.config_hash, stamp.seed);
    out << "kind,case_id,seed,payload_leaked,attacked_cited\n";
    for (const auto& r : reports) {
        out << fmt::format("{},{},{},{},{}\n", to_string(r.kind), csv_field(r.case_id), r.seed,
                           r.payload_leaked ? "true" : "false", r.attacked_cited ? "true" : "false");
    }
}

void write_manifest(std::ostream& out, const Manifest& m) {
    out << file_header(m.config_hash, m.seed);
    out << "command=" << m.command << '\n';
    out << "version=" << kVersion << '\n';
    out << "config_hash=" << m.config_hash << '\n';
    out << "seed=" << m.seed << '\n';
    if (!m.seeds.empty()) {
        out << "seeds=";
        for (std::size_t i = 0; i < m.seeds.size(); ++i) out << (i ? "," : "") << m.seeds[i];
        out << '\n';
    }
    for (const auto& f : m.files) out << "file=" << f << '\n';
    out << "config=" << m.config_json << '\n';
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    f << content;
    if (!f) throw Error(fmt::format("write to {} failed", path.string()));
}

} // namespace overview
