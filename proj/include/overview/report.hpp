#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "overview/attacks.hpp"
#include "overview/biasstat.hpp"
#include "overview/optimize.hpp"

namespace overview {

// Every emitted file starts with this line.
std::string file_header(std::string_view config_hash, std::uint64_t seed);

// RFC 4180 quoting when the field contains a comma, quote or newline.
std::string csv_field(std::string_view s);

// Shortest round-trip representation; stable across runs.
std::string format_number(double v);

struct ReportStamp {
    std::string config_hash;
    std::uint64_t seed = 0;
};

void write_persistence_csv(std::ostream& out, const ReportStamp& stamp, const PersistenceReport& report);
void write_robustness_csv(std::ostream& out, const ReportStamp& stamp, const RobustnessSummary& summary);
void write_trace_csv(std::ostream& out, const ReportStamp& stamp, const OptimizationTrace& trace);
void write_evaluation_csv(std::ostream& out, const ReportStamp& stamp, const EvaluationReport& report);
void write_evaluation_cases_csv(std::ostream& out, const ReportStamp& stamp, const EvaluationReport& report);
void write_attacks_csv(std::ostream& out, const ReportStamp& stamp, std::span<const AttackReport> reports);

struct Manifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds; // extra seeds used (e.g. attack seed range)
    std::vector<std::string> files;
    std::string config_json;
};

void write_manifest(std::ostream& out, const Manifest& m);

// Writes `content` to dir/name, creating dir when needed.
void write_text_file(const std::filesystem::path& path, std::string_view content);

} // namespace overview
