#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "overview/commands.hpp"
#include "overview/error.hpp"
#include "overview/text.hpp"
#include "overview/version.hpp"

namespace {

using namespace overview;

// "A..B" or a single number.
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
    const auto dots = s.find("..");
    try {
        if (dots == std::string::npos) {
            const auto v = std::stoull(s);
            return {v, v};
        }
        return {std::stoull(s.substr(0, dots)), std::stoull(s.substr(dots + 2))};
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("--seeds '{}' must look like 0..19", s));
    }
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = text::trim(item);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::string read_file(const std::string& path, const char* flag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("{}: cannot read '{}'", flag, path));
    std::ostringstream s;
    s << in.rdbuf();
    return std::string(text::trim(s.str()));
}

struct Flags {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallel;
    std::optional<std::string> out;
    std::optional<std::string> corpus;
    std::optional<std::string> judge;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<std::string> kinds;
    std::optional<double> threshold;
    std::optional<double> temperature;
    std::optional<std::string> case_id;
    std::optional<std::string> policy;
    std::optional<std::size_t> generations;
    std::optional<std::size_t> target_index;
    std::optional<std::size_t> reference_index;
    std::optional<std::string> mode;
    std::optional<std::string> attack_kind;
    std::optional<std::string> payload;
    std::optional<std::string> payload_file;
    std::optional<std::string> markers;
    std::optional<std::string> seeds;
    std::optional<double> leak_threshold;
    std::optional<std::string> bind;
    std::optional<std::size_t> queries;
    std::optional<std::size_t> results;
    std::optional<std::string> profile;
    std::optional<std::uint64_t> synth_seed;
    CommandOptions command;
    bool verbose = false;
};

RunConfig resolve(const Flags& f) {
    RunConfig c = f.config_path ? load_config(*f.config_path) : RunConfig{};
    if (f.seed) c.seed = *f.seed;
    if (f.parallel) c.parallel = *f.parallel;
    if (f.out) c.out = *f.out;
    if (f.corpus) c.corpus.path = *f.corpus;
    if (f.judge) c.judge.kind = parse_judge_kind(*f.judge);
    if (f.endpoint) c.judge.remote.endpoint = c.policy.rewriter.remote.endpoint = *f.endpoint;
    if (f.model) c.judge.model_id = *f.model;
    if (f.kinds) c.kinds = c.robustness.kinds = parse_kind_list(*f.kinds);
    if (f.threshold) c.audit.threshold = *f.threshold;
    if (f.temperature) c.robustness.temperature = *f.temperature;
    if (f.case_id) c.optimize.case_id = c.attack.case_id = *f.case_id;
    if (f.policy) c.policy.kind = parse_policy_kind(*f.policy);
    if (f.generations) c.optimize.generations = c.evaluate.generations = *f.generations;
    if (f.target_index) c.optimize.target_index = c.attack.target_index = *f.target_index;
    if (f.reference_index) c.attack.reference_index = *f.reference_index;
    if (f.mode) c.optimize.mode = parse_advantage_mode(*f.mode);
    if (f.attack_kind) c.attack.kind = parse_attack_kind(*f.attack_kind);
    if (f.payload) c.attack.payload = *f.payload;
    if (f.payload_file) c.attack.payload = read_file(*f.payload_file, "--payload-file");
    if (f.markers) c.attack.markers = split_csv(*f.markers);
    if (f.seeds) std::tie(c.attack.seed_first, c.attack.seed_last) = parse_seed_range(*f.seeds);
    if (f.leak_threshold) c.attack.leak_threshold = *f.leak_threshold;
    if (f.bind) c.serve.bind = *f.bind;
    if (f.queries) c.corpus.synth_queries = *f.queries;
    if (f.results) c.corpus.synth_results = *f.results;
    if (f.profile) c.corpus.synth_profile = *f.profile;
    if (f.synth_seed) c.corpus.synth_seed = *f.synth_seed;
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-Overview bias audit, snippet optimization and attack harness"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config_path, "JSON run configuration");
    app.add_option("--seed", f.seed, "Run seed");
    app.add_option("--parallel", f.parallel, "Concurrent judge calls")->check(CLI::PositiveNumber);
    app.add_option("--out", f.out, "Output directory");
    app.add_option("--corpus", f.corpus, "JSONL corpus (default: synthetic)");
    app.add_option("--judge", f.judge, "synthetic | uniform | remote");
    app.add_option("--endpoint", f.endpoint, "Remote endpoint base URL");
    app.add_option("--model", f.model, "Remote judge model id");
    app.add_option("--queries", f.queries, "Synthetic corpus: number of cases");
    app.add_option("--results", f.results, "Synthetic corpus: results per case (7-10)");
    app.add_option("--profile", f.profile, "Synthetic corpus: default | sparse | dense");
    app.add_option("--synth-seed", f.synth_seed, "Synthetic corpus seed");
    app.add_flag("-v,--verbose", f.verbose, "Debug logging");

    auto* audit = app.add_subcommand("audit", "Persistence audit under permutations");
    audit->add_option("--kinds", f.kinds, "Comma-separated permutation kinds");
    audit->add_option("--threshold", f.threshold, "Significance threshold");
    audit->add_option("--report", f.command.report, "Report file name");

    auto* robustness = app.add_subcommand("robustness", "Overlap with the Direct baseline per shuffle kind");
    robustness->add_option("--kinds", f.kinds, "Comma-separated permutation kinds");
    robustness->add_option("--temperature", f.temperature, "Judge temperature for every run");
    robustness->add_option("--report", f.command.report, "Report file name");

    auto* optimize = app.add_subcommand("optimize", "Closed-loop snippet optimization for one case");
    optimize->add_option("--case-id", f.case_id, "Case to optimize (default: first)");
    optimize->add_option("--policy", f.policy, "builtin | remote | identity");
    optimize->add_option("--generations", f.generations, "Generations")->check(CLI::PositiveNumber);
    optimize->add_option("--target-index", f.target_index, "Result to rewrite (default: first uncited)");
    optimize->add_option("--mode", f.mode, "dr_grpo | grpo");
    optimize->add_option("--report", f.command.report, "Trace file name");

    auto* evaluate = app.add_subcommand("evaluate", "Citation share before/after rewriting, per permutation kind");
    evaluate->add_option("--policy", f.policy, "builtin | remote | identity");
    evaluate->add_option("--generations", f.generations, "0: single rewrite; >0: closed-loop generations");
    evaluate->add_option("--kinds", f.kinds, "Comma-separated permutation kinds");
    evaluate->add_option("--report", f.command.report, "Report file name");

    auto* attack = app.add_subcommand("attack", "Context-poisoning attacks");
    attack->add_option("--kind", f.attack_kind, "target_snippet | title | reference");
    attack->add_option("--payload", f.payload, "Payload text");
    attack->add_option("--payload-file", f.payload_file, "File holding the payload text");
    attack->add_option("--markers", f.markers, "Comma-separated marker tokens");
    attack->add_option("--seeds", f.seeds, "Seed range, e.g. 0..19");
    attack->add_option("--case-id", f.case_id, "Single case (default: every case)");
    attack->add_option("--target-index", f.target_index, "Target result index");
    attack->add_option("--reference-index", f.reference_index, "Poisoned reference index");
    attack->add_option("--leak-threshold", f.leak_threshold, "Marker fraction counted as a leak");
    attack->add_option("--policy", f.policy, "builtin | remote | identity");
    attack->add_option("--report", f.command.report, "Report file name");

    auto* serve = app.add_subcommand("serve", "Rollout scoring service for external trainers");
    serve->add_option("--bind", f.bind, "HOST:PORT");

    auto* synth = app.add_subcommand("synth-corpus", "Write a synthetic corpus as JSONL");
    synth->add_option("--output", f.command.corpus_out, "Output file (default: OUT/corpus.jsonl)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << '\n' << app.help();
        return 2;
    }

    spdlog::set_default_logger(spdlog::stderr_color_mt("overview"));
    spdlog::set_level(f.verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        const auto config = resolve(f);
        auto& out = std::cout;
        if (audit->parsed()) cmd_audit(config, out, f.command);
        else if (robustness->parsed()) cmd_robustness(config, out, f.command);
        else if (optimize->parsed()) cmd_optimize(config, out, f.command);
        else if (evaluate->parsed()) cmd_evaluate(config, out, f.command);
        else if (attack->parsed()) cmd_attack(config, out, f.command);
        else if (serve->parsed()) cmd_serve(config, out, f.command);
        else if (synth->parsed()) cmd_synth_corpus(config, out, f.command);
        return 0;
    } catch (const SelectionParseError& e) {
        std::cerr << "error: judge output: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
