#include "overview/commands.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overview/biasstat.hpp"
#include "overview/error.hpp"
#include "overview/parallel.hpp"
#include "overview/report.hpp"
#include "overview/rng.hpp"
#include "overview/rollout_service.hpp"

namespace overview {

namespace fs = std::filesystem;

Corpus resolve_corpus(const RunConfig& config) {
    const auto& src = config.corpus;
    if (src.path) {
        if (!fs::exists(*src.path)) throw ConfigError(fmt::format("--corpus: file '{}' does not exist", *src.path));
        auto loaded = load_corpus(*src.path, src.min_results);
        spdlog::info("corpus {}: read={} kept={} dropped_short={} dropped_incomplete_snippets={}", *src.path,
                     loaded.stats.read, loaded.stats.kept, loaded.stats.dropped_short,
                     loaded.stats.dropped_incomplete_snippets);
        return std::move(loaded.corpus);
    }
    return synth_corpus(src.synth_seed, src.synth_queries, src.synth_results, VocabProfile::by_name(src.synth_profile));
}

Judge make_judge(const JudgeConfig& config) { return Judge(config); }

std::unique_ptr<EmbeddingProvider> make_embedder(const EmbedderSettings& settings) {
    if (settings.kind == "remote") {
        return std::make_unique<RemoteEmbedder>(std::make_shared<ApiClient>(settings.remote), settings.model_id);
    }
    return std::make_unique<HashingEmbedder>(settings.dimension);
}

namespace {

struct Run {
    const RunConfig& config;
    std::string command;
    std::string hash;
    fs::path dir;
    Manifest manifest;

    Run(const RunConfig& c, std::string cmd) : config(c), command(std::move(cmd)), hash(config_hash(c)), dir(c.out) {
        config.validate();
        manifest.command = command;
        manifest.config_hash = hash;
        manifest.seed = c.seed;
        manifest.config_json = config_to_json(c).dump();
    }

    ReportStamp stamp() const { return {hash, config.seed}; }

    fs::path target(const std::optional<std::string>& override_name, const char* default_name) const {
        // An explicit path is taken as given, relative to the working directory.
        return override_name ? fs::path(*override_name) : dir / default_name;
    }

    void emit(const fs::path& path, const std::string& content) {
        write_text_file(path, content);
        const auto rel = path.lexically_relative(dir);
        const bool inside = !rel.empty() && *rel.begin() != "..";
        manifest.files.push_back(inside ? rel.generic_string() : path.generic_string());
    }

    void finish() {
        std::ostringstream m;
        write_manifest(m, manifest);
        write_text_file(dir / "manifest.txt", m.str());
    }
};

const QueryCase& pick_case(const Corpus& corpus, const std::string& case_id) {
    if (corpus.cases.empty()) throw Error("the corpus has no cases");
    if (case_id.empty()) return corpus.cases.front();
    if (const auto* c = corpus.find(case_id)) return *c;
    throw ConfigError(fmt::format("--case-id: no case '{}' in the corpus", case_id));
}

SelectionOutcome direct_outcome(const Judge& judge, const QueryCase& c, std::uint64_t seed) {
    const auto record = run_experiment_suite(c, {PermutationKind::Direct}, judge, seed);
    return record.runs.front().outcome;
}

std::atomic<RolloutService*> g_service{nullptr};

extern "C" void stop_service(int) {
    if (auto* s = g_service.load()) s->stop();
}

} // namespace

void cmd_audit(const RunConfig& config, std::ostream& out, const CommandOptions& options) {
    Run run(config, "audit");
    const auto corpus = resolve_corpus(config);
    const auto judge = make_judge(config.judge);
    SuiteOptions suite{config.permutation, 1};

    std::vector<ExperimentRecord> records(corpus.cases.size());
    parallel_for(corpus.cases.size(), config.parallel, [&](std::size_t i) {
        records[i] = run_experiment_suite(corpus.cases[i], config.kinds, judge, config.seed, suite);
    });
    const auto report = persistence_report(records, config.audit.threshold);

    std::ostringstream csv;
    write_persistence_csv(csv, run.stamp(), report);
    run.emit(run.target(options.report, "persistence.csv"), csv.str());

    std::ostringstream jsonl;
    jsonl << file_header(run.hash, config.seed);
    for (const auto& r : records) jsonl << record_to_json(r) << '\n';
    run.emit(run.dir / "records.jsonl", jsonl.str());
    run.finish();

    const auto& s = report.summary;
    out << fmt::format("cases={} experiments_per_case={} threshold={}\n", s.cases, config.kinds.size(),
                       config.audit.threshold);
    out << fmt::format("fully_persistent_cases={}\n", s.cases_fully_persistent);
    out << fmt::format("cases_with_2plus_never_selected={}\n", s.cases_multi_never_selected);
    out << fmt::format("persistent_snippets={}/{} never_selected_snippets={}/{}\n", s.snippets_persistent,
                       s.snippets, s.snippets_never_selected, s.snippets);
}

void cmd_robustness(const RunConfig& config, std::ostream& out, const CommandOptions& options) {
    Run run(config, "robustness");
    const auto corpus = resolve_corpus(config);
    if (corpus.cases.empty()) throw Error("the corpus has no cases");
    JudgeConfig jc = config.judge;
    jc.temperature = config.robustness.temperature;
    const auto judge = make_judge(jc);

    auto kinds = config.robustness.kinds;
    if (std::find(kinds.begin(), kinds.end(), PermutationKind::Direct) == kinds.end()) {
        kinds.insert(kinds.begin(), PermutationKind::Direct);
    }
    std::vector<CaseOverlaps> overlaps(corpus.cases.size());
    parallel_for(corpus.cases.size(), config.parallel, [&](std::size_t i) {
        const auto record = run_experiment_suite(corpus.cases[i], kinds, judge, config.seed, {config.permutation, 1});
        overlaps[i] = overlaps_from_record(record);
    });
    std::vector<PermutationKind> compared;
    for (auto k : kinds) {
        if (k != PermutationKind::Direct) compared.push_back(k);
    }
    const auto summary = robustness_summary(overlaps, compared);

    std::ostringstream csv;
    write_robustness_csv(csv, run.stamp(), summary);
    run.emit(run.target(options.report, "robustness.csv"), csv.str());
    run.finish();

    for (const auto& k : summary.kinds) {
        out << fmt::format("{:<18} mean_overlap={:.3f} std={:.3f} n={}\n", to_string(k.kind), k.mean_overlap, k.std,
                           k.n);
    }
}

void cmd_optimize(const RunConfig& config, std::ostream& out, const CommandOptions& options) {
    Run run(config, "optimize");
    const auto corpus = resolve_corpus(config);
    const auto& c = pick_case(corpus, config.optimize.case_id);
    const auto judge = make_judge(config.judge);
    const Policy policy(config.policy);
    const auto embedder = make_embedder(config.embedder);

    std::size_t target = 0;
    if (config.optimize.target_index) {
        target = *config.optimize.target_index;
        if (target >= c.results.size()) {
            throw ConfigError(fmt::format("--target-index {} outside [0, {})", target, c.results.size()));
        }
    } else {
        target = default_target(direct_outcome(judge, c, config.seed), c.results.size());
    }

    OptimizeOptions opt{config.optimize.mode, embedder.get(), config.parallel};
    OptimizationResult result;
    try {
        result = closed_loop_optimize(c, target, policy, judge, config.reward, config.optimize.generations,
                                      derive_seed(config.seed, "optimize/" + c.case_id), opt);
    } catch (const OptimizationError& e) {
        std::ostringstream csv;
        write_trace_csv(csv, run.stamp(), e.partial_trace());
        run.emit(run.target(options.report, "trace.csv"), csv.str());
        run.finish();
        throw;
    }

    std::ostringstream csv;
    write_trace_csv(csv, run.stamp(), result.trace);
    run.emit(run.target(options.report, "trace.csv"), csv.str());
    run.finish();

    out << fmt::format("case={} target_index={} generations={}\n", c.case_id, target, config.optimize.generations);
    out << fmt::format("initial: total={} cited={}\n", format_number(result.initial.total), result.initial.cit_r);
    out << fmt::format("best:    total={} cited={} length_ratio={:.3f}\n", format_number(result.best.total),
                       result.best.cit_r, result.best.length_ratio());
    if (result.trace.used_chat_fallback) out << "note: completion route unavailable, used chat fallback\n";
    out << "original: " << c.results[target].snippet << '\n';
    out << "best:     " << result.best_text << '\n';
}

void cmd_evaluate(const RunConfig& config, std::ostream& out, const CommandOptions& options) {
    Run run(config, "evaluate");
    const auto corpus = resolve_corpus(config);
    const auto judge = make_judge(config.judge);
    const Policy policy(config.policy);
    const auto embedder = make_embedder(config.embedder);

    EvaluateOptions eval;
    eval.reward = config.reward;
    eval.generations = config.evaluate.generations;
    eval.suite = {config.permutation, config.parallel};
    eval.embedder = embedder.get();
    const auto report = evaluate_policy(corpus, policy, judge, config.kinds, config.seed, eval);

    std::ostringstream csv;
    write_evaluation_csv(csv, run.stamp(), report);
    run.emit(run.target(options.report, "evaluation.csv"), csv.str());
    std::ostringstream cases;
    write_evaluation_cases_csv(cases, run.stamp(), report);
    run.emit(run.dir / "evaluation_cases.csv", cases.str());
    run.finish();

    for (const auto& k : report.kinds) {
        out << fmt::format("{:<18} before={:.3f} after={:.3f} n={}\n", to_string(k.kind), k.share_before(),
                           k.share_after(), k.n);
    }
    for (const auto& f : report.failures) out << fmt::format("failed case {}: {}\n", f.case_id, f.message);
}

void cmd_attack(const RunConfig& config, std::ostream& out, const CommandOptions& options) {
    Run run(config, "attack");
    const auto corpus = resolve_corpus(config);
    const auto judge = make_judge(config.judge);
    const Policy policy(config.policy);
    const auto embedder = make_embedder(config.embedder);
    const auto& a = config.attack;
    const auto payload = make_payload(a.payload, std::set<std::string>(a.markers.begin(), a.markers.end()));

    std::vector<const QueryCase*> cases;
    if (a.case_id.empty()) {
        for (const auto& c : corpus.cases) cases.push_back(&c);
    } else {
        cases.push_back(&pick_case(corpus, a.case_id));
    }

    struct Job {
        const QueryCase* c;
        std::size_t target;
        std::optional<std::size_t> reference;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const auto* c : cases) {
        std::size_t target = 0;
        std::optional<std::size_t> reference = a.reference_index;
        SelectionOutcome direct;
        if (!a.target_index || (a.kind == AttackKind::Reference && !reference)) direct = direct_outcome(judge, *c, config.seed);
        target = a.target_index ? *a.target_index : default_target(direct, c->results.size());
        if (a.kind == AttackKind::Reference && !reference) {
            // The strongest competitor: the first result the Direct run cites.
            for (int id : direct.selected_ids) {
                if (static_cast<std::size_t>(id) != target) {
                    reference = static_cast<std::size_t>(id);
                    break;
                }
            }
        }
        for (auto s = a.seed_first; s <= a.seed_last; ++s) {
            jobs.push_back({c, target, reference, s});
            run.manifest.seeds.push_back(s);
            if (s == a.seed_last) break;
        }
    }
    std::sort(run.manifest.seeds.begin(), run.manifest.seeds.end());
    run.manifest.seeds.erase(std::unique(run.manifest.seeds.begin(), run.manifest.seeds.end()), run.manifest.seeds.end());

    std::vector<AttackReport> reports(jobs.size());
    AttackOptions opt{a.leak_threshold, embedder.get(), 1};
    parallel_for(jobs.size(), config.parallel, [&](std::size_t i) {
        const auto& j = jobs[i];
        reports[i] = run_attack(a.kind, *j.c, j.target, j.reference, payload, policy, judge, config.reward,
                                derive_seed(j.seed, "attack/" + j.c->case_id), opt);
        reports[i].seed = j.seed;
    });

    std::ostringstream csv;
    write_attacks_csv(csv, run.stamp(), reports);
    run.emit(run.target(options.report, "attacks.csv"), csv.str());
    run.finish();

    std::size_t leaked = 0, cited = 0;
    for (const auto& r : reports) {
        leaked += r.payload_leaked;
        cited += r.attacked_cited;
    }
    out << fmt::format("attack={} runs={} payload_leaked={} attacked_cited={} (best-of-{} rewrite by total reward)\n",
                       to_string(a.kind), reports.size(), leaked, cited, config.policy.group_size);
}

void cmd_synth_corpus(const RunConfig& config, std::ostream& out, const CommandOptions& options) {
    Run run(config, "synth-corpus");
    RunConfig synth = config;
    synth.corpus.path.reset();
    const auto corpus = resolve_corpus(synth);
    std::ostringstream body;
    body << file_header(run.hash, config.seed);
    write_corpus(body, corpus);
    const auto path = run.target(options.corpus_out, "corpus.jsonl");
    run.emit(path, body.str());
    run.finish();
    out << fmt::format("wrote {} cases to {}\n", corpus.cases.size(), path.string());
}

void cmd_serve(const RunConfig& config, std::ostream& out, const CommandOptions&) {
    Run run(config, "serve");
    const auto [host, port] = parse_bind_address(config.serve.bind);
    auto embedder = make_embedder(config.embedder);
    RolloutService service({make_judge(config.judge), config.reward, config.optimize.mode, run.hash, embedder.get(),
                            config.parallel});
    service.bind(host, port);
    run.finish();
    out << fmt::format("serving on {}:{} config_hash={}\n", host, service.port(), run.hash) << std::flush;

    g_service.store(&service);
    auto prev_int = std::signal(SIGINT, stop_service);
    auto prev_term = std::signal(SIGTERM, stop_service);
    service.serve();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    g_service.store(nullptr);
}

} // namespace overview
