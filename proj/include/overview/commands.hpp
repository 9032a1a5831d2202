#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "overview/config.hpp"

namespace overview {

struct CommandOptions {
    // Overrides the default report file name (relative paths land in the output directory).
    std::optional<std::string> report;
    // synth-corpus output file.
    std::optional<std::string> corpus_out;
};

// Corpus named by the config: the JSONL file when a path is set, else synthetic.
Corpus resolve_corpus(const RunConfig& config);

Judge make_judge(const JudgeConfig& config);
std::unique_ptr<EmbeddingProvider> make_embedder(const EmbedderSettings& settings);

// Each command validates the config, writes its files plus manifest.txt into
// config.out and prints a short summary. Errors propagate as exceptions.
void cmd_audit(const RunConfig& config, std::ostream& out, const CommandOptions& options = {});
void cmd_robustness(const RunConfig& config, std::ostream& out, const CommandOptions& options = {});
void cmd_optimize(const RunConfig& config, std::ostream& out, const CommandOptions& options = {});
void cmd_evaluate(const RunConfig& config, std::ostream& out, const CommandOptions& options = {});
void cmd_attack(const RunConfig& config, std::ostream& out, const CommandOptions& options = {});
void cmd_synth_corpus(const RunConfig& config, std::ostream& out, const CommandOptions& options = {});
// Blocks until the process is interrupted.
void cmd_serve(const RunConfig& config, std::ostream& out, const CommandOptions& options = {});

} // namespace overview
