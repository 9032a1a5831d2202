#include "overview/config.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "overview/error.hpp"
#include "overview/rng.hpp"

namespace overview {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(fmt::format("'{}' must be an object", path_));
    }

    ~Section() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(fmt::format("unknown config key '{}{}'", prefix(), key));
        }
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(fmt::format("config key '{}{}' has the wrong type", prefix(), key));
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        T value{};
        get(key, value);
        out = value;
    }

    template <class Fn>
    void sub(const char* key, Fn&& fn) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        Section s(*it, prefix() + key);
        fn(s);
    }

    const json* raw(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string prefix() const { return path_.empty() ? std::string{} : path_ + "."; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class E, class Parse>
void get_enum(Section& s, const char* key, E& out, Parse parse) {
    std::optional<std::string> text;
    s.get(key, text);
    if (text) out = parse(*text);
}

void read_remote(Section& s, RemoteSettings& r) {
    s.get("endpoint", r.endpoint);
    s.get("api_key_env", r.api_key_env);
    s.get("timeout_s", r.timeout_s);
    s.get("max_retries", r.max_retries);
    s.get("backoff_initial_s", r.backoff_initial_s);
    s.get("backoff_max_s", r.backoff_max_s);
    s.get("max_in_flight", r.max_in_flight);
}

json write_remote(const RemoteSettings& r) {
    return {{"endpoint", r.endpoint},           {"api_key_env", r.api_key_env},
            {"timeout_s", r.timeout_s},         {"max_retries", r.max_retries},
            {"backoff_initial_s", r.backoff_initial_s}, {"backoff_max_s", r.backoff_max_s},
            {"max_in_flight", r.max_in_flight}};
}

std::vector<std::string> kind_names(const std::vector<PermutationKind>& kinds) {
    std::vector<std::string> out;
    for (auto k : kinds) out.emplace_back(to_string(k));
    return out;
}

void read_kinds(Section& s, const char* key, std::vector<PermutationKind>& out) {
    const auto* kinds = s.raw(key);
    if (!kinds) return;
    if (kinds->is_string()) {
        out = parse_kind_list(kinds->get<std::string>());
    } else if (kinds->is_array()) {
        out.clear();
        for (const auto& k : *kinds) {
            if (!k.is_string()) throw ConfigError(fmt::format("'{}{}' entries must be strings", s.prefix(), key));
            out.push_back(parse_permutation_kind(k.get<std::string>()));
        }
    } else {
        throw ConfigError(fmt::format("'{}{}' must be a list or a comma-separated string", s.prefix(), key));
    }
}

} // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    Section root(j, "");
    root.sub("corpus", [&](Section& s) {
        s.get("path", c.corpus.path);
        s.get("min_results", c.corpus.min_results);
        s.get("synth_seed", c.corpus.synth_seed);
        s.get("synth_queries", c.corpus.synth_queries);
        s.get("synth_results", c.corpus.synth_results);
        s.get("synth_profile", c.corpus.synth_profile);
    });
    root.sub("judge", [&](Section& s) {
        get_enum(s, "kind", c.judge.kind, parse_judge_kind);
        s.get("model_id", c.judge.model_id);
        s.get("temperature", c.judge.temperature);
        get_enum(s, "prompt_variant", c.judge.prompt_variant, parse_prompt_variant);
        s.get("urls_k", c.judge.urls_k);
        s.get("seed", c.judge.seed);
        s.sub("remote", [&](Section& r) { read_remote(r, c.judge.remote); });
        s.sub("weights", [&](Section& w) {
            w.get("w_keyword", c.judge.weights.w_keyword);
            w.get("w_length", c.judge.weights.w_length);
            w.get("w_domain", c.judge.weights.w_domain);
            w.get("w_title", c.judge.weights.w_title);
            w.get("w_favored", c.judge.weights.w_favored);
            w.get("domain_priors", c.judge.weights.domain_priors);
            w.get("favored_tokens", c.judge.weights.favored_tokens);
        });
    });
    root.sub("reward", [&](Section& s) {
        s.get("alpha", c.reward.length.alpha);
        s.get("beta", c.reward.length.beta);
        s.get("w_len", c.reward.weights.w_len);
        s.get("w_sim", c.reward.weights.w_sim);
        s.get("w_cit", c.reward.weights.w_cit);
        get_enum(s, "schedule", c.reward.weights.schedule, [](const std::string& v) {
            if (v == "static") return RewardSchedule::Static;
            if (v == "delayed_length") return RewardSchedule::DelayedLength;
            throw ConfigError(fmt::format("unknown reward schedule '{}'", v));
        });
        s.get("activation_step", c.reward.weights.activation_step);
    });
    root.sub("embedder", [&](Section& s) {
        s.get("kind", c.embedder.kind);
        s.get("dimension", c.embedder.dimension);
        s.get("model_id", c.embedder.model_id);
        s.sub("remote", [&](Section& r) { read_remote(r, c.embedder.remote); });
    });
    root.sub("policy", [&](Section& s) {
        get_enum(s, "kind", c.policy.kind, parse_policy_kind);
        s.get("conditional", c.policy.conditional);
        s.get("group_size", c.policy.group_size);
        s.sub("rates", [&](Section& r) {
            r.get("splice", c.policy.rates.splice);
            r.get("insert_query", c.policy.rates.insert_query);
            r.get("delete_span", c.policy.rates.delete_span);
            r.get("reorder_clauses", c.policy.rates.reorder_clauses);
            r.get("max_ops", c.policy.rates.max_ops);
        });
        s.sub("rewriter", [&](Section& r) {
            r.get("model_id", c.policy.rewriter.model_id);
            r.get("temperature", c.policy.rewriter.temperature);
            r.get("max_tokens", c.policy.rewriter.max_tokens);
            r.sub("remote", [&](Section& rr) { read_remote(rr, c.policy.rewriter.remote); });
        });
    });
    read_kinds(root, "kinds", c.kinds);
    root.sub("permutation", [&](Section& s) {
        s.get("sample_temperature", c.permutation.sample_temperature);
        s.get("alternate_model", c.permutation.alternate_model);
    });
    root.sub("audit", [&](Section& s) { s.get("threshold", c.audit.threshold); });
    root.sub("robustness", [&](Section& s) {
        s.get("temperature", c.robustness.temperature);
        read_kinds(s, "kinds", c.robustness.kinds);
    });
    root.sub("optimize", [&](Section& s) {
        s.get("case_id", c.optimize.case_id);
        s.get("target_index", c.optimize.target_index);
        s.get("generations", c.optimize.generations);
        get_enum(s, "mode", c.optimize.mode, parse_advantage_mode);
    });
    root.sub("evaluate", [&](Section& s) { s.get("generations", c.evaluate.generations); });
    root.sub("attack", [&](Section& s) {
        get_enum(s, "kind", c.attack.kind, parse_attack_kind);
        s.get("payload", c.attack.payload);
        s.get("markers", c.attack.markers);
        s.get("target_index", c.attack.target_index);
        s.get("reference_index", c.attack.reference_index);
        s.get("leak_threshold", c.attack.leak_threshold);
        s.get("seed_first", c.attack.seed_first);
        s.get("seed_last", c.attack.seed_last);
        s.get("case_id", c.attack.case_id);
    });
    root.sub("serve", [&](Section& s) { s.get("bind", c.serve.bind); });
    root.get("seed", c.seed);
    root.get("parallel", c.parallel);
    root.get("out", c.out);
    return c;
}

json config_to_json(const RunConfig& c) {
    json corpus = {{"min_results", c.corpus.min_results},     {"synth_seed", c.corpus.synth_seed},
                   {"synth_queries", c.corpus.synth_queries}, {"synth_results", c.corpus.synth_results},
                   {"synth_profile", c.corpus.synth_profile}};
    if (c.corpus.path) corpus["path"] = *c.corpus.path;

    const auto& w = c.judge.weights;
    json judge = {{"kind", to_string(c.judge.kind)},
                  {"model_id", c.judge.model_id},
                  {"temperature", c.judge.temperature},
                  {"prompt_variant", to_string(c.judge.prompt_variant)},
                  {"urls_k", c.judge.urls_k},
                  {"seed", c.judge.seed},
                  {"remote", write_remote(c.judge.remote)},
                  {"weights",
                   {{"w_keyword", w.w_keyword},
                    {"w_length", w.w_length},
                    {"w_domain", w.w_domain},
                    {"w_title", w.w_title},
                    {"w_favored", w.w_favored},
                    {"domain_priors", w.domain_priors},
                    {"favored_tokens", w.favored_tokens}}}};

    json reward = {{"alpha", c.reward.length.alpha},
                   {"beta", c.reward.length.beta},
                   {"w_len", c.reward.weights.w_len},
                   {"w_sim", c.reward.weights.w_sim},
                   {"w_cit", c.reward.weights.w_cit},
                   {"schedule", c.reward.weights.schedule == RewardSchedule::Static ? "static" : "delayed_length"},
                   {"activation_step", c.reward.weights.activation_step}};

    json embedder = {{"kind", c.embedder.kind},
                     {"dimension", c.embedder.dimension},
                     {"model_id", c.embedder.model_id},
                     {"remote", write_remote(c.embedder.remote)}};

    const auto& r = c.policy.rates;
    json policy = {{"kind", to_string(c.policy.kind)},
                   {"conditional", c.policy.conditional},
                   {"group_size", c.policy.group_size},
                   {"rates",
                    {{"splice", r.splice},
                     {"insert_query", r.insert_query},
                     {"delete_span", r.delete_span},
                     {"reorder_clauses", r.reorder_clauses},
                     {"max_ops", r.max_ops}}},
                   {"rewriter",
                    {{"model_id", c.policy.rewriter.model_id},
                     {"temperature", c.policy.rewriter.temperature},
                     {"max_tokens", c.policy.rewriter.max_tokens},
                     {"remote", write_remote(c.policy.rewriter.remote)}}}};

    json optimize = {{"case_id", c.optimize.case_id},
                     {"generations", c.optimize.generations},
                     {"mode", to_string(c.optimize.mode)}};
    if (c.optimize.target_index) optimize["target_index"] = *c.optimize.target_index;

    json attack = {{"kind", to_string(c.attack.kind)},   {"payload", c.attack.payload},
                   {"markers", c.attack.markers},        {"seed_first", c.attack.seed_first},
                   {"seed_last", c.attack.seed_last},    {"case_id", c.attack.case_id}};
    if (c.attack.target_index) attack["target_index"] = *c.attack.target_index;
    if (c.attack.reference_index) attack["reference_index"] = *c.attack.reference_index;
    if (c.attack.leak_threshold) attack["leak_threshold"] = *c.attack.leak_threshold;

    return {{"corpus", std::move(corpus)},
            {"judge", std::move(judge)},
            {"reward", std::move(reward)},
            {"embedder", std::move(embedder)},
            {"policy", std::move(policy)},
            {"kinds", kind_names(c.kinds)},
            {"permutation",
             {{"sample_temperature", c.permutation.sample_temperature},
              {"alternate_model", c.permutation.alternate_model}}},
            {"audit", {{"threshold", c.audit.threshold}}},
            {"robustness", {{"temperature", c.robustness.temperature}, {"kinds", kind_names(c.robustness.kinds)}}},
            {"optimize", std::move(optimize)},
            {"evaluate", {{"generations", c.evaluate.generations}}},
            {"attack", std::move(attack)},
            {"serve", {{"bind", c.serve.bind}}},
            {"seed", c.seed},
            {"parallel", c.parallel},
            {"out", c.out}};
}

void RunConfig::validate() const {
    if (corpus.min_results < 1) throw ConfigError("corpus.min_results must be >= 1");
    if (!corpus.path) {
        if (corpus.synth_results < 7 || corpus.synth_results > kMaxResults) {
            throw ConfigError("corpus.synth_results must be in [7, 10]");
        }
        (void)VocabProfile::by_name(corpus.synth_profile);
    }
    judge.validate();
    reward.validate();
    if (embedder.kind != "hashing" && embedder.kind != "remote") {
        throw ConfigError(fmt::format("unknown embedder kind '{}'", embedder.kind));
    }
    if (embedder.kind == "hashing" && embedder.dimension == 0) throw ConfigError("embedder.dimension must be positive");
    if (embedder.kind == "remote" && embedder.remote.endpoint.empty()) {
        throw ConfigError("remote embedder requires an endpoint");
    }
    policy.validate();
    if (kinds.empty()) throw ConfigError("at least one permutation kind is required");
    if (robustness.kinds.empty()) throw ConfigError("robustness.kinds must not be empty");
    if (!(audit.threshold > 0.0 && audit.threshold <= 1.0)) throw ConfigError("audit.threshold must be in (0, 1]");
    if (!(robustness.temperature >= 0.0)) throw ConfigError("robustness.temperature must be >= 0");
    if (optimize.generations < 1) throw ConfigError("optimize.generations must be >= 1");
    if (attack.seed_last < attack.seed_first) throw ConfigError("attack seed range is empty");
    if (attack.leak_threshold && !(*attack.leak_threshold > 0.0 && *attack.leak_threshold <= 1.0)) {
        throw ConfigError("attack.leak_threshold must be in (0, 1]");
    }
    if (parallel < 1) throw ConfigError("parallel must be >= 1");
    (void)parse_bind_address(serve.bind);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return config_from_json(j);
}

std::string config_hash(const RunConfig& c) {
    auto j = config_to_json(c);
    j.erase("out");
    j.erase("parallel");
    return fmt::format("{:016x}", fnv1a64(j.dump()));
}

std::pair<std::string, int> parse_bind_address(std::string_view s) {
    const auto colon = s.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw ConfigError(fmt::format("bind address '{}' must be HOST:PORT", s));
    }
    int port = -1;
    const auto digits = s.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || port < 0 || port > 65535) {
        throw ConfigError(fmt::format("bind address '{}' has an invalid port", s));
    }
    return {std::string(s.substr(0, colon)), port};
}

} // namespace overview
