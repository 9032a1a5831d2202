#include "overview/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "overview/error.hpp"
#include "overview/rng.hpp"
#include "overview/text.hpp"

namespace overview {

using json = nlohmann::json;

const QueryCase* Corpus::find(std::string_view case_id) const {
    for (const auto& c : cases) {
        if (c.case_id == case_id) return &c;
    }
    return nullptr;
}

void validate_result(const SearchResult& r) {
    if (text::trim(r.url).empty() || !text::is_valid_url(r.url)) {
        throw SchemaError("url", fmt::format("result url is not a valid URL: '{}'", r.url));
    }
    if (text::trim(r.title).empty()) throw SchemaError("title", "result title is empty");
    if (text::trim(r.snippet).empty()) throw SchemaError("snippet", "result snippet is empty");
}

namespace {

std::string location(std::size_t line_no) {
    return line_no ? fmt::format("line {}: ", line_no) : std::string{};
}

const json& require(const json& obj, const char* key, std::size_t line_no, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(key, fmt::format("{}missing key \"{}\" in {}", location(line_no), key, where));
    }
    return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line_no, std::string_view where) {
    const auto& v = require(obj, key, line_no, where);
    if (!v.is_string()) {
        throw SchemaError(key, fmt::format("{}key \"{}\" in {} must be a string", location(line_no), key, where));
    }
    return v.get<std::string>();
}

} // namespace

QueryCase parse_case_line(std::string_view line, std::size_t line_no) {
    json doc;
    try {
        doc = json::parse(text::trim(line));
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}malformed JSON: {}", location(line_no), e.what()));
    }
    if (!doc.is_object()) throw SchemaError("query", fmt::format("{}case must be a JSON object", location(line_no)));

    QueryCase c;
    c.query = require_string(doc, "query", line_no, "case");
    const auto& results = require(doc, "results", line_no, "case");
    if (!results.is_array()) {
        throw SchemaError("results", fmt::format("{}key \"results\" must be an array", location(line_no)));
    }
    c.results.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        const auto where = fmt::format("results[{}]", i);
        if (!r.is_object()) throw SchemaError("results", fmt::format("{}{} must be an object", location(line_no), where));
        SearchResult sr{require_string(r, "url", line_no, where), require_string(r, "title", line_no, where),
                        require_string(r, "snippet", line_no, where)};
        try {
            validate_result(sr);
        } catch (const SchemaError& e) {
            throw SchemaError(e.field(), fmt::format("{}{}: {}", location(line_no), where, e.what()));
        }
        c.results.push_back(std::move(sr));
    }
    if (auto it = doc.find("case_id"); it != doc.end() && it->is_string()) {
        c.case_id = it->get<std::string>();
    } else {
        c.case_id = fmt::format("case-{}", line_no);
    }
    return c;
}

std::string serialize_case(const QueryCase& c) {
    nlohmann::ordered_json doc;
    doc["case_id"] = c.case_id;
    doc["query"] = c.query;
    auto results = nlohmann::ordered_json::array();
    for (const auto& r : c.results) {
        results.push_back({{"url", r.url}, {"title", r.title}, {"snippet", r.snippet}});
    }
    doc["results"] = std::move(results);
    return doc.dump();
}

std::optional<QueryCase> filter_case(const QueryCase& c, std::size_t min_results) {
    if (min_results < 1) throw DomainError("min_results must be at least 1");
    QueryCase out{c.case_id, c.query, {}};
    for (const auto& r : c.results) {
        if (text::ends_with_ellipsis(r.snippet)) continue;
        if (out.results.size() == kMaxResults) break;
        out.results.push_back(r);
    }
    if (out.results.size() < min_results) return std::nullopt;
    return out;
}

LoadedCorpus load_corpus_stream(std::istream& in, std::size_t min_results, std::string provenance) {
    LoadedCorpus loaded;
    loaded.corpus.provenance = std::move(provenance);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty() || body.front() == '#') continue;
        QueryCase c = parse_case_line(body, line_no);
        ++loaded.stats.read;
        for (const auto& r : c.results) {
            if (text::ends_with_ellipsis(r.snippet)) ++loaded.stats.dropped_incomplete_snippets;
        }
        if (auto kept = filter_case(c, min_results)) {
            for (const auto& prior : loaded.corpus.cases) {
                if (prior.case_id == kept->case_id) {
                    throw SchemaError("case_id", fmt::format("line {}: duplicate case_id '{}'", line_no, kept->case_id));
                }
            }
            loaded.corpus.cases.push_back(std::move(*kept));
            ++loaded.stats.kept;
        } else {
            ++loaded.stats.dropped_short;
        }
    }
    return loaded;
}

LoadedCorpus load_corpus(const std::filesystem::path& path, std::size_t min_results) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open corpus '{}'", path.string()));
    return load_corpus_stream(in, min_results, fmt::format("jsonl:{}", path.string()));
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& c : corpus.cases) out << serialize_case(c) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

const std::vector<std::string> kProducts = {
    "watch",   "bands",   "gift",     "cards",    "coffee",   "headphones", "charger", "cable",
    "shoes",   "jacket",  "backpack", "lamp",     "blender",  "kettle",     "mouse",   "keyboard",
    "tent",    "bottle",  "wallet",   "sunglasses", "pillow", "blanket",    "speaker", "camera"};

const std::vector<std::string> kModifiers = {
    "wireless", "leather", "men",    "women",   "replacement", "pack",  "black", "stainless",
    "kids",     "large",   "usb",    "organic", "waterproof",  "small", "steel", "cotton"};

const std::vector<std::string> kFiller = {
    "shop",     "buy",      "online",   "delivery", "free",      "shipping", "prices",  "quality",
    "store",    "deals",    "today",    "new",      "great",     "customer", "reviews", "stars",
    "available", "order",   "save",     "find",     "everyday",  "low",      "products", "brand",
    "official", "selection", "pickup",  "returns",  "warranty",  "collection", "top",   "rated",
    "popular",  "choose",   "from",     "our",      "wide",      "range",    "of",      "the",
    "and",      "for",      "with",     "your",     "every",     "item",     "discover", "exclusive",
    "offers",   "members",  "shipped",  "fast",     "secure",    "checkout", "compare", "options",
    "design",   "durable",  "comfort",  "style"};

const std::vector<std::string> kBrands = {"Acme", "Nova", "Orbit", "Summit", "Vertex", "Zenith", "Pioneer", "Lumen"};

const std::vector<std::string> kDomains = {
    "amazon.com",   "walmart.com",     "bestbuy.com",  "target.com",      "ebay.com",      "costco.com",
    "homedepot.com", "macys.com",      "kohls.com",    "newegg.com",      "etsy.com",      "wayfair.com",
    "rei.com",      "zappos.com",      "staples.com",  "samsclub.com",    "overstock.com", "lowes.com",
    "nordstrom.com", "dickssportinggoods.com", "chewy.com", "bhphotovideo.com", "brookshires.com", "qvc.com"};

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::vector<std::string> make_query(Rng& rng) {
    const std::size_t n = rng.between(2, 4);
    std::vector<std::string> q;
    q.push_back(rng.pick(kProducts));
    while (q.size() < n) {
        const auto& pool = rng.bernoulli(0.6) ? kModifiers : kProducts;
        const auto& w = rng.pick(pool);
        if (std::find(q.begin(), q.end(), w) == q.end()) q.push_back(w);
    }
    rng.shuffle(q);
    return q;
}

std::string make_snippet(Rng& rng, const std::vector<std::string>& query, const VocabProfile& profile) {
    const std::size_t length = rng.between(profile.snippet_min_tokens, profile.snippet_max_tokens);
    const double frac = profile.query_fraction_min + rng.uniform() * (profile.query_fraction_max - profile.query_fraction_min);
    std::size_t n_query = static_cast<std::size_t>(std::lround(frac * static_cast<double>(query.size())));
    n_query = std::min({n_query, query.size(), length});

    std::vector<std::string> chosen = query;
    rng.shuffle(chosen);
    chosen.resize(n_query);

    std::vector<std::string> words;
    words.reserve(length);
    while (words.size() + n_query < length) words.push_back(rng.pick(kFiller));
    for (const auto& q : chosen) words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)), q);

    // Sentence structure: capitalized starts, periods every 5-9 words, final period.
    std::size_t next_break = rng.between(5, 9);
    words.front() = capitalize(words.front());
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i + 1 == words.size()) {
            words[i] += '.';
        } else if (i + 1 == next_break) {
            words[i] += rng.bernoulli(0.5) ? "." : ",";
            if (words[i].back() == '.') words[i + 1] = capitalize(words[i + 1]);
            next_break += rng.between(5, 9);
        }
    }
    return text::join(words, " ");
}

std::string make_title(Rng& rng, const std::vector<std::string>& query, const std::string& domain,
                       const VocabProfile& profile) {
    const std::size_t length = rng.between(profile.title_min_tokens, profile.title_max_tokens);
    std::vector<std::string> words;
    words.push_back(rng.pick(kBrands));
    for (const auto& q : query) {
        if (words.size() < length && rng.bernoulli(0.5)) words.push_back(capitalize(q));
    }
    while (words.size() + 2 < length) words.push_back(capitalize(rng.pick(kFiller)));
    words.push_back("-");
    words.push_back(capitalize(domain.substr(0, domain.find('.'))));
    return text::join(words, " ");
}

} // namespace

const std::vector<std::string>& synth_domain_pool() { return kDomains; }

VocabProfile VocabProfile::by_name(std::string_view name) {
    VocabProfile p;
    if (name == "default" || name.empty()) return p;
    if (name == "sparse") {
        p.query_fraction_max = 0.5;
        return p;
    }
    if (name == "dense") {
        p.query_fraction_min = 0.5;
        return p;
    }
    throw ConfigError(fmt::format("unknown vocab profile '{}'", name));
}

Corpus synth_corpus(std::uint64_t seed, std::size_t n_queries, std::size_t results_per_query, const VocabProfile& profile) {
    if (results_per_query < 7 || results_per_query > kMaxResults) {
        throw DomainError(fmt::format("results_per_query must be in [7, 10], got {}", results_per_query));
    }
    if (profile.snippet_min_tokens < 1 || profile.snippet_min_tokens > profile.snippet_max_tokens) {
        throw DomainError("snippet token band is empty");
    }
    Corpus corpus;
    corpus.provenance = fmt::format("synth:seed={},n={},per_query={},band=[{},{}]", seed, n_queries, results_per_query,
                                    profile.snippet_min_tokens, profile.snippet_max_tokens);
    corpus.cases.reserve(n_queries);
    for (std::size_t i = 0; i < n_queries; ++i) {
        Rng rng(derive_seed(seed, i));
        const auto query = make_query(rng);
        auto domains = kDomains;
        rng.shuffle(domains);

        QueryCase c;
        c.case_id = fmt::format("synth-{}-{:04d}", seed, i);
        c.query = text::join(query, " ");
        const std::string slug = text::join(query, "-");
        for (std::size_t r = 0; r < results_per_query; ++r) {
            const auto& domain = domains[r];
            c.results.push_back(SearchResult{fmt::format("https://www.{}/{}-{}", domain, slug, r),
                                             make_title(rng, query, domain, profile),
                                             make_snippet(rng, query, profile)});
        }
        corpus.cases.push_back(std::move(c));
    }
    return corpus;
}

} // namespace overview
