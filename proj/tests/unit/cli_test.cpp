#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "overview/config.hpp"
#include "overview/error.hpp"

using namespace overview;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("overview-cli-" + std::to_string(::getpid()) + "-" +
                                            std::to_string(counter()++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

int run(const std::string& args, const fs::path& cwd) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" OVERVIEW_CLI_PATH "' " + args + " >out.log 2>err.log";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

} // namespace

TEST(Config, JsonRoundTripAndHash) {
    RunConfig c;
    c.seed = 9;
    c.judge.weights.w_domain = 0.5;
    const auto back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);

    auto other = c;
    other.out = "elsewhere";
    other.parallel = 8;
    EXPECT_EQ(config_hash(other), config_hash(c));
    other.seed = 10;
    EXPECT_NE(config_hash(other), config_hash(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    auto j = config_to_json(RunConfig{});
    j["judge"]["temprature"] = 0.5;
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = config_to_json(RunConfig{});
    j["reward"]["length"]["alpha"] = 3.0;
    EXPECT_THROW(config_from_json(j).validate(), ConfigError);
    EXPECT_EQ(parse_bind_address("0.0.0.0:9000"), (std::pair<std::string, int>{"0.0.0.0", 9000}));
    EXPECT_THROW(parse_bind_address("localhost"), ConfigError);
    EXPECT_THROW(parse_bind_address("h:70000"), ConfigError);
}

TEST(Cli, ExitCodes) {
    TempDir dir;
    EXPECT_EQ(run("--queries 3 audit", dir.path), 0);
    EXPECT_EQ(run("frobnicate", dir.path), 2);
    EXPECT_EQ(run("", dir.path), 2);
    write(dir.path / "bad.json", "{\"nope\": 1}");
    EXPECT_EQ(run("--config bad.json audit", dir.path), 2);
    EXPECT_NE(slurp(dir.path / "err.log").find("nope"), std::string::npos);
    EXPECT_EQ(run("--corpus missing.jsonl audit", dir.path), 2);
    EXPECT_EQ(run("--queries 3 audit --kinds direct,sideways", dir.path), 2);
    EXPECT_EQ(run("--help", dir.path), 0);
}

TEST(Cli, RerunsAreByteIdentical) {
    TempDir dir;
    const std::string args = "--queries 6 --seed 4 --parallel 3 --out ";
    ASSERT_EQ(run(args + "a audit", dir.path), 0);
    ASSERT_EQ(run(args + "b audit", dir.path), 0);
    for (const char* f : {"persistence.csv", "records.jsonl"}) {
        const auto a = slurp(dir.path / "a" / f);
        EXPECT_FALSE(a.empty());
        EXPECT_EQ(a, slurp(dir.path / "b" / f)) << f;
    }
    EXPECT_EQ(slurp(dir.path / "a" / "persistence.csv").rfind("# config_hash=", 0), 0u);
    ASSERT_EQ(run("--queries 6 --seed 4 --parallel 1 --out c audit", dir.path), 0);
    EXPECT_EQ(slurp(dir.path / "a" / "persistence.csv"), slurp(dir.path / "c" / "persistence.csv"));
}

TEST(Cli, CommandsWriteTheirReports) {
    TempDir dir;
    EXPECT_EQ(run("--queries 4 robustness", dir.path), 0);
    EXPECT_TRUE(fs::exists(dir.path / "out" / "robustness.csv"));
    EXPECT_EQ(run("--queries 4 optimize --generations 3", dir.path), 0);
    EXPECT_TRUE(fs::exists(dir.path / "out" / "trace.csv"));
    EXPECT_EQ(run("--queries 4 evaluate", dir.path), 0);
    EXPECT_TRUE(fs::exists(dir.path / "out" / "evaluation.csv"));
    EXPECT_EQ(run("--queries 4 attack --kind title --seeds 0..2 --case-id synth-1-0001", dir.path), 0);
    const auto attacks = slurp(dir.path / "out" / "attacks.csv");
    EXPECT_EQ(std::count(attacks.begin(), attacks.end(), '\n'), 5); // stamp, columns, three runs
    EXPECT_EQ(run("--queries 4 attack --kind title --seeds 0..1", dir.path), 0);
    const auto all_cases = slurp(dir.path / "out" / "attacks.csv");
    EXPECT_EQ(std::count(all_cases.begin(), all_cases.end(), '\n'), 10);
    EXPECT_EQ(run("--queries 4 synth-corpus --output c.jsonl", dir.path), 0);
    EXPECT_EQ(run("--corpus c.jsonl audit", dir.path), 0);
    const auto manifest = slurp(dir.path / "out" / "manifest.txt");
    EXPECT_NE(manifest.find("command=audit"), std::string::npos);
    EXPECT_EQ(run("--queries 2 audit --report mine.csv", dir.path), 0);
    EXPECT_TRUE(fs::exists(dir.path / "mine.csv"));
}
