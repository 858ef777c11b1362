#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "assist/cli.hpp"
#include "assist/error.hpp"
#include "assist/mock_provider.hpp"
#include "assist/replay.hpp"
#include "assist/scenario.hpp"
#include "assist/swift_subset.hpp"
#include "assist/transport.hpp"
#include "support.hpp"

using namespace assist;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args, const std::string& input = "")
{
    args.insert(args.begin(), "assist-bridge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(input);
    std::ostringstream out;
    std::ostringstream err;
    CliRun r;
    r.code = runCli(static_cast<int>(argv.size()), argv.data(), CliStreams{in, out, err, {}});
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string sourcePath(const std::string& rel)
{
    return (fs::path(ASSIST_SOURCE_DIR) / rel).string();
}

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() /
               ("assist-cli-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("reference oracles")
    {
        CHECK(gcdOracle(7, 7) == 7);
        CHECK(gcdOracle(48, 18) == 6);
        CHECK(gcdOracle(17, 5) == 1);
        CHECK(lcmOracle(4, 6) == 12);
        CHECK(lcmOracle(21, 6) == 42);
        for (std::int64_t n = 1; n <= 50; ++n) {
            CHECK(gcdOracle(n, 1) == 1);
            CHECK(gcdOracle(n, n) == n);
            CHECK(lcmOracle(n, 1) == n);
            CHECK(lcmOracle(n, n) == n);
        }
        CHECK_THROWS_AS(gcdOracle(0, 3), std::invalid_argument);
        CHECK_THROWS_AS(lcmOracle(3, -1), std::invalid_argument);
    }

    TEST_CASE("property: gcd * lcm == a * b over 1..200")
    {
        // The two oracles share no code, so agreement is meaningful.
        for (std::int64_t a = 1; a <= 200; ++a) {
            for (std::int64_t b = 1; b <= 200; ++b) REQUIRE(gcdOracle(a, b) * lcmOracle(a, b) == a * b);
        }
    }

    TEST_CASE("interpreter runs the canned answers")
    {
        SwiftSubset brute(canned::kHcfBruteForce);
        SwiftSubset euclid(canned::kHcfEuclid);
        SwiftSubset withHcf(std::string(canned::kHcfEuclid) + "\n" + canned::kLcmWithHcf);
        SwiftSubset noHcf(canned::kLcmWithoutHcf);
        for (std::int64_t a = 1; a <= 60; ++a) {
            for (std::int64_t b = 1; b <= 60; ++b) {
                REQUIRE(brute.call("hcf", {a, b}) == gcdOracle(a, b));
                REQUIRE(euclid.call("hcf", {a, b}) == gcdOracle(a, b));
                REQUIRE(withHcf.call("lcm", {a, b}) == lcmOracle(a, b));
                REQUIRE(noHcf.call("lcm", {a, b}) == lcmOracle(a, b));
            }
        }
        CHECK(withHcf.calledNames("lcm").contains("hcf"));
        CHECK_FALSE(noHcf.calledNames("lcm").contains("hcf"));
        CHECK(noHcf.functionNames() == std::vector<std::string>{"lcm"});

        // The SwiftUI answers declare no integer functions but must still parse.
        CHECK(SwiftSubset(canned::kSwiftUiNavigation).functionNames().empty());
        CHECK(SwiftSubset(canned::kSwiftUiViews).functionNames().empty());
    }

    TEST_CASE("interpreter semantics")
    {
        SwiftSubset p(R"(import Foundation
struct Ignored { var x = 1 }
func f(_ a: Int, _ b: Int) -> Int {
    var total = 0
    var i = a
    while i <= b {
        if i % 2 == 0 && !(i == 4) {
            total += i
        } else if i == 4 {
            total -= 100
        } else {
            total *= 1
        }
        i += 1
    }
    return total
}
func twice(_ v: Int) -> Int { return f(0, v) * 2 + min(v, 3) - max(-v, -1) + abs(-2) }
func div(_ a: Int, _ b: Int) -> Int { return a / b }
func spin() -> Int { while true { } return 0 }
func constant() -> Int { let k = 1
 k = 2
 return k }
func big(_ a: Int) -> Int { return a * a }
)");
        CHECK(p.call("f", {1, 6}) == 2 - 100 + 6);
        CHECK(p.call("twice", {6}) == (2 - 100 + 6) * 2 + 3 + 1 + 2);
        CHECK(p.call("div", {-7, 2}) == -3);
        CHECK_THROWS_AS(p.call("div", {1, 0}), SwiftError);
        CHECK_THROWS_AS(p.call("spin", {}, 10000), SwiftError);
        CHECK_THROWS_AS(p.call("constant", {}), SwiftError);
        CHECK_THROWS_AS(p.call("big", {std::int64_t{1} << 40}), SwiftError);
        CHECK_THROWS_AS(p.call("f", {1}), SwiftError);
        CHECK_THROWS_AS(p.call("missing", {}), SwiftError);
        CHECK_THROWS_AS(SwiftSubset("func broken(_ a: Int) -> Int { return a + }"), SwiftError);
    }

    TEST_CASE("every case-study scenario passes")
    {
        for (const auto& name : scenarioNames()) {
            CAPTURE(name);
            auto r = runScenario(name);
            CHECK(r.passed);
            CHECK_FALSE(r.checks.empty());
            for (const auto& c : r.checks) {
                CAPTURE(c.what);
                CHECK(c.passed);
            }
            CHECK(r.transcript.find("PASS " + name) != std::string::npos);
        }
        CHECK(scenarioNames() ==
              std::vector<std::string>{"hcf-bruteforce", "hcf-euclid", "lcm-with-hcf", "lcm-no-hcf", "swiftui-nav"});
    }

    TEST_CASE("scenario transcripts are byte-identical across runs")
    {
        for (const auto& name : scenarioNames()) {
            CHECK(runScenario(name).transcript == runScenario(name).transcript);
        }
    }

    TEST_CASE("unknown scenario")
    {
        try {
            runScenario("fizzbuzz");
            FAIL("expected ScenarioUnknown");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ScenarioUnknown);
            CHECK(e.data()["scenario"] == "fizzbuzz");
            CHECK(e.data()["known"].size() == 5);
        }
    }

    TEST_CASE("a failing expectation stops the scenario")
    {
        Scenario s;
        s.name = "self-check";
        s.script.push_back({"chat/new", [](const ScenarioHistory&) { return json::object(); },
                            {{"is impossible", [](const json&, const ScenarioHistory&) { return std::string("nope"); }}}});
        s.script.push_back({"chat/new", [](const ScenarioHistory&) { return json::object(); }, {}});
        auto r = runScenario(s);
        CHECK_FALSE(r.passed);
        REQUIRE(r.checks.size() == 1);
        CHECK_FALSE(r.checks[0].passed);
        CHECK(r.checks[0].detail == "nope");
        CHECK(r.transcript.find("FAIL 1 is impossible: nope") != std::string::npos);
        CHECK(r.transcript.find("\"id\":2") == std::string::npos);
    }

    TEST_CASE("eval exit codes")
    {
        auto ok = cli({"eval", "--scenario", "hcf-euclid"});
        CHECK(ok.code == ExitOk);
        CHECK(ok.out.find("PASS hcf-euclid") != std::string::npos);
        CHECK(ok.err.find("1/1 scenarios passed") != std::string::npos);

        auto all = cli({"eval", "--all"});
        CHECK(all.code == ExitOk);
        CHECK(all.err.find("5/5 scenarios passed") != std::string::npos);

        CHECK(cli({"eval", "--scenario", "nope"}).code == ExitUsage);
        CHECK(cli({"eval"}).code == ExitUsage);
        CHECK(cli({}).code == ExitUsage);
        CHECK(cli({"frobnicate"}).code == ExitUsage);
    }

    TEST_CASE("replay of the shipped transcripts")
    {
        for (const char* name : {"workspace", "suggest", "chat", "protocol"}) {
            CAPTURE(name);
            auto base = std::string("conformance/") + name;
            auto r = cli({"replay", "--transcript", sourcePath(base + ".transcript.jsonl"), "--golden",
                          sourcePath(base + ".golden.jsonl")});
            CHECK(r.code == ExitOk);
            CHECK(r.out.find("replay ok") != std::string::npos);
        }
    }

    TEST_CASE("replay reports the first divergent frame")
    {
        TempDir dir;
        auto golden = readFrames(sourcePath("conformance/workspace.golden.jsonl"));
        REQUIRE(golden.size() > 3);
        auto broken = golden;
        broken[2] = R"({"id":3,"result":"tampered"})";
        writeFrames(dir.path / "broken.jsonl", broken);
        auto r = cli({"replay", "--transcript", sourcePath("conformance/workspace.transcript.jsonl"), "--golden",
                      (dir.path / "broken.jsonl").string()});
        CHECK(r.code == ExitFailed);
        CHECK(r.err.find("golden mismatch at frame 3") != std::string::npos);
        CHECK(r.err.find("tampered") != std::string::npos);

        auto shorter = golden;
        shorter.pop_back();
        writeFrames(dir.path / "short.jsonl", shorter);
        CHECK(cli({"replay", "--transcript", sourcePath("conformance/workspace.transcript.jsonl"), "--golden",
                   (dir.path / "short.jsonl").string()})
                  .code == ExitFailed);
        CHECK(cli({"replay", "--transcript", (dir.path / "absent.jsonl").string(), "--golden",
                   (dir.path / "short.jsonl").string()})
                  .code == ExitUsage);
    }

    TEST_CASE("compareFrames and normalizeFrame")
    {
        CHECK(normalizeFrame(R"({"b":1,"a":{"createdAt":17}})") == R"({"a":{"createdAt":0},"b":1})");
        CHECK(normalizeFrame("not json") == "not json");
        CHECK_FALSE(compareFrames({R"({"x":1, "y":2})"}, {R"({"y":2,"x":1})"}).has_value());
        auto d = compareFrames({"a", "b"}, {"a"});
        REQUIRE(d.has_value());
        CHECK(d->index == 1);
        CHECK(d->expected.empty());
        CHECK(d->actual == "b");
    }

    TEST_CASE("serve on stdio, recorded, replays against its own golden")
    {
        TempDir dir;
        std::string input;
        input += testing::request(1, "workspace/open", {{"uri", "r.swift"}, {"languageId", "swift"}, {"content", "func gcd("}}) + "\n";
        input += testing::request(2, "suggest/get", {{"uri", "r.swift"}, {"cursor", testing::pos(0, 9)}}) + "\n";
        input += testing::request(3, "suggest/accept", {{"sessionId", "s1"}}) + "\n";
        input += testing::request(4, "workspace/edit", {{"uri", "r.swift"}, {"expectedVersion", 1},
                                                        {"range", testing::range(0, 0, 0, 0)}, {"newText", "// gcd\n"}}) + "\n";
        auto r = cli({"serve", "--transport", "stdio", "--record-dir", dir.path.string()}, input);
        CHECK(r.code == ExitOk);
        std::vector<std::string> lines;
        std::istringstream out(r.out);
        for (std::string line; std::getline(out, line);) lines.push_back(line);
        REQUIRE(lines.size() == 4);
        CHECK(json::parse(lines[3])["result"]["version"] == 2);

        REQUIRE(fs::exists(dir.path / "1.transcript.jsonl"));
        REQUIRE(fs::exists(dir.path / "1.golden.jsonl"));
        CHECK(readFrames(dir.path / "1.golden.jsonl") == lines);
        auto replay = cli({"replay", "--transcript", (dir.path / "1.transcript.jsonl").string(), "--golden",
                           (dir.path / "1.golden.jsonl").string()});
        CHECK(replay.code == ExitOk);
    }

    TEST_CASE("serve failures exit with the usage code")
    {
        testing::MockBroker mb;
        SocketServer holder(*mb.broker, TransportKind::Tcp, 0);
        auto busy = cli({"serve", "--transport", "tcp:" + std::to_string(holder.port())});
        CHECK(busy.code == ExitUsage);
        CHECK(busy.err.find("BindFailed") != std::string::npos);

        TempDir dir;
        {
            std::ofstream bad(dir.path / "bad.toml");
            bad << "[[providers]]\nid = \"x\"\nkind = \"warp\"\n";
        }
        auto cfg = cli({"serve", "--config", (dir.path / "bad.toml").string()});
        CHECK(cfg.code == ExitUsage);
        CHECK(cfg.err.find("line 3") != std::string::npos);
        CHECK(cli({"serve", "--config", (dir.path / "missing.toml").string()}).code == ExitUsage);
        CHECK(cli({"serve", "--transport", "carrier-pigeon"}).code == ExitUsage);
    }
}
