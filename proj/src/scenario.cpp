#include "assist/scenario.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "assist/broker.hpp"
#include "assist/config.hpp"
#include "assist/error.hpp"
#include "assist/swift_subset.hpp"
#include "assist/wire.hpp"

namespace assist {

namespace {

using json = nlohmann::json;

constexpr const char* kHcfPrompt = "HCF of Two Numbers";
constexpr const char* kHcfEuclidPrompt = "HCF of Two Numbers by Euclidean Algorithm";
constexpr const char* kLcmPrompt = "LCM of Two Numbers";
constexpr const char* kLcmNoHcfPrompt = "LCM of Two Numbers without Using the HCF";
constexpr const char* kNavPrompt = "Create a navigating views app with SwiftUI";
constexpr const char* kViewsPrompt = "Create the HomeView and DetailsView with SwiftUI";

constexpr int kOracleRange = 50;
constexpr int kDualityRange = 200;

const json& resultOf(const json& response)
{
    if (response.contains("error")) {
        throw std::runtime_error("error response " + response["error"].dump());
    }
    if (!response.contains("result")) {
        throw std::runtime_error("no result in " + response.dump());
    }
    return response["result"];
}

json pos(int line, int column)
{
    return {{"line", line}, {"column", column}};
}

json emptyRange(const json& at)
{
    return {{"start", at}, {"end", at}};
}

json endOf(const std::string& content)
{
    auto nl = content.rfind('\n');
    int lines = static_cast<int>(std::count(content.begin(), content.end(), '\n'));
    auto column = nl == std::string::npos ? content.size() : content.size() - nl - 1;
    return pos(lines, static_cast<int>(column));
}

// Byte offset of a line/column pair, computed without the workspace code.
std::size_t offsetIn(const std::string& content, const json& p)
{
    auto line = p.at("line").get<std::size_t>();
    auto column = p.at("column").get<std::size_t>();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < line; ++l) {
        auto nl = content.find('\n', offset);
        if (nl == std::string::npos) {
            throw std::runtime_error("line out of range in splice oracle");
        }
        offset = nl + 1;
    }
    return offset + column;
}

std::string spliced(const std::string& content, const json& range, const std::string& text)
{
    auto a = offsetIn(content, range.at("start"));
    auto b = offsetIn(content, range.at("end"));
    return content.substr(0, a) + text + content.substr(b);
}

std::string documentText(const json& response)
{
    const auto& r = resultOf(response);
    if (r.contains("document")) {
        return r["document"]["content"].get<std::string>();
    }
    return r.at("content").get<std::string>();
}

std::int64_t documentVersion(const json& response)
{
    const auto& r = resultOf(response);
    return r.contains("document") ? r["document"]["version"].get<std::int64_t>() : r.at("version").get<std::int64_t>();
}

std::string expectVersion(const json& response, std::int64_t version)
{
    auto got = documentVersion(response);
    return got == version ? "" : "version " + std::to_string(got) + ", expected " + std::to_string(version);
}

std::string expectContains(const std::string& text, std::initializer_list<std::string_view> needles)
{
    for (auto n : needles) {
        if (text.find(n) == std::string::npos) {
            return "missing '" + std::string(n) + "'";
        }
    }
    return "";
}

std::string pairLabel(int a, int b)
{
    return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

// The applied function `name` agrees with `oracle` on every pair in 1..n.
template <typename Oracle>
std::string agreesWithOracle(const std::string& source, const std::string& name, Oracle oracle, int n)
{
    SwiftSubset program(source);
    if (!program.hasFunction(name)) {
        return "document defines no function " + name;
    }
    for (int a = 1; a <= n; ++a) {
        for (int b = 1; b <= n; ++b) {
            auto got = program.call(name, {a, b});
            auto want = oracle(a, b);
            if (got != want) {
                return name + pairLabel(a, b) + " = " + std::to_string(got) + ", oracle says " + std::to_string(want);
            }
        }
    }
    return "";
}

std::string oracleDuality(int n)
{
    for (int a = 1; a <= n; ++a) {
        for (int b = 1; b <= n; ++b) {
            if (gcdOracle(a, b) * lcmOracle(a, b) != static_cast<std::int64_t>(a) * b) {
                return "gcd * lcm != a * b at " + pairLabel(a, b);
            }
        }
    }
    return "";
}

// hcf(a, b) * lcm(a, b) == a * b, taking each side from the document when it
// defines it and from the oracle otherwise.
std::string appliedDuality(const std::string& source, int n)
{
    SwiftSubset program(source);
    for (int a = 1; a <= n; ++a) {
        for (int b = 1; b <= n; ++b) {
            auto g = program.hasFunction("hcf") ? program.call("hcf", {a, b}) : gcdOracle(a, b);
            auto l = program.hasFunction("lcm") ? program.call("lcm", {a, b}) : lcmOracle(a, b);
            if (g * l != static_cast<std::int64_t>(a) * b) {
                return "hcf * lcm != a * b at " + pairLabel(a, b);
            }
        }
    }
    return "";
}

std::string bracesBalanced(const std::string& text)
{
    int depth = 0;
    for (char c : text) {
        depth += c == '{' ? 1 : c == '}' ? -1 : 0;
        if (depth < 0) {
            return "unbalanced '}'";
        }
    }
    return depth == 0 ? "" : "unclosed '{'";
}

ScenarioStep openStep(std::string uri, std::string content)
{
    return {"workspace/open",
            [uri, content](const ScenarioHistory&) {
                return json{{"uri", uri}, {"languageId", "swift"}, {"content", content}};
            },
            {{"document opens at version 0", [](const json& r, const ScenarioHistory&) { return expectVersion(r, 0); }}}};
}

ScenarioStep promptStep(std::string uri, std::size_t docStep, std::string instruction, std::int64_t version)
{
    return {"chat/promptToCode",
            [uri, docStep, instruction](const ScenarioHistory& h) {
                auto at = endOf(documentText(h[docStep]));
                return json{{"uri", uri}, {"range", emptyRange(at)}, {"instruction", instruction}};
            },
            {{"patch has one edit bound to version " + std::to_string(version),
              [version](const json& r, const ScenarioHistory&) -> std::string {
                  const auto& p = resultOf(r);
                  if (p.at("baseVersion").get<std::int64_t>() != version) return "wrong base version";
                  if (p.at("edits").size() != 1) return "expected exactly one edit";
                  return "";
              }}}};
}

// Applies the patch returned by `patchStep`; checks the result against the
// splice oracle over the document returned by `docStep`.
ScenarioStep applyStep(std::string uri, std::size_t patchStep, std::size_t docStep, std::int64_t version,
                       std::vector<ScenarioExpectation> more)
{
    std::vector<ScenarioExpectation> checks{
        {"patch applies as version " + std::to_string(version),
         [version](const json& r, const ScenarioHistory&) { return expectVersion(r, version); }},
        {"document equals the splice oracle",
         [patchStep, docStep](const json& r, const ScenarioHistory& h) -> std::string {
             const auto& edit = resultOf(h[patchStep])["edits"][0];
             auto want = spliced(documentText(h[docStep]), edit["range"], edit["newText"].get<std::string>());
             return documentText(r) == want ? "" : "document differs from the splice oracle";
         }},
    };
    checks.insert(checks.end(), more.begin(), more.end());
    return {"chat/applyPatch",
            [uri, patchStep](const ScenarioHistory& h) {
                return json{{"uri", uri}, {"patch", resultOf(h[patchStep])}};
            },
            std::move(checks)};
}

ScenarioStep suggestStep(std::string uri, std::size_t docStep, std::string mustContain)
{
    return {"suggest/get",
            [uri, docStep](const ScenarioHistory& h) {
                return json{{"uri", uri}, {"cursor", endOf(documentText(h[docStep]))}};
            },
            {{"session presents a suggestion containing '" + mustContain + "'",
              [mustContain](const json& r, const ScenarioHistory&) -> std::string {
                  const auto& s = resultOf(r);
                  if (s.at("state") != "presenting") return "state is " + s.at("state").dump();
                  if (s.at("suggestions").empty()) return "no suggestions";
                  auto text = s["suggestions"][0]["text"].get<std::string>();
                  return text.find(mustContain) == std::string::npos ? "first suggestion lacks it" : "";
              }}}};
}

ScenarioStep acceptStep(std::size_t sessionStep, std::size_t docStep, std::int64_t version,
                        std::vector<ScenarioExpectation> more)
{
    std::vector<ScenarioExpectation> checks{
        {"accept applies as version " + std::to_string(version),
         [version](const json& r, const ScenarioHistory&) { return expectVersion(r, version); }},
        {"document equals the splice oracle",
         [sessionStep, docStep](const json& r, const ScenarioHistory& h) -> std::string {
             const auto& s = resultOf(h[sessionStep]);
             const auto& active = s["suggestions"][s["activeIndex"].get<std::size_t>()];
             auto want = spliced(documentText(h[docStep]), active["replaceRange"], active["text"].get<std::string>());
             return documentText(r) == want ? "" : "document differs from the splice oracle";
         }},
    };
    checks.insert(checks.end(), more.begin(), more.end());
    return {"suggest/accept",
            [sessionStep](const ScenarioHistory& h) {
                return json{{"sessionId", resultOf(h[sessionStep])["sessionId"]}};
            },
            std::move(checks)};
}

ScenarioExpectation matchesGcd()
{
    return {"hcf matches gcdOracle on all pairs 1.." + std::to_string(kOracleRange),
            [](const json& r, const ScenarioHistory&) {
                return agreesWithOracle(documentText(r), "hcf", gcdOracle, kOracleRange);
            }};
}

ScenarioExpectation matchesLcm()
{
    return {"lcm matches lcmOracle on all pairs 1.." + std::to_string(kOracleRange),
            [](const json& r, const ScenarioHistory&) {
                return agreesWithOracle(documentText(r), "lcm", lcmOracle, kOracleRange);
            }};
}

ScenarioExpectation dualityApplied()
{
    return {"hcf * lcm == a * b on all pairs 1.." + std::to_string(kOracleRange),
            [](const json& r, const ScenarioHistory&) { return appliedDuality(documentText(r), kOracleRange); }};
}

ScenarioExpectation dualityOracles()
{
    return {"gcdOracle * lcmOracle == a * b on all pairs 1.." + std::to_string(kDualityRange),
            [](const json&, const ScenarioHistory&) { return oracleDuality(kDualityRange); }};
}

Scenario hcfBruteForce()
{
    const std::string uri = "file:///cases/hcf.swift";
    return {"hcf-bruteforce",
            {kHcfPrompt},
            {openStep(uri, std::string("// ") + kHcfPrompt + "\n"),
             suggestStep(uri, 0, "func hcf("),
             acceptStep(1, 0, 1, {matchesGcd()})}};
}

Scenario hcfEuclid()
{
    const std::string uri = "file:///cases/hcf_euclid.swift";
    return {"hcf-euclid",
            {kHcfEuclidPrompt},
            {openStep(uri, std::string("import Foundation\n\n// ") + kHcfEuclidPrompt + "\n"),
             promptStep(uri, 0, kHcfEuclidPrompt, 0),
             applyStep(uri, 1, 0, 1,
                       {{"applied code is a remainder loop",
                         [](const json& r, const ScenarioHistory&) {
                             return expectContains(documentText(r), {"while ", " % "});
                         }},
                        matchesGcd(),
                        dualityOracles()})}};
}

Scenario lcmWithHcf()
{
    const std::string uri = "file:///cases/lcm.swift";
    std::string helper =
        "func hcf(_ a: Int, _ b: Int) -> Int {\n"
        "    var x = a\n"
        "    var y = b\n"
        "    while y != 0 {\n"
        "        let r = x % y\n"
        "        x = y\n"
        "        y = r\n"
        "    }\n"
        "    return x\n"
        "}\n";
    return {"lcm-with-hcf",
            {kLcmPrompt},
            {openStep(uri, helper + "\n// " + kLcmPrompt + "\n"),
             suggestStep(uri, 0, "func lcm("),
             acceptStep(1, 0, 1,
                        {matchesLcm(),
                         {"lcm builds on hcf",
                          [](const json& r, const ScenarioHistory&) -> std::string {
                              auto called = SwiftSubset(documentText(r)).calledNames("lcm");
                              return called.contains("hcf") ? "" : "lcm does not call hcf";
                          }},
                         dualityApplied()})}};
}

Scenario lcmNoHcf()
{
    const std::string uri = "file:///cases/lcm_no_hcf.swift";
    return {"lcm-no-hcf",
            {kLcmNoHcfPrompt},
            {openStep(uri, std::string("// ") + kLcmNoHcfPrompt + "\n"),
             promptStep(uri, 0, kLcmNoHcfPrompt, 0),
             applyStep(uri, 1, 0, 1,
                       {matchesLcm(),
                        {"lcm calls neither hcf nor gcd",
                         [](const json& r, const ScenarioHistory&) -> std::string {
                             auto text = documentText(r);
                             auto called = SwiftSubset(text).calledNames("lcm");
                             for (const char* name : {"hcf", "gcd"}) {
                                 if (called.contains(name) || text.find(std::string(name) + "(") != std::string::npos) {
                                     return std::string("found a call to ") + name;
                                 }
                             }
                             return "";
                         }},
                        dualityApplied(),
                        dualityOracles()})}};
}

Scenario swiftUiNav()
{
    const std::string uri = "file:///cases/ContentView.swift";
    ScenarioStep separate{"workspace/edit",
                          [uri](const ScenarioHistory& h) {
                              auto at = endOf(documentText(h[2]));
                              return json{{"uri", uri},
                                          {"expectedVersion", documentVersion(h[2])},
                                          {"range", emptyRange(at)},
                                          {"newText", "\n\n"}};
                          },
                          {{"separator edit lands as version 2",
                            [](const json& r, const ScenarioHistory&) { return expectVersion(r, 2); }}}};
    return {"swiftui-nav",
            {kNavPrompt, kViewsPrompt},
            {openStep(uri, ""),
             promptStep(uri, 0, kNavPrompt, 0),
             applyStep(uri, 1, 0, 1,
                       {{"navigation container present",
                         [](const json& r, const ScenarioHistory&) {
                             return expectContains(documentText(r), {"NavigationView", "HomeView()"});
                         }}}),
             separate,
             promptStep(uri, 3, kViewsPrompt, 2),
             applyStep(uri, 4, 3, 3,
                       {{"both views are declared",
                         [](const json& r, const ScenarioHistory&) {
                             return expectContains(documentText(r), {"struct HomeView: View", "struct DetailsView: View"});
                         }},
                        {"home links to details",
                         [](const json& r, const ScenarioHistory&) {
                             return expectContains(documentText(r), {"NavigationLink(destination: DetailsView())"});
                         }},
                        {"braces are balanced",
                         [](const json& r, const ScenarioHistory&) { return bracesBalanced(documentText(r)); }}})}};
}

}  // namespace

const std::vector<Scenario>& scenarios()
{
    static const std::vector<Scenario> all{hcfBruteForce(), hcfEuclid(), lcmWithHcf(), lcmNoHcf(), swiftUiNav()};
    return all;
}

std::vector<std::string> scenarioNames()
{
    std::vector<std::string> out;
    for (const auto& s : scenarios()) {
        out.push_back(s.name);
    }
    return out;
}

ScenarioResult runScenario(const std::string& name)
{
    for (const auto& s : scenarios()) {
        if (s.name == name) {
            return runScenario(s);
        }
    }
    throw Error(ErrorCode::ScenarioUnknown, "unknown scenario '" + name + "'",
                {{"scenario", name}, {"known", scenarioNames()}});
}

ScenarioResult runScenario(const Scenario& scenario)
{
    BrokerHooks hooks;
    hooks.clock = [] { return std::int64_t{0}; };
    hooks.fetchThreads = 2;
    Broker broker(defaultConfig(), hooks);

    std::mutex mu;
    std::vector<std::string> frames;
    auto conn = Connection::create(broker, [&](const std::string& frame) {
        std::lock_guard lock(mu);
        frames.push_back(frame);
    });

    ScenarioResult result;
    result.name = scenario.name;
    std::ostringstream log;
    log << "scenario " << scenario.name << '\n';
    ScenarioHistory history;
    std::size_t consumed = 0;
    bool aborted = false;

    for (std::size_t i = 0; i < scenario.script.size() && !aborted; ++i) {
        const auto& step = scenario.script[i];
        const auto id = static_cast<std::int64_t>(i + 1);
        json params;
        try {
            params = step.params(history);
        } catch (const std::exception& e) {
            result.checks.push_back({i + 1, "build " + step.method + " request", false, e.what()});
            log << "FAIL " << (i + 1) << " build " << step.method << " request: " << e.what() << '\n';
            break;
        }
        auto request = json{{"id", id}, {"method", step.method}, {"params", params}}.dump();
        log << ">> " << request << '\n';
        conn->receive(request);
        conn->waitIdle();
        broker.suggest().waitIdle();

        json response;
        {
            std::lock_guard lock(mu);
            for (; consumed < frames.size(); ++consumed) {
                log << "<< " << frames[consumed] << '\n';
                auto j = json::parse(frames[consumed], nullptr, false);
                if (j.is_object() && j.contains("id") && j["id"] == id) {
                    response = j;
                }
            }
        }
        history.push_back(response);
        if (response.is_null()) {
            result.checks.push_back({i + 1, step.method + " is answered", false, "no response"});
            log << "FAIL " << (i + 1) << ' ' << step.method << " is answered: no response\n";
            break;
        }
        for (const auto& e : step.expectations) {
            std::string detail;
            try {
                detail = e.check(response, history);
            } catch (const std::exception& ex) {
                detail = ex.what();
            }
            bool ok = detail.empty();
            result.checks.push_back({i + 1, e.what, ok, detail});
            log << (ok ? "ok   " : "FAIL ") << (i + 1) << ' ' << e.what;
            if (!ok) {
                log << ": " << detail;
                aborted = true;
            }
            log << '\n';
        }
    }
    conn->close();

    result.passed = !result.checks.empty() &&
                    std::all_of(result.checks.begin(), result.checks.end(), [](const auto& c) { return c.passed; });
    log << (result.passed ? "PASS " : "FAIL ") << scenario.name << '\n';
    result.transcript = log.str();
    return result;
}

}  // namespace assist
