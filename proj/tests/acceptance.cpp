// Acceptance run: one PASS/FAIL line per headline criterion, exit status 1
// if any fails. Values are checked against the oracles in support.hpp and
// against the Swift interpreter, never against the code being exercised.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "assist/cli.hpp"
#include "assist/error.hpp"
#include "assist/replay.hpp"
#include "assist/suggest.hpp"
#include "assist/swift_subset.hpp"
#include "assist/wire.hpp"
#include "support.hpp"

using namespace assist;
using namespace std::chrono_literals;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Thrown by `expect`; the message becomes the FAIL detail.
struct CriterionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what)
{
    if (!ok) {
        throw CriterionFailed(what);
    }
}

using Clock = std::chrono::steady_clock;

double msSince(Clock::time_point t)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

struct Rig {
    Workspace ws;
    std::shared_ptr<MockProvider> mock;
    ProviderRegistry providers;
    SyntaxRegistry syntax;
    std::unique_ptr<SuggestEngine> engine;

    Rig(MockTable table, std::chrono::milliseconds debounce = 50ms)
        : mock(testing::makeMock("mock", std::move(table))),
          providers(std::vector<std::shared_ptr<Provider>>{mock})
    {
        SuggestOptions o;
        o.debounce = debounce;
        o.maxResults = 10;
        engine = std::make_unique<SuggestEngine>(ws, providers, syntax, o);
    }
    ~Rig() { engine.reset(); }

    DocumentId open(const std::string& uri, const std::string& content, const std::string& lang = "plaintext")
    {
        auto id = ws.makeId(uri);
        ws.openDocument(id, lang, content);
        return id;
    }
};

// --- open, get, cycle, accept flow -------------------------------------

std::string suggestFlow()
{
    fs::path dir = fs::path(ASSIST_SOURCE_DIR) / "tests" / "golden";
    auto inbound = readFrames(dir / "suggest-flow.transcript.jsonl");
    auto golden = readFrames(dir / "suggest-flow.golden.jsonl");

    auto started = Clock::now();
    auto actual = runTranscript(defaultConfig(), inbound);
    double elapsed = msSince(started);

    expect(actual.size() == golden.size(), "frame count " + std::to_string(actual.size()) + " != golden " +
                                               std::to_string(golden.size()));
    for (std::size_t i = 0; i < golden.size(); ++i) {
        expect(actual[i] == golden[i], "frame " + std::to_string(i + 1) + " differs from the golden bytes");
    }
    expect(elapsed < 1000.0, "took " + std::to_string(elapsed) + " ms");

    // Final document against the splice oracle: the edited text with the
    // pushed suggestion inserted at the session cursor.
    json edited;
    json pushed;
    json accepted;
    for (const auto& f : actual) {
        auto j = json::parse(f);
        if (j.value("id", json()) == 2) edited = j["result"];
        if (j.value("method", "") == "suggest/realtimeReady") pushed = j["params"];
        if (j.value("id", json()) == 4) accepted = j["result"];
    }
    expect(!edited.is_null() && !pushed.is_null() && !accepted.is_null(), "missing edit, push or accept frame");
    auto before = edited["content"].get<std::string>();
    auto at = testing::oracleOffset(before, pushed["cursor"]["line"], pushed["cursor"]["column"]);
    auto text = pushed["suggestions"][0]["text"].get<std::string>();
    auto expected = testing::oracleSplice(before, at, at, text);
    expect(accepted["document"]["content"] == expected, "final document differs from the splice oracle");
    expect(accepted["document"]["version"] == 2, "final version is not 2");

    std::ostringstream os;
    os << golden.size() << " frames byte-identical, final document = splice oracle, " << static_cast<int>(elapsed)
       << " ms";
    return os.str();
}

// --- command suite --------------------------------------------------------

std::string commandSuite()
{
    std::mt19937_64 rng(2024);

    // Cycle group over random sizes.
    for (int iter = 0; iter < 100; ++iter) {
        std::size_t n = 1 + rng() % 10;
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < n; ++i) texts.push_back("c" + std::to_string(i));
        Rig rig(testing::fixedCompletions(texts));
        auto id = rig.open("cyc.txt", "x");
        auto s = rig.engine->getSuggestions(id, {0, 1});
        for (std::size_t k = rng() % n; k > 0; --k) rig.engine->nextSuggestion(s.sessionId);
        auto origin = rig.engine->session(s.sessionId).activeIndex;
        for (std::size_t i = 0; i < n; ++i) rig.engine->nextSuggestion(s.sessionId);
        expect(rig.engine->session(s.sessionId).activeIndex == origin, "n nexts is not the identity");
        rig.engine->nextSuggestion(s.sessionId);
        expect(rig.engine->previousSuggestion(s.sessionId).activeIndex == origin, "previous after next is not identity");
    }

    // Accept splice, 1000 random cases.
    Rig splice(testing::fixedCompletions({}));
    for (int iter = 0; iter < 1000; ++iter) {
        auto content = testing::randomText(rng, 80);
        auto text = testing::randomText(rng, 24);
        auto [line, col] = testing::randomPosition(rng, content);
        splice.mock->setTable(testing::fixedCompletions({text}));
        auto id = splice.open("acc" + std::to_string(iter), content);
        auto s = splice.engine->getSuggestions(id, {line, col});
        auto r = splice.engine->acceptSuggestion(s.sessionId);
        auto at = testing::oracleOffset(content, line, col);
        expect(r.document.content == testing::oracleSplice(content, at, at, text),
               "accept differs from the splice oracle in case " + std::to_string(iter));
    }

    // Comment-mode reject restores the exact bytes.
    Rig reject(testing::fixedCompletions({}));
    const char* langs[] = {"swift", "python", "html", "rust", "yaml"};
    for (int iter = 0; iter < 500; ++iter) {
        auto content = testing::randomText(rng, 80);
        reject.mock->setTable(testing::fixedCompletions({testing::randomText(rng, 20), testing::randomText(rng, 20)}));
        auto [line, col] = testing::randomPosition(rng, content);
        auto id = reject.open("rej" + std::to_string(iter), content, langs[iter % 5]);
        auto s = reject.engine->getSuggestions(id, {line, col}, PresentationMode::NearbyTextCursor, true);
        expect(reject.ws.snapshot(id).content != content, "comment block was not inserted");
        auto r = reject.engine->rejectSuggestion(s.sessionId);
        expect(r.document.content == content, "reject did not restore the bytes in case " + std::to_string(iter));
    }

    // Staleness: random interleavings of edits between get and accept.
    Rig stale(testing::fixedCompletions({"S"}));
    auto sid = stale.open("stale.txt", "seed");
    int refused = 0;
    int appliedAtMismatch = 0;
    for (int iter = 0; iter < 500; ++iter) {
        auto s = stale.engine->getSuggestions(sid, {0, 0});
        int edits = static_cast<int>(rng() % 3);
        for (int k = 0; k < edits; ++k) stale.ws.applyEdit(sid, stale.ws.version(sid), {{0, 0}, {0, 0}}, "e");
        auto versionBefore = stale.ws.version(sid);
        try {
            stale.engine->acceptSuggestion(s.sessionId);
            if (versionBefore != s.boundVersion) ++appliedAtMismatch;
        } catch (const Error& e) {
            expect(e.code() == ErrorCode::StaleSession, "unexpected error " + std::string(errorName(e.code())));
            expect(stale.ws.version(sid) == versionBefore, "a refused accept changed the document");
            ++refused;
        }
    }
    expect(appliedAtMismatch == 0, std::to_string(appliedAtMismatch) + " applications at a mismatched version");
    expect(refused > 0, "no interleaving produced a stale session");

    return "cycle group x100, accept splice x1000, comment reject x500, 0 stale applications in 500 interleavings (" +
           std::to_string(refused) + " refused)";
}

// --- debounce and prefetch ------------------------------------------------

std::string debounceAndPrefetch()
{
    constexpr int kBurst = 12;
    Rig rt(testing::fixedCompletions({"A"}), 200ms);
    auto id = rt.open("burst.txt", "");
    for (int k = 0; k < kBurst; ++k) {
        auto v = rt.ws.version(id);
        auto col = static_cast<std::size_t>(k);
        rt.ws.applyEdit(id, v, {{0, col}, {0, col}}, "x");
        rt.engine->scheduleRealtime(id, v + 1, {0, col + 1}, [](const SuggestionSession&) {});
        std::this_thread::sleep_for(5ms);
    }
    rt.engine->waitIdle();
    auto burstCalls = rt.mock->completionCallCount();
    expect(burstCalls == 1, std::to_string(burstCalls) + " provider calls for a burst of " + std::to_string(kBurst));

    Rig pf(testing::fixedCompletions({"A"}));
    auto pid = pf.open("pf.txt", "let x = ");
    pf.engine->prefetchSuggestions(pid, {0, 8});
    pf.engine->waitIdle();
    pf.engine->getSuggestions(pid, {0, 8});
    expect(pf.mock->completionCallCount() == 1, "prefetch then get made " +
                                                    std::to_string(pf.mock->completionCallCount()) + " calls");

    Rig lru(testing::fixedCompletions({"A"}));
    auto lid = lru.open("lru.txt", std::string(40, ' '));
    for (std::size_t k = 0; k < 33; ++k) {
        lru.engine->prefetchSuggestions(lid, {0, k});
        lru.engine->waitIdle();
    }
    expect(!lru.engine->isCached(lid, 0, {0, 0}), "first key survived the 33rd insertion");
    expect(lru.engine->cachedCount() == 32, "cache holds " + std::to_string(lru.engine->cachedCount()) + " entries");
    lru.mock->clearCalls();
    lru.engine->getSuggestions(lid, {0, 0});
    expect(lru.mock->completionCallCount() == 1, "evicted key did not refetch");

    return "burst of " + std::to_string(kBurst) + " edits -> 1 call, prefetch+get -> 1 call, key 1 evicted at 33";
}

// --- case-study scenarios -------------------------------------------------

std::string scenariosAll()
{
    const char* argv[] = {"assist-bridge", "eval", "--all"};
    std::istringstream in;
    std::ostringstream out;
    std::ostringstream err;
    auto started = Clock::now();
    int code = runCli(3, argv, CliStreams{in, out, err, {}});
    double elapsed = msSince(started);
    expect(code == ExitOk, "eval --all exited " + std::to_string(code) + ":\n" + out.str());
    expect(elapsed < 5000.0, "took " + std::to_string(elapsed) + " ms");
    auto transcript = out.str();
    for (const char* needle :
         {"PASS hcf-euclid", "PASS lcm-no-hcf", "PASS swiftui-nav", "PASS hcf-bruteforce", "PASS lcm-with-hcf"}) {
        expect(transcript.find(needle) != std::string::npos, std::string("missing ") + needle);
    }
    // The duality identity itself, independent of any generated code.
    for (std::int64_t a = 1; a <= 200; ++a) {
        for (std::int64_t b = 1; b <= 200; ++b) {
            expect(gcdOracle(a, b) * lcmOracle(a, b) == a * b, "duality fails at " + std::to_string(a) + "," +
                                                                    std::to_string(b));
        }
    }
    std::size_t oks = 0;
    for (std::size_t p = transcript.find("\nok "); p != std::string::npos; p = transcript.find("\nok ", p + 1)) ++oks;
    return "5/5 scenarios, " + std::to_string(oks) + " checks, " + std::to_string(static_cast<int>(elapsed)) + " ms";
}

// --- comment-mode refusal -------------------------------------------------

std::string commentRefusal()
{
    SyntaxRegistry reg;
    Suggestion s{"s1.0", {}, "1", "mock", 0};
    try {
        renderCommentMode(s, 1, reg.lookup("json"));
        expect(false, "renderCommentMode accepted json");
    } catch (const Error& e) {
        expect(e.code() == ErrorCode::UnsupportedCommentSyntax, "render raised " + std::string(errorName(e.code())));
    }

    testing::MockBroker mb;
    testing::FrameLog log;
    auto conn = Connection::create(*mb.broker, log.sink());
    const std::string content = "{\n  \"a\": \n}\n";
    conn->receive(testing::request(1, "workspace/open",
                                   {{"uri", "cfg.json"}, {"languageId", "json"}, {"content", content}}));
    log.response(1);
    conn->receive(testing::request(2, "suggest/get", {{"uri", "cfg.json"}, {"cursor", testing::pos(1, 7)},
                                                      {"commentMode", true}}));
    auto r = log.response(2);
    conn->close();
    expect(r.contains("error"), "wire returned a result");
    expect(r["error"]["code"] == static_cast<int>(ErrorCode::UnsupportedCommentSyntax),
           "wire error code " + r["error"]["code"].dump());
    expect(r["error"].contains("data") && r["error"]["data"]["languageId"] == "json", "error data lacks languageId");
    auto doc = mb.broker->workspace().snapshot(mb.broker->workspace().makeId("cfg.json"));
    expect(doc.content == content && doc.version == 0, "the document was mutated");
    return "render -> UnsupportedCommentSyntax, wire -> error " + r["error"]["code"].dump() + ", document untouched";
}

// --- protocol robustness --------------------------------------------------

std::string protocolFuzz()
{
    constexpr int kFrames = 10000;
    std::mt19937_64 rng(7);
    testing::MockBroker mb;
    testing::FrameLog log;
    auto conn = Connection::create(*mb.broker, log.sink());

    std::int64_t nextId = 1;
    std::vector<std::int64_t> validIds;
    std::size_t unparseable = 0;
    std::size_t docs = 0;
    std::vector<std::string> templates;

    auto validFrame = [&]() -> std::string {
        std::int64_t id = nextId++;
        validIds.push_back(id);
        std::string uri = "f" + std::to_string(rng() % std::max<std::size_t>(docs, 1)) + ".txt";
        json params;
        std::string method;
        switch (rng() % 9) {
        case 0:
            method = "workspace/open";
            params = {{"uri", "f" + std::to_string(docs++) + ".txt"}, {"languageId", "plaintext"}, {"content", "ab\ncd"}};
            break;
        case 1:
            method = "workspace/edit";
            params = {{"uri", uri}, {"expectedVersion", rng() % 3}, {"range", testing::range(0, 0, 0, rng() % 4)},
                      {"newText", "z"}};
            break;
        case 2:
            method = "suggest/get";
            params = {{"uri", uri}, {"cursor", testing::pos(rng() % 3, rng() % 3)}};
            break;
        case 3:
            method = "suggest/next";
            params = {{"sessionId", "s" + std::to_string(rng() % 50)}};
            break;
        case 4:
            method = "chat/new";
            params = json::object();
            break;
        case 5:
            method = "chat/send";
            params = {{"conversationId", "c" + std::to_string(1 + rng() % 5)}, {"text", "ping"}};
            break;
        case 6:
            method = "suggest/anchor";
            params = {{"uri", uri}, {"cursor", testing::pos(0, 1)}, {"mode", "floatingWidget"}};
            break;
        case 7:
            method = "no/such";
            params = json::object();
            break;
        default:
            method = "suggest/reject";
            params = {{"sessionId", "s" + std::to_string(rng() % 50)}};
        }
        auto frame = testing::request(id, method, params);
        if (templates.size() < 64) templates.push_back(json::parse(frame).dump());
        return frame;
    };

    auto mutated = [&]() -> std::string {
        // A copy of a valid frame without its id, then byte-level damage.
        json base = json::parse(templates[rng() % templates.size()]);
        base.erase("id");
        std::string s = base.dump();
        int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits && !s.empty(); ++e) {
            std::size_t at = rng() % s.size();
            switch (rng() % 4) {
            case 0: s.erase(at, 1); break;
            case 1: s.insert(at, 1, static_cast<char>(rng() % 256)); break;
            case 2: s[at] = static_cast<char>(rng() % 256); break;
            default: s.resize(at);
            }
        }
        return s;
    };

    auto randomBytes = [&]() -> std::string {
        std::string s(rng() % 64, '\0');
        for (auto& c : s) c = static_cast<char>(rng() % 256);
        return s;
    };

    std::size_t otherAnswered = 0;  // parseable non-requests that still need an answer
    for (int i = 0; i < kFrames; ++i) {
        std::string frame;
        auto pick = rng() % 10;
        bool isValid = pick < 5 || templates.empty();
        if (isValid) {
            frame = validFrame();
        } else if (pick < 8) {
            frame = mutated();
        } else {
            frame = randomBytes();
        }
        if (!isValid) {
            std::string_view view(frame);
            if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
            auto parsed = json::parse(view.begin(), view.end(), nullptr, false);
            if (parsed.is_discarded()) {
                ++unparseable;
            } else if (!parsed.is_object()) {
                ++otherAnswered;
            } else if (parsed.contains("id")) {
                // Damage produced something with an id; not part of the count.
                continue;
            }
        }
        conn->receive(frame);
        if (i % 250 == 249) conn->waitIdle();
    }
    conn->waitIdle();
    mb.broker->suggest().waitIdle();
    conn->close();

    std::map<std::int64_t, int> answers;
    std::size_t parseErrors = 0;
    std::size_t nullOther = 0;
    for (const auto& f : log.frames()) {
        auto j = json::parse(f);
        if (!j.contains("id")) continue;
        if (j["id"].is_number_integer()) {
            ++answers[j["id"].get<std::int64_t>()];
        } else if (j["error"]["code"] == -32700) {
            ++parseErrors;
        } else {
            ++nullOther;
        }
    }
    for (auto id : validIds) {
        expect(answers[id] == 1, "id " + std::to_string(id) + " answered " + std::to_string(answers[id]) + " times");
    }
    expect(answers.size() == validIds.size(), "answers for ids that were never sent");
    expect(parseErrors == unparseable, std::to_string(parseErrors) + " parse errors for " +
                                           std::to_string(unparseable) + " malformed frames");
    expect(nullOther == otherAnswered, "unexpected id-less answers");
    return std::to_string(kFrames) + " frames: " + std::to_string(validIds.size()) + " valid ids answered once, " +
           std::to_string(unparseable) + " malformed -> -32700, no crash";
}

}  // namespace

int main()
{
    spdlog::set_level(spdlog::level::off);
    struct Criterion {
        const char* name;
        std::function<std::string()> run;
    };
    const std::vector<Criterion> criteria{
        {"golden-suggest-flow", suggestFlow},
        {"command-suite-properties", commandSuite},
        {"debounce-prefetch-lru", debounceAndPrefetch},
        {"case-study-scenarios", scenariosAll},
        {"comment-mode-refusal", commentRefusal},
        {"protocol-robustness-fuzz", protocolFuzz},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            detail = c.run();
            ok = true;
        } catch (const CriterionFailed& e) {
            detail = e.what();
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << (ok ? "PASS " : "FAIL ") << c.name << ": " << detail << std::endl;
        failed += ok ? 0 : 1;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " acceptance criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
