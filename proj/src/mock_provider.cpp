#include "assist/mock_provider.hpp"

#include <algorithm>
#include <cstdio>

namespace assist {

namespace canned {

const char* const kHcfBruteForce =
    "func hcf(_ a: Int, _ b: Int) -> Int {\n"
    "    var result = 1\n"
    "    var i = 1\n"
    "    while i <= min(a, b) {\n"
    "        if a % i == 0 && b % i == 0 {\n"
    "            result = i\n"
    "        }\n"
    "        i += 1\n"
    "    }\n"
    "    return result\n"
    "}\n";

const char* const kHcfEuclid =
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

const char* const kLcmWithHcf =
    "func lcm(_ a: Int, _ b: Int) -> Int {\n"
    "    return a / hcf(a, b) * b\n"
    "}\n";

const char* const kLcmWithoutHcf =
    "func lcm(_ a: Int, _ b: Int) -> Int {\n"
    "    let larger = max(a, b)\n"
    "    var multiple = larger\n"
    "    while multiple % a != 0 || multiple % b != 0 {\n"
    "        multiple += larger\n"
    "    }\n"
    "    return multiple\n"
    "}\n";

const char* const kSwiftUiNavigation =
    "import SwiftUI\n"
    "\n"
    "struct ContentView: View {\n"
    "    var body: some View {\n"
    "        NavigationView {\n"
    "            HomeView()\n"
    "                .navigationBarTitle(\"Home\")\n"
    "        }\n"
    "    }\n"
    "}\n";

const char* const kSwiftUiViews =
    "struct HomeView: View {\n"
    "    var body: some View {\n"
    "        VStack(spacing: 20) {\n"
    "            Text(\"Welcome Home\")\n"
    "                .font(.largeTitle)\n"
    "            NavigationLink(destination: DetailsView()) {\n"
    "                Text(\"Show Details\")\n"
    "            }\n"
    "        }\n"
    "    }\n"
    "}\n"
    "\n"
    "struct DetailsView: View {\n"
    "    @Environment(\\.presentationMode) var presentationMode\n"
    "\n"
    "    var body: some View {\n"
    "        VStack(spacing: 20) {\n"
    "            Text(\"Details\")\n"
    "                .font(.largeTitle)\n"
    "            Button(\"Back\") {\n"
    "                presentationMode.wrappedValue.dismiss()\n"
    "            }\n"
    "        }\n"
    "        .navigationBarTitle(\"Details\", displayMode: .inline)\n"
    "    }\n"
    "}\n";

}  // namespace canned

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\n' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

// Last non-blank line of `prefix`, stripped of comment markers.
std::string promptComment(std::string_view prefix)
{
    std::string_view rest = prefix;
    while (!rest.empty()) {
        auto nl = rest.rfind('\n');
        std::string_view line = nl == std::string_view::npos ? rest : rest.substr(nl + 1);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(0, nl);
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        for (std::string_view marker : {"//", "#", "/*", "<!--", "--"}) {
            if (line.starts_with(marker)) {
                line.remove_prefix(marker.size());
                break;
            }
        }
        for (std::string_view marker : {"*/", "-->"}) {
            if (line.ends_with(marker)) {
                line.remove_suffix(marker.size());
                break;
            }
        }
        return std::string(trim(line));
    }
    return {};
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL)
{
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex(std::uint64_t v, int digits)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf + 16 - digits);
}

std::vector<std::string> synthesize(const CompletionRequest& req)
{
    auto h = fnv1a(req.suffix, fnv1a(std::string(1, '\0'), fnv1a(req.prefix, fnv1a(req.languageId))));
    return {
        "value_" + hex(h, 8),
        "call(" + hex(h >> 16, 4) + ")",
        "{\n    step_" + hex(h >> 32, 6) + "()\n}",
    };
}

std::string fenced(std::string_view lead, std::string_view code)
{
    std::string out(lead);
    out += "\n\n```swift\n";
    out += code;
    out += "```\n";
    return out;
}

// The instruction line rendered by the prompt-to-code templates, when present.
std::string_view instructionOf(std::string_view message)
{
    constexpr std::string_view kTag = "Instruction: ";
    auto pos = message.find(kTag);
    if (pos == std::string_view::npos) {
        return message;
    }
    auto line = message.substr(pos + kTag.size());
    return line.substr(0, line.find('\n'));
}

class InFlightGuard {
public:
    InFlightGuard(std::atomic<std::size_t>& counter, std::atomic<std::size_t>& max) : counter_(counter)
    {
        auto now = ++counter_;
        auto seen = max.load();
        while (now > seen && !max.compare_exchange_weak(seen, now)) {
        }
    }
    ~InFlightGuard() { --counter_; }

private:
    std::atomic<std::size_t>& counter_;
};

}  // namespace

MockTable MockTable::builtin()
{
    using Match = MockCompletionRule::Match;
    MockTable t;
    t.completionRules = {
        {Match::PromptComment, "HCF of Two Numbers", {canned::kHcfBruteForce}},
        {Match::PromptComment, "HCF of Two Numbers by Euclidean Algorithm", {canned::kHcfEuclid}},
        {Match::PromptComment, "LCM of Two Numbers", {canned::kLcmWithHcf}},
        {Match::PromptComment, "LCM of Two Numbers without Using the HCF", {canned::kLcmWithoutHcf}},
        {Match::PromptComment, "Create a navigating views app with SwiftUI", {canned::kSwiftUiNavigation}},
        {Match::PromptComment, "Create the HomeView and DetailsView with SwiftUI", {canned::kSwiftUiViews}},
        {Match::PrefixEndsWith,
         "func gcd(",
         {"_ a: Int, _ b: Int) -> Int {\n"
          "    var x = a\n"
          "    var y = b\n"
          "    while y != 0 {\n"
          "        let r = x % y\n"
          "        x = y\n"
          "        y = r\n"
          "    }\n"
          "    return x\n"
          "}\n"}},
        {Match::PrefixEndsWith,
         "func lcm(",
         {"_ a: Int, _ b: Int) -> Int {\n"
          "    let larger = max(a, b)\n"
          "    var multiple = larger\n"
          "    while multiple % a != 0 || multiple % b != 0 {\n"
          "        multiple += larger\n"
          "    }\n"
          "    return multiple\n"
          "}\n"}},
        {Match::PrefixEndsWith, "let x = ", {"42", "0"}},
    };
    t.chatRules = {
        {true, "ping", "pong"},
        {false, "HCF of Two Numbers", fenced("A brute-force search over candidate divisors:", canned::kHcfBruteForce)},
        {false, "HCF of Two Numbers by Euclidean Algorithm",
         fenced("Euclid's algorithm replaces (a, b) with (b, a mod b) until the remainder is zero:",
                canned::kHcfEuclid)},
        {false, "LCM of Two Numbers", fenced("Using the HCF helper you already have:", canned::kLcmWithHcf)},
        {false, "LCM of Two Numbers without Using the HCF",
         fenced("Step through multiples of the larger number until both divide it:", canned::kLcmWithoutHcf)},
        {false, "Create a navigating views app with SwiftUI",
         fenced("The app entry wraps the home screen in a navigation view:", canned::kSwiftUiNavigation)},
        {false, "Create the HomeView and DetailsView with SwiftUI",
         fenced("Two screens linked by a NavigationLink, with a back button on the detail screen:",
                canned::kSwiftUiViews)},
    };
    return t;
}

MockProvider::MockProvider(ProviderConfig cfg, MockTable table) : Provider(std::move(cfg)), table_(std::move(table))
{
    if (config().mockSyntheticFallback) {
        table_.syntheticFallback = true;
    }
    latency_ = std::chrono::milliseconds(config().mockLatencyMs);
}

void MockProvider::simulateNetwork(const CancelToken& cancel)
{
    std::optional<ErrorCode> failure;
    std::chrono::milliseconds latency;
    {
        std::lock_guard lock(mu_);
        failure = failure_;
        latency = latency_;
    }
    credential();
    auto budget = std::chrono::milliseconds(config().timeoutMs);
    if (failure == ErrorCode::Timeout || latency > budget) {
        if (!cancel.sleepFor(std::min(latency, budget))) {
            cancel.throwIfCancelled();
        }
        throw Error(ErrorCode::Timeout, "provider " + id() + " timed out after " +
                                            std::to_string(config().timeoutMs) + " ms",
                    {{"provider", id()}});
    }
    if (latency.count() > 0 && !cancel.sleepFor(latency)) {
        cancel.throwIfCancelled();
    }
    cancel.throwIfCancelled();
    if (failure) {
        throw Error(*failure, "provider " + id() + " failed (" + std::string(errorName(*failure)) + ")",
                    {{"provider", id()}});
    }
}

std::vector<Completion> MockProvider::fetchCompletions(const CompletionRequest& req, const CancelToken& cancel)
{
    validate(req);
    {
        std::lock_guard lock(mu_);
        calls_.push_back({req, id()});
    }
    InFlightGuard guard(inFlight_, maxConcurrent_);
    simulateNetwork(cancel);

    std::vector<std::string> texts;
    bool matched = false;
    {
        std::lock_guard lock(mu_);
        auto comment = promptComment(req.prefix);
        for (const auto& rule : table_.completionRules) {
            bool hit = rule.match == MockCompletionRule::Match::PrefixEndsWith
                           ? std::string_view(req.prefix).ends_with(rule.trigger)
                           : comment == rule.trigger;
            if (hit) {
                texts = rule.completions;
                matched = true;
                break;
            }
        }
        if (!matched && table_.syntheticFallback) {
            texts = synthesize(req);
        }
    }
    if (texts.size() > static_cast<std::size_t>(req.maxResults)) {
        texts.resize(static_cast<std::size_t>(req.maxResults));
    }
    std::vector<Completion> out;
    out.reserve(texts.size());
    for (auto& t : texts) {
        out.push_back({std::move(t), ReplaceHint::AtCursor});
    }
    return out;
}

ChatMessage MockProvider::chatComplete(const ChatRequest& req, const ChunkSink& onChunk, const CancelToken& cancel)
{
    validate(req);
    {
        std::lock_guard lock(mu_);
        calls_.push_back({req, id()});
    }
    simulateNetwork(cancel);

    std::string_view lastUser;
    for (const auto& m : req.messages) {
        if (m.role == ChatRole::User) {
            lastUser = m.content;
        }
    }
    std::string reply;
    {
        std::lock_guard lock(mu_);
        reply = table_.chatFallback;
        auto message = trim(lastUser);
        auto instruction = trim(instructionOf(message));
        const MockChatRule* best = nullptr;
        for (const auto& rule : table_.chatRules) {
            if (rule.exact && message == rule.key) {
                best = &rule;
                break;
            }
            if (!rule.exact && instruction.find(rule.key) != std::string_view::npos &&
                (best == nullptr || rule.key.size() > best->key.size())) {
                best = &rule;
            }
        }
        if (best != nullptr) {
            reply = best->reply;
        }
    }
    for (const auto& piece : chunk(reply)) {
        cancel.throwIfCancelled();
        if (onChunk) {
            onChunk(piece);
        }
    }
    return {ChatRole::Assistant, reply};
}

std::vector<std::string> MockProvider::chunk(std::string_view text)
{
    constexpr std::size_t kChunk = 16;
    std::vector<std::string> out;
    while (text.size() > kChunk) {
        std::size_t cut = kChunk;
        while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) {
            --cut;
        }
        out.emplace_back(text.substr(0, cut));
        text.remove_prefix(cut);
    }
    out.emplace_back(text);
    return out;
}

void MockProvider::setFailure(std::optional<ErrorCode> code)
{
    std::lock_guard lock(mu_);
    failure_ = code;
}

void MockProvider::setLatency(std::chrono::milliseconds latency)
{
    std::lock_guard lock(mu_);
    latency_ = latency;
}

void MockProvider::setTable(MockTable table)
{
    std::lock_guard lock(mu_);
    table_ = std::move(table);
}

std::vector<MockCall> MockProvider::calls() const
{
    std::lock_guard lock(mu_);
    return calls_;
}

std::size_t MockProvider::completionCallCount() const
{
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(calls_.begin(), calls_.end(), [](const MockCall& c) {
        return std::holds_alternative<CompletionRequest>(c.request);
    }));
}

std::size_t MockProvider::chatCallCount() const
{
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(calls_.begin(), calls_.end(), [](const MockCall& c) {
        return std::holds_alternative<ChatRequest>(c.request);
    }));
}

void MockProvider::clearCalls()
{
    std::lock_guard lock(mu_);
    calls_.clear();
}

}  // namespace assist
