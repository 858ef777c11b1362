#pragma once

#include <atomic>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "assist/error.hpp"
#include "assist/providers.hpp"

namespace assist {

struct MockCompletionRule {
    enum class Match {
        /// The prefix ends with `trigger`.
        PrefixEndsWith,
        /// The last non-blank line before the cursor, with comment markers
        /// stripped, equals `trigger`.
        PromptComment,
    };
    Match match = Match::PrefixEndsWith;
    std::string trigger;
    std::vector<std::string> completions;
};

struct MockChatRule {
    /// Exact rules compare against the whole trimmed user message; the others
    /// match when `key` occurs in it, longest key winning.
    bool exact = false;
    std::string key;
    std::string reply;
};

/// The mock's answer book. Purely data, so identical requests always get
/// identical answers.
struct MockTable {
    std::vector<MockCompletionRule> completionRules;
    std::vector<MockChatRule> chatRules;
    /// When no completion rule matches, synthesize hash-derived candidates
    /// instead of returning an empty list.
    bool syntheticFallback = false;
    std::string chatFallback = "I have no scripted answer for that request.";

    /// The shipped table: case-study prompts, the echo rule and a few
    /// completion triggers.
    static MockTable builtin();
};

/// Canned case-study code embodied by the built-in table.
namespace canned {
extern const char* const kHcfBruteForce;
extern const char* const kHcfEuclid;
extern const char* const kLcmWithHcf;
extern const char* const kLcmWithoutHcf;
extern const char* const kSwiftUiNavigation;
extern const char* const kSwiftUiViews;
}  // namespace canned

struct MockCall {
    std::variant<CompletionRequest, ChatRequest> request;
    std::string providerId;
};

/// Deterministic provider that records every call it receives.
class MockProvider final : public Provider {
public:
    explicit MockProvider(ProviderConfig cfg, MockTable table = MockTable::builtin());

    std::vector<Completion> fetchCompletions(const CompletionRequest& req, const CancelToken& cancel) override;
    ChatMessage chatComplete(const ChatRequest& req, const ChunkSink& onChunk, const CancelToken& cancel) override;

    /// Every subsequent call fails with `code` (Timeout, AuthFailed or
    /// ProtocolError); nullopt restores normal behaviour.
    void setFailure(std::optional<ErrorCode> code);
    void setLatency(std::chrono::milliseconds latency);
    void setTable(MockTable table);

    std::vector<MockCall> calls() const;
    std::size_t completionCallCount() const;
    std::size_t chatCallCount() const;
    /// Highest number of completion calls observed running at once.
    std::size_t maxConcurrentCompletions() const { return maxConcurrent_.load(); }
    void clearCalls();

    /// Chunking used for streamed replies; exposed for tests.
    static std::vector<std::string> chunk(std::string_view text);

private:
    void simulateNetwork(const CancelToken& cancel);

    mutable std::mutex mu_;
    MockTable table_;
    std::optional<ErrorCode> failure_;
    std::chrono::milliseconds latency_{0};
    std::vector<MockCall> calls_;
    std::atomic<std::size_t> inFlight_{0};
    std::atomic<std::size_t> maxConcurrent_{0};
};

}  // namespace assist
