#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "assist/cancel.hpp"
#include "assist/comment_syntax.hpp"
#include "assist/context.hpp"
#include "assist/lru_cache.hpp"
#include "assist/providers.hpp"
#include "assist/task_pool.hpp"
#include "assist/workspace.hpp"

namespace assist {

enum class PresentationMode { NearbyTextCursor, FloatingWidget };

std::string_view presentationModeName(PresentationMode mode);
std::optional<PresentationMode> parsePresentationMode(std::string_view name);

enum class SessionState { Presenting, Accepted, Rejected, Invalidated };

std::string_view sessionStateName(SessionState state);

struct Suggestion {
    std::string id;
    Range replaceRange;
    std::string text;
    std::string providerId;
    std::size_t ordinal = 0;

    bool operator==(const Suggestion&) const = default;
};

struct CommentBlock {
    Range insertedRange;

    bool operator==(const CommentBlock&) const = default;
};

struct SuggestionSession {
    std::string sessionId;
    DocumentId documentId;
    std::int64_t boundVersion = 0;
    Position cursor;
    std::vector<Suggestion> suggestions;
    std::size_t activeIndex = 0;
    SessionState state = SessionState::Presenting;
    PresentationMode mode = PresentationMode::NearbyTextCursor;
    std::optional<CommentBlock> commentBlock;
};

/// NearbyTextCursor anchors at the cursor; FloatingWidget at the start of the
/// next line, or end of document on the last line.
Position computeAnchor(const Document& doc, Position cursor, PresentationMode mode);

/// Renders one suggestion as a comment block headed
/// "suggestion <ordinal+1>/<total> from <provider>". Throws
/// UnsupportedCommentSyntax when `syntax` has no comment form.
std::string renderCommentMode(const Suggestion& s, std::size_t total, const CommentSyntax& syntax);

struct SuggestOptions {
    std::chrono::milliseconds debounce{300};
    std::size_t prefetchCapacity = 32;
    int maxResults = 3;
    ContextCaps caps;
    /// Terminal sessions kept for lookups before the oldest are dropped.
    std::size_t retainedSessions = 1024;
    std::size_t fetchThreads = 4;
};

struct AcceptResult {
    Document document;
    Range appliedRange;
    SuggestionSession session;
};

struct RejectResult {
    Document document;
    SuggestionSession session;
};

/// Receives sessions produced by real-time scheduling. Runs on a worker
/// thread; only called for sessions still live at push time.
using RealtimeSink = std::function<void(const SuggestionSession&)>;

/// Suggestion lifecycle: fetch, cycle, accept, reject, real-time debounce and
/// prefetch. Every edit to a document invalidates its presenting sessions.
class SuggestEngine {
public:
    SuggestEngine(Workspace& workspace, const ProviderRegistry& providers, const SyntaxRegistry& syntax,
                  SuggestOptions options = {});
    ~SuggestEngine();

    SuggestEngine(const SuggestEngine&) = delete;
    SuggestEngine& operator=(const SuggestEngine&) = delete;

    SuggestionSession getSuggestions(const DocumentId& uri, Position cursor,
                                     PresentationMode mode = PresentationMode::NearbyTextCursor,
                                     bool commentMode = false, const CancelToken& cancel = {},
                                     std::optional<int> maxResults = std::nullopt);

    SuggestionSession nextSuggestion(const std::string& sessionId);
    SuggestionSession previousSuggestion(const std::string& sessionId);
    AcceptResult acceptSuggestion(const std::string& sessionId);
    RejectResult rejectSuggestion(const std::string& sessionId);

    /// Debounced fetch; a later schedule for the same document supersedes
    /// this one and any edit restarts the quiet period.
    void scheduleRealtime(const DocumentId& uri, std::int64_t version, Position cursor, RealtimeSink sink,
                          PresentationMode mode = PresentationMode::NearbyTextCursor);
    /// Background fetch into the (uri, version, cursor) cache.
    void prefetchSuggestions(const DocumentId& uri, Position cursor);

    SuggestionSession session(const std::string& sessionId) const;
    /// Presenting and bound to the document's current version.
    bool isLive(const std::string& sessionId) const;

    bool isCached(const DocumentId& uri, std::int64_t version, Position cursor) const;
    std::size_t cachedCount() const;

    /// Blocks until no real-time schedule is pending and no background fetch
    /// is running.
    void waitIdle();

    const SuggestOptions& options() const noexcept { return options_; }

private:
    struct RawSuggestion {
        std::string text;
        std::string providerId;
    };
    using RawList = std::vector<RawSuggestion>;
    using CacheKey = std::tuple<std::string, std::int64_t, std::size_t, std::size_t>;

    struct Slot {
        std::mutex op;  // serializes lifecycle operations on one session
        SuggestionSession data;
        bool ownEditPending = false;
    };

    struct PendingRealtime {
        std::int64_t version = 0;
        Position cursor;
        PresentationMode mode = PresentationMode::NearbyTextCursor;
        RealtimeSink sink;
        std::chrono::steady_clock::time_point deadline;
    };

    static CacheKey keyOf(const DocumentId& uri, std::int64_t version, Position cursor);

    RawList fetchFromProviders(const Document& doc, Position cursor, int maxResults, const CancelToken& cancel);
    /// Cache hit, coalesced in-flight prefetch, or a direct fetch.
    RawList fetchOrReuse(const Document& doc, Position cursor, int maxResults, const CancelToken& cancel);
    std::shared_ptr<std::timed_mutex> fetchLock(const DocumentId& uri);

    SuggestionSession buildSession(const Document& doc, Position cursor, PresentationMode mode, const RawList& list);
    std::shared_ptr<Slot> registerSession(SuggestionSession session);
    std::shared_ptr<Slot> slot(const std::string& sessionId) const;
    /// Reads state under mu_, folding in a version change the listener has
    /// not processed yet.
    void requirePresenting(Slot& s, bool staleIsError);
    void onEdit(const DocumentId& uri, std::int64_t newVersion);

    void realtimeLoop();
    void runRealtime(const DocumentId& uri, PendingRealtime job);

    Workspace& workspace_;
    const ProviderRegistry& providers_;
    const SyntaxRegistry& syntax_;
    SuggestOptions options_;

    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::deque<std::string> sessionOrder_;
    std::uint64_t nextSession_ = 1;
    std::map<DocumentId, std::shared_ptr<std::timed_mutex>> fetchLocks_;
    LruCache<CacheKey, RawList> cache_;
    std::map<CacheKey, std::shared_future<RawList>> inflightPrefetch_;

    std::mutex rtMu_;
    std::condition_variable rtCv_;
    std::map<DocumentId, PendingRealtime> pending_;
    struct InflightRealtime {
        std::uint64_t generation = 0;
        CancelToken token;
        PendingRealtime job;  // re-queued when an edit cancels the fetch
    };
    std::map<DocumentId, InflightRealtime> rtInflight_;
    std::uint64_t rtGeneration_ = 0;
    std::size_t rtRunning_ = 0;
    bool stopping_ = false;

    std::size_t listenerToken_ = 0;
    std::thread rtThread_;
    // Declared last: destroyed first, draining jobs while members are alive.
    TaskPool pool_;
};

}  // namespace assist
