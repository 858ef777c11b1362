#include "assist/suggest.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "assist/error.hpp"

namespace assist {

namespace {

Position clampToDocument(const Document& doc, Position p)
{
    std::size_t lines = doc.lineCount();
    if (p.line >= lines) {
        return doc.endPosition();
    }
    p.column = std::min(p.column, doc.lineLength(p.line));
    return p;
}

void requireValid(const Document& doc, Position p)
{
    if (!doc.isValid(p)) {
        throw Error(ErrorCode::InvalidPosition, "cursor outside document",
                    {{"line", p.line}, {"column", p.column}});
    }
}

}  // namespace

std::string_view presentationModeName(PresentationMode mode)
{
    return mode == PresentationMode::NearbyTextCursor ? "nearbyTextCursor" : "floatingWidget";
}

std::optional<PresentationMode> parsePresentationMode(std::string_view name)
{
    if (name == "nearbyTextCursor") return PresentationMode::NearbyTextCursor;
    if (name == "floatingWidget") return PresentationMode::FloatingWidget;
    return std::nullopt;
}

std::string_view sessionStateName(SessionState state)
{
    switch (state) {
    case SessionState::Presenting: return "presenting";
    case SessionState::Accepted: return "accepted";
    case SessionState::Rejected: return "rejected";
    case SessionState::Invalidated: return "invalidated";
    }
    return "invalidated";
}

Position computeAnchor(const Document& doc, Position cursor, PresentationMode mode)
{
    requireValid(doc, cursor);
    if (mode == PresentationMode::NearbyTextCursor) {
        return cursor;
    }
    if (cursor.line + 1 < doc.lineCount()) {
        return {cursor.line + 1, 0};
    }
    return doc.endPosition();
}

std::string renderCommentMode(const Suggestion& s, std::size_t total, const CommentSyntax& syntax)
{
    if (!syntax.supported()) {
        throw Error(ErrorCode::UnsupportedCommentSyntax,
                    "comment mode is not available for language '" + syntax.languageId + "'",
                    {{"languageId", syntax.languageId}});
    }
    std::string header =
        "suggestion " + std::to_string(s.ordinal + 1) + "/" + std::to_string(total) + " from " + s.providerId;
    std::vector<std::string_view> lines;
    if (!s.text.empty()) {
        std::string_view rest = s.text;
        for (;;) {
            auto nl = rest.find('\n');
            lines.push_back(rest.substr(0, nl));
            if (nl == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(nl + 1);
        }
    }

    std::string out;
    if (syntax.linePrefix) {
        const std::string lead = *syntax.linePrefix + " ";
        out = lead + header;
        for (auto line : lines) {
            out += '\n';
            out += lead;
            out += line;
        }
        return out;
    }
    out = syntax.block->first + "\n" + header;
    for (auto line : lines) {
        out += '\n';
        out += line;
    }
    out += '\n';
    out += syntax.block->second;
    return out;
}

SuggestEngine::SuggestEngine(Workspace& workspace, const ProviderRegistry& providers, const SyntaxRegistry& syntax,
                             SuggestOptions options)
    : workspace_(workspace),
      providers_(providers),
      syntax_(syntax),
      options_(options),
      cache_(options.prefetchCapacity),
      pool_(options.fetchThreads)
{
    listenerToken_ = workspace_.addListener(
        [this](const DocumentId& uri, std::int64_t version) { onEdit(uri, version); });
    rtThread_ = std::thread([this] { realtimeLoop(); });
}

SuggestEngine::~SuggestEngine()
{
    workspace_.removeListener(listenerToken_);
    {
        std::lock_guard lock(rtMu_);
        stopping_ = true;
        for (auto& [_, inflight] : rtInflight_) {
            inflight.token.cancel();
        }
    }
    rtCv_.notify_all();
    rtThread_.join();
    pool_.waitIdle();
}

SuggestEngine::CacheKey SuggestEngine::keyOf(const DocumentId& uri, std::int64_t version, Position cursor)
{
    return {uri.str(), version, cursor.line, cursor.column};
}

std::shared_ptr<std::timed_mutex> SuggestEngine::fetchLock(const DocumentId& uri)
{
    std::lock_guard lock(mu_);
    auto& m = fetchLocks_[uri];
    if (!m) {
        m = std::make_shared<std::timed_mutex>();
    }
    return m;
}

SuggestEngine::RawList SuggestEngine::fetchFromProviders(const Document& doc, Position cursor, int maxResults,
                                                         const CancelToken& cancel)
{
    auto ctx = assembleContext(doc, cursor, std::nullopt, options_.caps);
    CompletionRequest req{ctx.prefix, ctx.suffix, ctx.languageId, ctx.relativePath, maxResults, doc.version};
    validate(req);

    auto providers = providers_.completionProviders();
    if (providers.empty()) {
        throw Error(ErrorCode::AllProvidersFailed, "no completion provider is configured",
                    {{"failures", nlohmann::json::array()}});
    }

    // One provider round per document at a time.
    auto lock = fetchLock(doc.id);
    while (!lock->try_lock_for(std::chrono::milliseconds(20))) {
        cancel.throwIfCancelled();
    }
    std::lock_guard held(*lock, std::adopt_lock);

    RawList out;
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& provider : providers) {
        cancel.throwIfCancelled();
        try {
            for (auto& c : provider->fetchCompletions(req, cancel)) {
                out.push_back({std::move(c.text), provider->id()});
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Cancelled) {
                throw;
            }
            spdlog::warn("provider {} failed: {}", provider->id(), e.what());
            failures.push_back({{"provider", provider->id()}, {"kind", errorName(e.code())}, {"message", e.what()}});
        }
    }
    if (failures.size() == providers.size()) {
        throw Error(ErrorCode::AllProvidersFailed, "every completion provider failed", {{"failures", failures}});
    }
    return out;
}

SuggestEngine::RawList SuggestEngine::fetchOrReuse(const Document& doc, Position cursor, int maxResults,
                                                   const CancelToken& cancel)
{
    auto key = keyOf(doc.id, doc.version, cursor);
    std::optional<std::shared_future<RawList>> pending;
    {
        std::lock_guard lock(mu_);
        if (auto hit = cache_.get(key)) {
            if (hit->size() > static_cast<std::size_t>(maxResults)) {
                hit->resize(static_cast<std::size_t>(maxResults));
            }
            return *hit;
        }
        if (auto it = inflightPrefetch_.find(key); it != inflightPrefetch_.end()) {
            pending = it->second;
        }
    }
    if (pending) {
        while (pending->wait_for(std::chrono::milliseconds(10)) != std::future_status::ready) {
            cancel.throwIfCancelled();
        }
        try {
            auto list = pending->get();
            if (list.size() > static_cast<std::size_t>(maxResults)) {
                list.resize(static_cast<std::size_t>(maxResults));
            }
            return list;
        } catch (const Error&) {
            // The prefetch failed; fall through to a fetch of our own.
        }
    }
    return fetchFromProviders(doc, cursor, maxResults, cancel);
}

SuggestionSession SuggestEngine::buildSession(const Document& doc, Position cursor, PresentationMode mode,
                                              const RawList& list)
{
    SuggestionSession s;
    {
        std::lock_guard lock(mu_);
        s.sessionId = "s" + std::to_string(nextSession_++);
    }
    s.documentId = doc.id;
    s.boundVersion = doc.version;
    s.cursor = cursor;
    s.mode = mode;
    for (std::size_t i = 0; i < list.size(); ++i) {
        s.suggestions.push_back(
            {s.sessionId + "." + std::to_string(i), Range{cursor, cursor}, list[i].text, list[i].providerId, i});
    }
    return s;
}

std::shared_ptr<SuggestEngine::Slot> SuggestEngine::registerSession(SuggestionSession session)
{
    auto slot = std::make_shared<Slot>();
    slot->data = std::move(session);
    std::lock_guard lock(mu_);
    sessions_.emplace(slot->data.sessionId, slot);
    sessionOrder_.push_back(slot->data.sessionId);
    // Drop the oldest finished sessions once over the retention budget.
    if (sessions_.size() > options_.retainedSessions) {
        for (auto it = sessionOrder_.begin(); it != sessionOrder_.end() && sessions_.size() > options_.retainedSessions;) {
            auto found = sessions_.find(*it);
            if (found == sessions_.end()) {
                it = sessionOrder_.erase(it);
            } else if (found->second->data.state != SessionState::Presenting) {
                sessions_.erase(found);
                it = sessionOrder_.erase(it);
            } else {
                ++it;
            }
        }
    }
    return slot;
}

std::shared_ptr<SuggestEngine::Slot> SuggestEngine::slot(const std::string& sessionId) const
{
    std::lock_guard lock(mu_);
    auto it = sessions_.find(sessionId);
    if (it == sessions_.end()) {
        throw Error(ErrorCode::SessionNotFound, "unknown session " + sessionId, {{"sessionId", sessionId}});
    }
    return it->second;
}

SuggestionSession SuggestEngine::getSuggestions(const DocumentId& uri, Position cursor, PresentationMode mode,
                                                bool commentMode, const CancelToken& cancel,
                                                std::optional<int> maxResults)
{
    auto doc = workspace_.snapshot(uri);
    requireValid(doc, cursor);
    std::optional<CommentSyntax> syntax;
    if (commentMode) {
        syntax = syntax_.lookup(doc.languageId);
        if (!syntax->supported()) {
            throw Error(ErrorCode::UnsupportedCommentSyntax,
                        "comment mode is not available for language '" + doc.languageId + "'",
                        {{"languageId", doc.languageId}});
        }
    }

    auto list = fetchOrReuse(doc, cursor, maxResults.value_or(options_.maxResults), cancel);
    cancel.throwIfCancelled();
    auto session = buildSession(doc, cursor, mode, list);
    auto slot = registerSession(session);

    bool insertBlock = commentMode && !session.suggestions.empty();
    if (insertBlock) {
        std::string block;
        for (const auto& s : session.suggestions) {
            if (!block.empty()) {
                block += '\n';
            }
            block += renderCommentMode(s, session.suggestions.size(), *syntax);
        }
        Position at;
        std::string text;
        if (cursor.line + 1 < doc.lineCount()) {
            at = {cursor.line + 1, 0};
            text = block + "\n";
        } else {
            at = doc.endPosition();
            text = "\n" + block;
        }
        {
            std::lock_guard lock(mu_);
            slot->ownEditPending = true;
        }
        Document updated;
        try {
            updated = workspace_.applyEdit(uri, doc.version, Range{at, at}, text);
        } catch (const Error& e) {
            std::lock_guard lock(mu_);
            slot->ownEditPending = false;
            slot->data.state = SessionState::Invalidated;
            if (e.code() == ErrorCode::VersionMismatch) {
                throw Error(ErrorCode::StaleSession, "document changed while suggestions were fetched",
                            e.data());
            }
            throw;
        }
        std::size_t start = resolveOffset(updated, at);
        std::lock_guard lock(mu_);
        slot->ownEditPending = false;
        slot->data.boundVersion = updated.version;
        slot->data.commentBlock = CommentBlock{Range{at, positionAt(updated, start + text.size())}};
    }

    // An edit racing the fetch leaves this session stale from birth.
    std::int64_t current = workspace_.isOpen(uri) ? workspace_.version(uri) : -1;
    std::lock_guard lock(mu_);
    if (slot->data.state == SessionState::Presenting && current != slot->data.boundVersion) {
        slot->data.state = SessionState::Invalidated;
    }
    if (slot->data.state == SessionState::Invalidated && !slot->data.commentBlock) {
        throw Error(ErrorCode::StaleSession, "document changed while suggestions were fetched",
                    {{"sessionId", slot->data.sessionId}});
    }
    return slot->data;
}

void SuggestEngine::requirePresenting(Slot& s, bool staleIsError)
{
    std::int64_t current = -1;
    try {
        current = workspace_.version(s.data.documentId);
    } catch (const Error&) {
    }
    std::lock_guard lock(mu_);
    if (s.data.state == SessionState::Presenting && current != s.data.boundVersion) {
        s.data.state = SessionState::Invalidated;
    }
    if (s.data.state == SessionState::Invalidated && staleIsError) {
        throw Error(ErrorCode::StaleSession, "document changed since the suggestions were fetched",
                    {{"sessionId", s.data.sessionId}, {"boundVersion", s.data.boundVersion}, {"actual", current}});
    }
    if (s.data.state != SessionState::Presenting) {
        throw Error(ErrorCode::SessionNotPresenting,
                    "session " + s.data.sessionId + " is " + std::string(sessionStateName(s.data.state)),
                    {{"sessionId", s.data.sessionId}, {"state", sessionStateName(s.data.state)}});
    }
}

SuggestionSession SuggestEngine::nextSuggestion(const std::string& sessionId)
{
    auto s = slot(sessionId);
    std::lock_guard op(s->op);
    requirePresenting(*s, false);
    std::lock_guard lock(mu_);
    auto n = s->data.suggestions.size();
    if (n == 0) {
        throw Error(ErrorCode::EmptySession, "session has no suggestions", {{"sessionId", sessionId}});
    }
    s->data.activeIndex = (s->data.activeIndex + 1) % n;
    return s->data;
}

SuggestionSession SuggestEngine::previousSuggestion(const std::string& sessionId)
{
    auto s = slot(sessionId);
    std::lock_guard op(s->op);
    requirePresenting(*s, false);
    std::lock_guard lock(mu_);
    auto n = s->data.suggestions.size();
    if (n == 0) {
        throw Error(ErrorCode::EmptySession, "session has no suggestions", {{"sessionId", sessionId}});
    }
    s->data.activeIndex = (s->data.activeIndex + n - 1) % n;
    return s->data;
}

AcceptResult SuggestEngine::acceptSuggestion(const std::string& sessionId)
{
    auto s = slot(sessionId);
    std::lock_guard op(s->op);
    requirePresenting(*s, true);

    SuggestionSession data;
    {
        std::lock_guard lock(mu_);
        if (s->data.suggestions.empty()) {
            throw Error(ErrorCode::EmptySession, "session has no suggestions", {{"sessionId", sessionId}});
        }
        s->ownEditPending = true;
        data = s->data;
    }
    const auto& active = data.suggestions[data.activeIndex];
    std::vector<TextEdit> edits{{active.replaceRange, active.text}};
    if (data.commentBlock) {
        edits.push_back({data.commentBlock->insertedRange, ""});
    }

    Document doc;
    try {
        doc = workspace_.applyEdits(data.documentId, data.boundVersion, edits);
    } catch (const Error& e) {
        std::lock_guard lock(mu_);
        s->ownEditPending = false;
        if (e.code() == ErrorCode::VersionMismatch || e.code() == ErrorCode::NotOpen) {
            s->data.state = SessionState::Invalidated;
            throw Error(ErrorCode::StaleSession, "document changed since the suggestions were fetched", e.data());
        }
        throw;
    }
    // Text before the replaced range is untouched, so its start offset carries over.
    std::size_t start = resolveOffset(doc, active.replaceRange.start);
    Range applied{active.replaceRange.start, positionAt(doc, start + active.text.size())};

    std::lock_guard lock(mu_);
    s->ownEditPending = false;
    s->data.state = SessionState::Accepted;
    return {std::move(doc), applied, s->data};
}

RejectResult SuggestEngine::rejectSuggestion(const std::string& sessionId)
{
    auto s = slot(sessionId);
    std::lock_guard op(s->op);
    requirePresenting(*s, false);

    SuggestionSession data;
    {
        std::lock_guard lock(mu_);
        s->ownEditPending = true;
        data = s->data;
    }
    Document doc;
    try {
        if (data.commentBlock) {
            doc = workspace_.applyEdit(data.documentId, data.boundVersion, data.commentBlock->insertedRange, "");
        } else {
            doc = workspace_.snapshot(data.documentId);
        }
    } catch (const Error& e) {
        std::lock_guard lock(mu_);
        s->ownEditPending = false;
        if (e.code() == ErrorCode::VersionMismatch) {
            s->data.state = SessionState::Invalidated;
            throw Error(ErrorCode::StaleSession, "document changed since the suggestions were fetched", e.data());
        }
        throw;
    }
    std::lock_guard lock(mu_);
    s->ownEditPending = false;
    s->data.state = SessionState::Rejected;
    return {std::move(doc), s->data};
}

void SuggestEngine::onEdit(const DocumentId& uri, std::int64_t newVersion)
{
    {
        std::lock_guard lock(mu_);
        for (auto& [_, s] : sessions_) {
            auto& d = s->data;
            if (d.documentId == uri && d.state == SessionState::Presenting && !s->ownEditPending &&
                d.boundVersion < newVersion) {
                d.state = SessionState::Invalidated;
            }
        }
    }
    std::lock_guard lock(rtMu_);
    auto deadline = std::chrono::steady_clock::now() + options_.debounce;
    if (auto it = pending_.find(uri); it != pending_.end()) {
        it->second.deadline = deadline;
    }
    if (auto it = rtInflight_.find(uri); it != rtInflight_.end() && !it->second.token.cancelled()) {
        // The running fetch is stale; retry once the edits quiet down.
        it->second.token.cancel();
        if (!pending_.contains(uri) && !stopping_) {
            auto job = it->second.job;
            job.deadline = deadline;
            pending_.emplace(uri, std::move(job));
        }
    }
    rtCv_.notify_all();
}

void SuggestEngine::scheduleRealtime(const DocumentId& uri, std::int64_t version, Position cursor, RealtimeSink sink,
                                     PresentationMode mode)
{
    if (!workspace_.isOpen(uri)) {
        throw Error(ErrorCode::NotOpen, "document not open: " + uri.str(), {{"uri", uri.str()}});
    }
    std::lock_guard lock(rtMu_);
    pending_.insert_or_assign(
        uri, PendingRealtime{version, cursor, mode, std::move(sink), std::chrono::steady_clock::now() + options_.debounce});
    if (auto it = rtInflight_.find(uri); it != rtInflight_.end()) {
        it->second.token.cancel();
    }
    rtCv_.notify_all();
}

void SuggestEngine::realtimeLoop()
{
    std::unique_lock lock(rtMu_);
    while (!stopping_) {
        if (pending_.empty()) {
            rtCv_.wait(lock);
            continue;
        }
        auto now = std::chrono::steady_clock::now();
        auto earliest = std::chrono::steady_clock::time_point::max();
        for (auto it = pending_.begin(); it != pending_.end();) {
            if (it->second.deadline <= now) {
                auto uri = it->first;
                auto job = std::move(it->second);
                it = pending_.erase(it);
                ++rtRunning_;
                pool_.post([this, uri, job = std::move(job)]() mutable {
                    runRealtime(uri, std::move(job));
                    std::lock_guard done(rtMu_);
                    --rtRunning_;
                    rtCv_.notify_all();
                });
            } else {
                earliest = std::min(earliest, it->second.deadline);
                ++it;
            }
        }
        if (earliest != std::chrono::steady_clock::time_point::max()) {
            rtCv_.wait_until(lock, earliest);
        }
    }
}

void SuggestEngine::runRealtime(const DocumentId& uri, PendingRealtime job)
{
    CancelToken token;
    std::uint64_t generation = 0;
    {
        std::lock_guard lock(rtMu_);
        if (stopping_) {
            return;
        }
        if (auto it = rtInflight_.find(uri); it != rtInflight_.end()) {
            it->second.token.cancel();
        }
        generation = ++rtGeneration_;
        rtInflight_.insert_or_assign(uri, InflightRealtime{generation, token, job});
    }
    try {
        auto doc = workspace_.snapshot(uri);
        auto cursor = clampToDocument(doc, job.cursor);
        auto list = fetchOrReuse(doc, cursor, options_.maxResults, token);
        token.throwIfCancelled();
        auto session = buildSession(doc, cursor, job.mode, list);
        auto slot = registerSession(session);
        if (isLive(session.sessionId)) {
            job.sink(session);
        } else {
            std::lock_guard lock(mu_);
            if (slot->data.state == SessionState::Presenting) {
                slot->data.state = SessionState::Invalidated;
            }
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Cancelled) {
            spdlog::debug("real-time fetch for {} dropped: {}", uri.str(), e.what());
        }
    }
    std::lock_guard lock(rtMu_);
    if (auto it = rtInflight_.find(uri); it != rtInflight_.end() && it->second.generation == generation) {
        rtInflight_.erase(it);
    }
}

void SuggestEngine::prefetchSuggestions(const DocumentId& uri, Position cursor)
{
    auto doc = workspace_.snapshot(uri);
    requireValid(doc, cursor);
    auto key = keyOf(uri, doc.version, cursor);
    auto promise = std::make_shared<std::promise<RawList>>();
    {
        std::lock_guard lock(mu_);
        if (cache_.contains(key) || inflightPrefetch_.contains(key)) {
            return;
        }
        inflightPrefetch_.emplace(key, promise->get_future().share());
    }
    pool_.post([this, doc = std::move(doc), cursor, key, promise] {
        try {
            auto list = fetchFromProviders(doc, cursor, options_.maxResults, CancelToken{});
            std::lock_guard lock(mu_);
            cache_.put(key, list);
            inflightPrefetch_.erase(key);
            promise->set_value(std::move(list));
        } catch (...) {
            {
                std::lock_guard lock(mu_);
                inflightPrefetch_.erase(key);
            }
            promise->set_exception(std::current_exception());
        }
    });
}

SuggestionSession SuggestEngine::session(const std::string& sessionId) const
{
    auto s = slot(sessionId);
    std::lock_guard lock(mu_);
    return s->data;
}

bool SuggestEngine::isLive(const std::string& sessionId) const
{
    std::shared_ptr<Slot> s;
    try {
        s = slot(sessionId);
    } catch (const Error&) {
        return false;
    }
    SuggestionSession data;
    {
        std::lock_guard lock(mu_);
        data = s->data;
    }
    if (data.state != SessionState::Presenting) {
        return false;
    }
    try {
        return workspace_.version(data.documentId) == data.boundVersion;
    } catch (const Error&) {
        return false;
    }
}

bool SuggestEngine::isCached(const DocumentId& uri, std::int64_t version, Position cursor) const
{
    std::lock_guard lock(mu_);
    return cache_.contains(keyOf(uri, version, cursor));
}

std::size_t SuggestEngine::cachedCount() const
{
    std::lock_guard lock(mu_);
    return cache_.size();
}

void SuggestEngine::waitIdle()
{
    for (;;) {
        {
            std::unique_lock lock(rtMu_);
            rtCv_.wait(lock, [this] { return pending_.empty() || stopping_; });
        }
        pool_.waitIdle();
        std::lock_guard lock(rtMu_);
        if (pending_.empty() && rtRunning_ == 0) {
            return;
        }
    }
}

}  // namespace assist
