#pragma once

// Shared fixtures and independent oracles for the test binaries. Nothing here
// calls into the code under test for the values it checks against.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "assist/broker.hpp"
#include "assist/config.hpp"
#include "assist/mock_provider.hpp"
#include "assist/wire.hpp"

namespace testing {

using json = nlohmann::json;

/// Byte offset of (line, column) found by walking the text.
inline std::size_t oracleOffset(const std::string& text, std::size_t line, std::size_t column)
{
    std::size_t offset = 0;
    std::size_t seen = 0;
    while (seen < line) {
        if (offset >= text.size()) {
            throw std::out_of_range("line past end");
        }
        if (text[offset] == '\n') {
            ++seen;
        }
        ++offset;
    }
    return offset + column;
}

/// prefix + inserted + suffix.
inline std::string oracleSplice(const std::string& text, std::size_t from, std::size_t to, const std::string& inserted)
{
    std::string out;
    out.append(text, 0, from);
    out += inserted;
    out.append(text, to, std::string::npos);
    return out;
}

/// Random printable text with newlines, sometimes CRLF, sometimes UTF-8.
inline std::string randomText(std::mt19937_64& rng, std::size_t maxLen)
{
    static const std::vector<std::string> atoms{"a", "b", "x", " ", "(", ")", "{", "}", "\n", "\n", "\r\n",
                                                "let ", "\xC3\xA9", "\xE2\x82\xAC", "\t", "42"};
    std::uniform_int_distribution<std::size_t> len(0, maxLen);
    std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
    std::string out;
    auto n = len(rng);
    while (out.size() < n) {
        out += atoms[pick(rng)];
    }
    return out;
}

/// A valid (line, column) in `text`, column counted in bytes and never inside
/// a UTF-8 sequence or between '\r' and '\n'.
inline std::pair<std::size_t, std::size_t> randomPosition(std::mt19937_64& rng, const std::string& text)
{
    std::vector<std::pair<std::size_t, std::size_t>> valid;
    std::size_t line = 0;
    std::size_t column = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        bool continuation = i < text.size() && (static_cast<unsigned char>(text[i]) & 0xC0) == 0x80;
        bool midCrlf = i > 0 && i < text.size() && text[i - 1] == '\r' && text[i] == '\n';
        if (!continuation && !midCrlf) {
            valid.emplace_back(line, column);
        }
        if (i < text.size()) {
            if (text[i] == '\n') {
                ++line;
                column = 0;
            } else {
                ++column;
            }
        }
    }
    std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
    return valid[pick(rng)];
}

inline std::shared_ptr<assist::MockProvider> makeMock(const std::string& id = "mock",
                                                      assist::MockTable table = assist::MockTable::builtin())
{
    assist::ProviderConfig cfg;
    cfg.id = id;
    cfg.kind = assist::ProviderKind::Mock;
    return std::make_shared<assist::MockProvider>(cfg, std::move(table));
}

/// Table whose only completion rule answers every request with `texts`.
inline assist::MockTable fixedCompletions(std::vector<std::string> texts)
{
    assist::MockTable t;
    t.completionRules.push_back({assist::MockCompletionRule::Match::PrefixEndsWith, "", std::move(texts)});
    return t;
}

/// Broker over one injected mock provider, frozen clock, no state dir.
struct MockBroker {
    std::shared_ptr<assist::MockProvider> mock;
    std::unique_ptr<assist::Broker> broker;

    explicit MockBroker(assist::Config cfg = assist::defaultConfig(),
                        std::shared_ptr<assist::MockProvider> provider = makeMock())
        : mock(std::move(provider))
    {
        assist::BrokerHooks hooks;
        hooks.providers = std::vector<std::shared_ptr<assist::Provider>>{mock};
        hooks.clock = [] { return std::int64_t{1000}; };
        broker = std::make_unique<assist::Broker>(cfg, hooks);
    }
};

/// Collects frames written by a Connection and lets tests wait for them.
class FrameLog {
public:
    assist::FrameSink sink()
    {
        return [this](const std::string& f) {
            std::lock_guard lock(mu_);
            frames_.push_back(f);
            cv_.notify_all();
        };
    }

    std::vector<std::string> frames() const
    {
        std::lock_guard lock(mu_);
        return frames_;
    }

    std::vector<json> parsed() const
    {
        std::vector<json> out;
        for (const auto& f : frames()) {
            out.push_back(json::parse(f));
        }
        return out;
    }

    /// Waits until some frame satisfies `pred`; returns it or null on timeout.
    template <typename Pred>
    json waitFor(Pred pred, std::chrono::milliseconds timeout = std::chrono::milliseconds(5000))
    {
        std::unique_lock lock(mu_);
        json found;
        cv_.wait_for(lock, timeout, [&] {
            for (const auto& f : frames_) {
                auto j = json::parse(f, nullptr, false);
                if (!j.is_discarded() && pred(j)) {
                    found = j;
                    return true;
                }
            }
            return false;
        });
        return found;
    }

    json response(std::int64_t id, std::chrono::milliseconds timeout = std::chrono::milliseconds(5000))
    {
        return waitFor([id](const json& j) { return j.contains("id") && j["id"] == id; }, timeout);
    }

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::vector<std::string> frames_;
};

inline std::string request(std::int64_t id, const std::string& method, const json& params)
{
    return json{{"id", id}, {"method", method}, {"params", params}}.dump();
}

inline json pos(std::size_t line, std::size_t column)
{
    return {{"line", line}, {"column", column}};
}

inline json range(std::size_t l1, std::size_t c1, std::size_t l2, std::size_t c2)
{
    return {{"start", pos(l1, c1)}, {"end", pos(l2, c2)}};
}

}  // namespace testing
