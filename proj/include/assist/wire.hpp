#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "assist/broker.hpp"
#include "assist/cancel.hpp"
#include "assist/error.hpp"

namespace assist {

inline constexpr std::string_view kProtocolVersion = "assist-bridge/1";

/// Every method a client may call, in table order.
const std::vector<std::string>& methodTable();

/// Writes one complete frame (no trailing newline). Called with frames in
/// the order they are produced; never concurrently for one connection.
using FrameSink = std::function<void(const std::string& frame)>;

std::string responseFrame(std::int64_t id, const nlohmann::json& result);
/// `id` is null for frames that could not be attributed to a request.
std::string errorFrame(const nlohmann::json& id, ErrorCode code, const std::string& message,
                       const nlohmann::json& data = nullptr);
std::string notificationFrame(std::string_view method, const nlohmann::json& params);

/// What a method handler can reach besides its params.
struct CallContext {
    std::int64_t requestId = 0;
    CancelToken cancel;
    /// Sends a notification on the calling connection.
    std::function<void(std::string_view method, const nlohmann::json& params)> notify;
    /// Weak handle used by work that outlives the request (real-time pushes).
    std::function<std::function<void(std::string_view, const nlohmann::json&)>()> detachedNotifier;
};

/// Runs one method against the broker. Throws Error.
nlohmann::json dispatch(Broker& broker, const std::string& method, const nlohmann::json& params, CallContext& ctx);

/// One client connection: parses inbound frames, runs requests concurrently
/// (serializing those that touch the same document or conversation) and
/// writes exactly one response per accepted request id.
class Connection : public std::enable_shared_from_this<Connection> {
public:
    static std::shared_ptr<Connection> create(Broker& broker, FrameSink sink);
    ~Connection();

    /// Handles one inbound frame. Never throws.
    void receive(std::string_view frame);

    /// Blocks until no request is running.
    void waitIdle();
    /// Cancels running requests, waits for them, then drops further output.
    void close();
    /// Non-blocking close for a peer that went away: cancels running
    /// requests and drops all further output.
    void abandon();

    std::size_t framesSent() const noexcept { return sent_.load(); }

private:
    struct Outbound {
        std::mutex mu;
        FrameSink sink;
        bool open = true;
        std::atomic<std::size_t>* counter = nullptr;
        void send(const std::string& frame);
    };

    struct Lane {
        std::uint64_t nextTicket = 0;
        std::uint64_t serving = 0;
        std::set<std::uint64_t> done;  // finished out of turn (cancelled while queued)
    };

    Connection(Broker& broker, FrameSink sink);

    std::optional<std::string> laneKeyFor(const std::string& method, const nlohmann::json& params) const;
    void start(std::int64_t id, std::string method, nlohmann::json params);
    void run(std::int64_t id, const std::string& method, const nlohmann::json& params, const CancelToken& cancel,
             const std::optional<std::string>& lane, std::uint64_t ticket);
    bool waitTurn(const std::string& lane, std::uint64_t ticket, const CancelToken& cancel);
    void leaveLane(const std::string& lane, std::uint64_t ticket);
    void handleCancel(const nlohmann::json& params, std::optional<std::int64_t> requestId);

    Broker& broker_;
    std::shared_ptr<Outbound> out_;
    std::atomic<std::size_t> sent_{0};

    std::mutex mu_;
    std::condition_variable idleCv_;
    std::int64_t lastId_ = 0;
    std::map<std::int64_t, CancelToken> running_;
    std::map<std::string, Lane> lanes_;
    std::size_t active_ = 0;
    bool closed_ = false;
};

}  // namespace assist
