#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>

#include "assist/broker.hpp"

namespace assist {

/// Largest accepted inbound frame; longer lines close the connection.
inline constexpr std::size_t kMaxFrameBytes = 16 * 1024 * 1024;

/// Observes the frames of one connection, e.g. to record a replayable
/// transcript. Inbound and outbound calls may come from different threads.
class FrameTap {
public:
    virtual ~FrameTap() = default;
    virtual void inbound(std::string_view frame) = 0;
    virtual void outbound(std::string_view frame) = 0;
};

/// Called once per accepted connection; may return null.
using TapFactory = std::function<std::shared_ptr<FrameTap>()>;

/// One connection over newline-delimited streams. Returns after end of
/// input (once every request is answered and pending real-time work has
/// been delivered) or once shutdown is requested.
void serveStreams(Broker& broker, std::istream& in, std::ostream& out, const TapFactory& tap = {});

enum class TransportKind { Stdio, Tcp, WebSocket };

struct TransportSpec {
    TransportKind kind = TransportKind::Stdio;
    std::uint16_t port = 0;
};

/// Parses "stdio", "tcp:PORT" or "ws:PORT"; throws InvalidParams.
TransportSpec parseTransport(const std::string& text);

/// Listener for the socket transports: newline-delimited frames on TCP, one
/// frame per text message on WebSocket. Binds in the constructor.
class SocketServer {
public:
    /// Throws BindFailed when the address is unavailable. Port 0 picks an
    /// ephemeral port.
    SocketServer(Broker& broker, TransportKind kind, std::uint16_t port, const std::string& host = "127.0.0.1",
                 TapFactory tap = {});
    ~SocketServer();

    SocketServer(const SocketServer&) = delete;
    SocketServer& operator=(const SocketServer&) = delete;

    std::uint16_t port() const noexcept;

    /// Serves until stop() or broker shutdown.
    void run();
    /// Thread-safe; makes run() return.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace assist
