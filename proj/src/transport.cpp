#include "assist/transport.hpp"

#include <deque>
#include <istream>
#include <ostream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "assist/error.hpp"
#include "assist/wire.hpp"

namespace assist {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = net::ip::tcp;

namespace {

/// Empty lines between frames are tolerated on line-delimited transports.
bool isBlank(std::string_view line)
{
    return line.empty() || line == "\r";
}

}  // namespace

void serveStreams(Broker& broker, std::istream& in, std::ostream& out, const TapFactory& tap)
{
    std::shared_ptr<FrameTap> recorder = tap ? tap() : nullptr;
    std::mutex outMu;
    auto conn = Connection::create(broker, [&out, &outMu, recorder](const std::string& frame) {
        std::lock_guard lock(outMu);
        if (recorder) {
            recorder->outbound(frame);
        }
        out << frame << '\n';
        out.flush();
    });

    struct Shared {
        std::mutex mu;
        std::condition_variable cv;
        bool eof = false;
    };
    auto shared = std::make_shared<Shared>();
    // The reader may stay blocked on input after a shutdown request; it only
    // touches state kept alive by `shared` and `conn`.
    std::thread reader([&in, conn, shared, recorder] {
        std::string line;
        while (std::getline(in, line)) {
            if (line.size() > kMaxFrameBytes) {
                conn->receive("");
                continue;
            }
            if (isBlank(line)) {
                continue;
            }
            if (recorder) {
                recorder->inbound(line);
            }
            conn->receive(line);
        }
        std::lock_guard lock(shared->mu);
        shared->eof = true;
        shared->cv.notify_all();
    });

    bool eof = false;
    {
        std::unique_lock lock(shared->mu);
        while (!shared->eof && !broker.shutdownRequested()) {
            shared->cv.wait_for(lock, std::chrono::milliseconds(20));
        }
        eof = shared->eof;
    }
    if (eof) {
        reader.join();
        conn->waitIdle();
        broker.suggest().waitIdle();
        conn->waitIdle();
    } else {
        reader.detach();
    }
    conn->close();
}

TransportSpec parseTransport(const std::string& text)
{
    if (text == "stdio") {
        return {TransportKind::Stdio, 0};
    }
    auto colon = text.find(':');
    if (colon != std::string::npos) {
        auto scheme = text.substr(0, colon);
        auto portText = text.substr(colon + 1);
        TransportKind kind;
        if (scheme == "tcp") {
            kind = TransportKind::Tcp;
        } else if (scheme == "ws") {
            kind = TransportKind::WebSocket;
        } else {
            kind = TransportKind::Stdio;
        }
        bool digits = !portText.empty() && portText.size() <= 5 &&
                      std::all_of(portText.begin(), portText.end(), [](char c) { return c >= '0' && c <= '9'; });
        if (kind != TransportKind::Stdio && digits) {
            auto port = std::stoul(portText);
            if (port <= 65535) {
                return {kind, static_cast<std::uint16_t>(port)};
            }
        }
    }
    throw Error(ErrorCode::InvalidParams, "transport must be stdio, tcp:PORT or ws:PORT, got '" + text + "'",
                {{"transport", text}});
}

namespace {

/// Queued writer shared by both socket session kinds; runs on the io thread.
template <typename Derived>
class SessionBase : public std::enable_shared_from_this<Derived> {
public:
    SessionBase(Broker& broker, std::shared_ptr<FrameTap> tap) : broker_(broker), tap_(std::move(tap)) {}

    std::shared_ptr<Connection> attach(net::any_io_executor ex)
    {
        executor_ = ex;
        std::weak_ptr<Derived> weak = this->shared_from_this();
        conn_ = Connection::create(broker_, [weak, tap = tap_](const std::string& frame) {
            if (tap) {
                tap->outbound(frame);
            }
            if (auto self = weak.lock()) {
                self->enqueue(frame);
            }
        });
        return conn_;
    }

    void deliver(const std::string& frame)
    {
        if (tap_) {
            tap_->inbound(frame);
        }
        conn_->receive(frame);
    }

    void enqueue(std::string frame)
    {
        net::post(executor_, [self = this->shared_from_this(), frame = std::move(frame)]() mutable {
            if (self->dead_) {
                return;
            }
            self->queue_.push_back(std::move(frame));
            if (self->queue_.size() == 1) {
                self->derived().writeFront();
            }
        });
    }

protected:
    Derived& derived() { return static_cast<Derived&>(*this); }

    void onWritten(const beast::error_code& ec)
    {
        if (ec) {
            fail();
            return;
        }
        queue_.pop_front();
        if (!queue_.empty()) {
            derived().writeFront();
        }
    }

    void fail()
    {
        if (dead_) {
            return;
        }
        dead_ = true;
        queue_.clear();
        if (conn_) {
            conn_->abandon();
        }
    }

    Broker& broker_;
    std::shared_ptr<FrameTap> tap_;
    net::any_io_executor executor_;
    std::shared_ptr<Connection> conn_;
    std::deque<std::string> queue_;
    bool dead_ = false;
};

class TcpSession : public SessionBase<TcpSession> {
public:
    TcpSession(Broker& broker, std::shared_ptr<FrameTap> tap, tcp::socket socket)
        : SessionBase(broker, std::move(tap)), socket_(std::move(socket)), buffer_(kMaxFrameBytes)
    {
    }

    std::shared_ptr<Connection> start()
    {
        auto conn = attach(socket_.get_executor());
        readLine();
        return conn;
    }

    void writeFront()
    {
        queue_.front() += '\n';
        net::async_write(socket_, net::buffer(queue_.front()),
                         [self = shared_from_this()](beast::error_code ec, std::size_t) { self->onWritten(ec); });
    }

    void closeSocket()
    {
        beast::error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_both, ignored);
        socket_.close(ignored);
    }

private:
    void readLine()
    {
        net::async_read_until(socket_, buffer_, '\n', [self = shared_from_this()](beast::error_code ec, std::size_t n) {
            if (ec) {
                if (ec == net::error::not_found) {
                    spdlog::warn("closing connection: frame exceeds {} bytes", kMaxFrameBytes);
                }
                self->fail();
                self->closeSocket();
                return;
            }
            std::string line(net::buffers_begin(self->buffer_.data()),
                             net::buffers_begin(self->buffer_.data()) + static_cast<std::ptrdiff_t>(n - 1));
            self->buffer_.consume(n);
            if (!isBlank(line)) {
                self->deliver(line);
            }
            self->readLine();
        });
    }

    tcp::socket socket_;
    net::streambuf buffer_;
};

class WsSession : public SessionBase<WsSession> {
public:
    WsSession(Broker& broker, std::shared_ptr<FrameTap> tap, tcp::socket socket)
        : SessionBase(broker, std::move(tap)), ws_(std::move(socket))
    {
    }

    std::shared_ptr<Connection> start()
    {
        auto conn = attach(ws_.get_executor());
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(kMaxFrameBytes);
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) {
                self->fail();
                return;
            }
            self->readMessage();
        });
        return conn;
    }

    void writeFront()
    {
        ws_.text(true);
        ws_.async_write(net::buffer(queue_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) { self->onWritten(ec); });
    }

    void closeSocket()
    {
        beast::error_code ignored;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
        beast::get_lowest_layer(ws_).socket().close(ignored);
    }

private:
    void readMessage()
    {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->fail();
                return;
            }
            auto text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->deliver(text);
            self->readMessage();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
};

}  // namespace

struct SocketServer::Impl {
    Impl(Broker& b, TransportKind k, TapFactory t)
        : broker(b), kind(k), tap(std::move(t)), io(std::make_shared<net::io_context>(1)), acceptor(*io) {}

    void accept()
    {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec != net::error::operation_aborted) {
                    spdlog::warn("accept failed: {}", ec.message());
                    accept();
                }
                return;
            }
            std::shared_ptr<Connection> conn;
            auto recorder = tap ? tap() : nullptr;
            if (kind == TransportKind::Tcp) {
                auto s = std::make_shared<TcpSession>(broker, recorder, std::move(socket));
                conn = s->start();
                closers.push_back([weak = std::weak_ptr<TcpSession>(s)] {
                    if (auto p = weak.lock()) p->closeSocket();
                });
            } else {
                auto s = std::make_shared<WsSession>(broker, recorder, std::move(socket));
                conn = s->start();
                closers.push_back([weak = std::weak_ptr<WsSession>(s)] {
                    if (auto p = weak.lock()) p->closeSocket();
                });
            }
            connections.push_back(conn);
            accept();
        });
    }

    Broker& broker;
    TransportKind kind;
    TapFactory tap;
    std::shared_ptr<net::io_context> io;
    tcp::acceptor acceptor;
    std::vector<std::weak_ptr<Connection>> connections;
    std::vector<std::function<void()>> closers;
};

SocketServer::SocketServer(Broker& broker, TransportKind kind, std::uint16_t port, const std::string& host,
                           TapFactory tap)
    : impl_(std::make_unique<Impl>(broker, kind, std::move(tap)))
{
    if (kind == TransportKind::Stdio) {
        throw Error(ErrorCode::InvalidParams, "stdio is not a socket transport");
    }
    try {
        tcp::endpoint ep(net::ip::make_address(host), port);
        impl_->acceptor.open(ep.protocol());
        impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
        impl_->acceptor.bind(ep);
        impl_->acceptor.listen();
    } catch (const boost::system::system_error& e) {
        throw Error(ErrorCode::BindFailed, "cannot listen on " + host + ":" + std::to_string(port) + ": " + e.what(),
                    {{"host", host}, {"port", port}});
    }
    std::weak_ptr<net::io_context> weakIo = impl_->io;
    broker.onShutdown([weakIo] {
        if (auto io = weakIo.lock()) {
            io->stop();
        }
    });
}

SocketServer::~SocketServer()
{
    stop();
}

std::uint16_t SocketServer::port() const noexcept
{
    return impl_->acceptor.local_endpoint().port();
}

void SocketServer::run()
{
    impl_->accept();
    impl_->io->run();

    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    for (auto& close : impl_->closers) {
        close();
    }
    // Every request thread must finish before the broker can go away.
    for (auto& weak : impl_->connections) {
        if (auto conn = weak.lock()) {
            conn->close();
        }
    }
}

void SocketServer::stop()
{
    impl_->io->stop();
}

}  // namespace assist
