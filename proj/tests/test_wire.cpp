#include <doctest.h>

#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "assist/error.hpp"
#include "assist/transport.hpp"
#include "assist/wire.hpp"
#include "support.hpp"

using namespace assist;
using namespace std::chrono_literals;
using json = nlohmann::json;
using testing::pos;
using testing::range;
using testing::request;

namespace asio = boost::asio;
namespace beast = boost::beast;

namespace {

int errorCode(const json& frame)
{
    return frame.contains("error") ? frame["error"]["code"].get<int>() : 0;
}

struct Session {
    testing::MockBroker mb;
    testing::FrameLog log;
    std::shared_ptr<Connection> conn;

    explicit Session(Config cfg = defaultConfig(), std::shared_ptr<MockProvider> mock = testing::makeMock())
        : mb(std::move(cfg), std::move(mock))
    {
        conn = Connection::create(*mb.broker, log.sink());
    }
    ~Session() { conn->close(); }

    json call(std::int64_t id, const std::string& method, const json& params)
    {
        conn->receive(request(id, method, params));
        return log.response(id);
    }
};

/// Runs a SocketServer on its own thread.
struct ServerThread {
    SocketServer server;
    std::thread thread;

    ServerThread(Broker& broker, TransportKind kind) : server(broker, kind, 0)
    {
        thread = std::thread([this] { server.run(); });
    }
    ~ServerThread()
    {
        server.stop();
        thread.join();
    }
};

}  // namespace

TEST_SUITE("wire")
{
    TEST_CASE("method table")
    {
        const auto& methods = methodTable();
        CHECK(methods.size() == 16);
        CHECK(methods.front() == "workspace/open");
        CHECK(std::find(methods.begin(), methods.end(), "chat/applyPatch") != methods.end());
    }

    TEST_CASE("frames")
    {
        CHECK(responseFrame(3, {{"ok", true}}) == R"({"id":3,"result":{"ok":true}})");
        CHECK(errorFrame(nullptr, ErrorCode::ParseError, "parse error") ==
              R"({"error":{"code":-32700,"message":"parse error"},"id":null})");
        CHECK(notificationFrame("x/y", {{"a", 1}}) == R"({"method":"x/y","params":{"a":1}})");
    }

    TEST_CASE("dispatch runs methods and reports domain errors")
    {
        testing::MockBroker mb;
        CallContext ctx;
        ctx.notify = [](std::string_view, const json&) {};
        ctx.detachedNotifier = [] { return std::function<void(std::string_view, const json&)>(); };
        auto doc = dispatch(*mb.broker, "workspace/open", {{"uri", "a.swift"}, {"languageId", "swift"}, {"content", "x"}},
                            ctx);
        CHECK(doc["version"] == 0);
        CHECK(doc["uri"] == "a.swift");
        try {
            dispatch(*mb.broker, "workspace/open", {{"uri", "a.swift"}, {"languageId", "swift"}, {"content", "x"}}, ctx);
            FAIL("expected AlreadyOpen");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::AlreadyOpen);
        }
        try {
            dispatch(*mb.broker, "nope/nope", json::object(), ctx);
            FAIL("expected MethodNotFound");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MethodNotFound);
        }
    }

    TEST_CASE("protocol errors")
    {
        Session s;
        s.conn->receive("{not json");
        s.conn->receive("[1,2]");
        s.conn->receive(R"({"id":1})");
        s.conn->receive(R"({"id":0,"method":"chat/new"})");
        s.conn->receive(R"({"id":"7","method":"chat/new"})");
        s.conn->receive(R"({"id":2,"method":"nope"})");
        s.conn->receive(R"({"id":3,"method":"chat/new","protocol":"assist-bridge/9"})");
        s.conn->receive(R"({"id":4,"method":"chat/new","params":[1]})");
        s.conn->receive(R"({"id":5,"method":"chat/new","protocol":"assist-bridge/1"})");
        s.conn->receive(R"({"id":5,"method":"chat/new"})");
        s.conn->receive(R"({"id":6,"method":"workspace/open","params":{"uri":"a"}})");
        s.conn->receive(R"({"id":7,"method":"workspace/open","params":{"uri":1,"languageId":"x","content":""}})");
        s.conn->waitIdle();
        auto frames = s.log.parsed();
        REQUIRE(frames.size() == 12);
        CHECK(errorCode(frames[0]) == -32700);
        CHECK(frames[0]["id"].is_null());
        CHECK(errorCode(frames[1]) == -32600);
        CHECK(errorCode(frames[2]) == -32600);
        CHECK(frames[2]["id"] == 1);
        CHECK(errorCode(frames[3]) == -32600);
        CHECK(errorCode(frames[4]) == -32600);
        CHECK(errorCode(frames[5]) == -32601);
        CHECK(errorCode(frames[6]) == -32600);
        CHECK(frames[6]["error"]["data"]["supported"] == "assist-bridge/1");
        CHECK(errorCode(frames[7]) == -32600);
        // The remaining frames may arrive in any order.
        std::map<std::int64_t, json> byId;
        std::size_t nullIds = 0;
        for (std::size_t i = 8; i < frames.size(); ++i) {
            if (frames[i]["id"].is_null()) {
                ++nullIds;
                CHECK(errorCode(frames[i]) == -32600);
            } else {
                byId[frames[i]["id"].get<std::int64_t>()] = frames[i];
            }
        }
        CHECK(nullIds == 1);  // the repeated id 5
        CHECK(byId.at(5)["result"]["id"] == "c1");
        CHECK(errorCode(byId.at(6)) == -32602);
        CHECK(byId.at(6)["error"]["data"]["field"] == "languageId");
        CHECK(errorCode(byId.at(7)) == -32602);
    }

    TEST_CASE("notifications are never answered")
    {
        Session s;
        s.conn->receive(R"({"method":"chat/new"})");
        s.conn->receive(R"({"method":"$/cancel","params":{"id":99}})");
        s.conn->receive(R"({"id":1,"method":"$/cancel","params":{"id":99}})");
        s.conn->waitIdle();
        auto frames = s.log.parsed();
        REQUIRE(frames.size() == 1);
        CHECK(frames[0]["result"]["cancelled"] == false);
    }

    TEST_CASE("cancelling an in-flight suggest/get")
    {
        auto mock = testing::makeMock();
        mock->setLatency(3000ms);
        Session s(defaultConfig(), mock);
        s.call(1, "workspace/open", {{"uri", "a.swift"}, {"languageId", "swift"}, {"content", "let x = "}});
        auto started = std::chrono::steady_clock::now();
        s.conn->receive(request(2, "suggest/get", {{"uri", "a.swift"}, {"cursor", pos(0, 8)}}));
        std::this_thread::sleep_for(50ms);
        auto ack = s.call(3, "$/cancel", {{"id", 2}});
        CHECK(ack["result"]["cancelled"] == true);
        auto r = s.log.response(2);
        CHECK(errorCode(r) == -32800);
        CHECK(std::chrono::steady_clock::now() - started < 2000ms);
    }

    TEST_CASE("a cancelled request queued behind another on the same document")
    {
        auto mock = testing::makeMock();
        mock->setLatency(300ms);
        Session s(defaultConfig(), mock);
        s.call(1, "workspace/open", {{"uri", "a.swift"}, {"languageId", "swift"}, {"content", "let x = "}});
        s.conn->receive(request(2, "suggest/get", {{"uri", "a.swift"}, {"cursor", pos(0, 8)}}));
        s.conn->receive(request(3, "workspace/edit", {{"uri", "a.swift"}, {"expectedVersion", 0},
                                                     {"range", range(0, 0, 0, 0)}, {"newText", "//"}}));
        s.conn->receive(R"({"method":"$/cancel","params":{"id":3}})");
        CHECK(errorCode(s.log.response(3)) == -32800);
        auto r2 = s.log.response(2);
        CHECK(r2["result"]["suggestions"].size() == 2);
        s.conn->waitIdle();
        CHECK(s.mb.broker->workspace().version(s.mb.broker->workspace().makeId("a.swift")) == 0);
    }

    TEST_CASE("requests on one document are answered in arrival order")
    {
        Session s;
        s.call(1, "workspace/open", {{"uri", "a.txt"}, {"languageId", "plaintext"}, {"content", ""}});
        for (int i = 0; i < 30; ++i) {
            s.conn->receive(request(2 + i, "workspace/edit",
                                    {{"uri", "a.txt"}, {"expectedVersion", i}, {"range", range(0, i, 0, i)},
                                     {"newText", "x"}}));
        }
        s.conn->waitIdle();
        for (int i = 0; i < 30; ++i) {
            auto r = s.log.response(2 + i);
            REQUIRE(r["result"]["version"] == i + 1);
        }
    }

    TEST_CASE("real-time pushes carry only live sessions")
    {
        auto cfg = defaultConfig();
        cfg.debounce = 30ms;
        auto mock = testing::makeMock("mock", testing::fixedCompletions({"A"}));
        mock->setLatency(20ms);
        Session s(cfg, mock);
        s.call(1, "workspace/open", {{"uri", "a.txt"}, {"languageId", "plaintext"}, {"content", ""}});
        std::int64_t id = 2;
        for (int i = 0; i < 20; ++i) {
            s.call(id++, "workspace/edit",
                   {{"uri", "a.txt"}, {"expectedVersion", i}, {"range", range(0, i, 0, i)}, {"newText", "k"}});
            s.call(id++, "suggest/realtime", {{"uri", "a.txt"}, {"version", i + 1}, {"cursor", pos(0, i + 1)}});
            std::this_thread::sleep_for(std::chrono::milliseconds(i % 4 == 0 ? 60 : 5));
        }
        s.mb.broker->suggest().waitIdle();
        s.conn->waitIdle();
        int pushes = 0;
        auto& engine = s.mb.broker->suggest();
        for (const auto& f : s.log.parsed()) {
            if (f.value("method", "") != "suggest/realtimeReady") continue;
            ++pushes;
            // Sessions that were live when pushed are bound to a version
            // that existed; the last one is still live now.
            CHECK(f["params"]["boundVersion"].get<std::int64_t>() <= 20);
            CHECK(f["params"]["state"] == "presenting");
        }
        CHECK(pushes >= 1);
        json last;
        for (const auto& f : s.log.parsed()) {
            if (f.value("method", "") == "suggest/realtimeReady") last = f;
        }
        CHECK(last["params"]["boundVersion"] == 20);
        CHECK(engine.isLive(last["params"]["sessionId"].get<std::string>()));
    }

    TEST_CASE("chat/send streams chunks before its response")
    {
        Session s;
        auto conv = s.call(1, "chat/new", json::object());
        auto r = s.call(2, "chat/send", {{"conversationId", conv["result"]["id"]}, {"text", "Instruction: LCM of Two Numbers"}});
        std::string joined;
        int index = 0;
        bool responseSeen = false;
        for (const auto& f : s.log.parsed()) {
            if (f.contains("id") && f["id"] == 2) responseSeen = true;
            if (f.value("method", "") == "chat/streamChunk") {
                CHECK_FALSE(responseSeen);
                CHECK(f["params"]["index"] == index++);
                CHECK(f["params"]["requestId"] == 2);
                joined += f["params"]["chunk"].get<std::string>();
            }
        }
        CHECK(index > 1);
        CHECK(joined == r["result"]["message"]["content"]);
    }

    TEST_CASE("admin/shutdown answers then requests shutdown")
    {
        Session s;
        auto r = s.call(1, "admin/shutdown", json::object());
        CHECK(r["result"]["shuttingDown"] == true);
        CHECK(s.mb.broker->waitForShutdown(2000ms));
    }

    TEST_CASE("property: every valid id is answered exactly once")
    {
        std::mt19937_64 rng(61);
        Session s;
        s.call(1, "workspace/open", {{"uri", "f.txt"}, {"languageId", "plaintext"}, {"content", "abc\n"}});
        std::int64_t next = 2;
        std::vector<std::int64_t> valid;
        std::size_t malformed = 0;
        const std::vector<std::string> methods{"chat/new", "suggest/anchor", "workspace/diagnostics", "nope/x",
                                               "suggest/next"};
        for (int i = 0; i < 500; ++i) {
            switch (rng() % 4) {
            case 0:
                s.conn->receive("{\"id\":" + std::to_string(next) + ",\"method\":");
                ++malformed;
                break;
            case 1: {
                const auto& m = methods[rng() % methods.size()];
                json params{{"uri", "f.txt"}, {"cursor", pos(0, rng() % 6)}, {"diagnostics", json::array()},
                            {"sessionId", "s0"}};
                s.conn->receive(request(next, m, params));
                valid.push_back(next++);
                break;
            }
            case 2:
                s.conn->receive(R"({"method":"$/cancel","params":{"id":)" + std::to_string(next - 1) + "}}");
                break;
            default:
                s.conn->receive(request(next, "chat/new", json::object()));
                valid.push_back(next++);
            }
        }
        s.conn->waitIdle();
        std::map<std::int64_t, int> answers;
        std::size_t parseErrors = 0;
        for (const auto& f : s.log.parsed()) {
            if (f.contains("id") && f["id"].is_number_integer()) ++answers[f["id"].get<std::int64_t>()];
            if (f.contains("id") && f["id"].is_null() && errorCode(f) == -32700) ++parseErrors;
        }
        for (auto id : valid) REQUIRE(answers[id] == 1);
        CHECK(parseErrors == malformed);
        CHECK(answers.size() == valid.size() + 1);
    }

    TEST_CASE("serveStreams over string streams")
    {
        testing::MockBroker mb;
        std::stringstream in;
        in << request(1, "workspace/open", {{"uri", "s.swift"}, {"languageId", "swift"}, {"content", "func gcd("}})
           << "\r\n"
           << "\n"
           << request(2, "suggest/get", {{"uri", "s.swift"}, {"cursor", pos(0, 9)}}) << "\n"
           << "garbage\n";
        std::stringstream out;
        serveStreams(*mb.broker, in, out);
        std::vector<json> frames;
        std::string line;
        while (std::getline(out, line)) frames.push_back(json::parse(line));
        REQUIRE(frames.size() == 3);
        std::map<std::int64_t, json> byId;
        int parseErrors = 0;
        for (const auto& f : frames) {
            if (f["id"].is_null()) ++parseErrors;
            else byId[f["id"].get<std::int64_t>()] = f;
        }
        CHECK(parseErrors == 1);
        CHECK(byId.at(1)["result"]["version"] == 0);
        CHECK(byId.at(2)["result"]["suggestions"][0]["text"].get<std::string>().find("while y != 0") !=
              std::string::npos);
    }

    TEST_CASE("parseTransport")
    {
        CHECK(parseTransport("stdio").kind == TransportKind::Stdio);
        auto tcp = parseTransport("tcp:7801");
        CHECK(tcp.kind == TransportKind::Tcp);
        CHECK(tcp.port == 7801);
        CHECK(parseTransport("ws:9000").kind == TransportKind::WebSocket);
        for (const char* bad : {"tcp", "tcp:", "tcp:99999", "udp:1", "ws:abc", ""}) {
            CAPTURE(bad);
            try {
                parseTransport(bad);
                FAIL("expected InvalidParams");
            } catch (const Error& e) {
                CHECK(e.code() == ErrorCode::InvalidParams);
            }
        }
    }

    TEST_CASE("TCP transport")
    {
        testing::MockBroker mb;
        ServerThread st(*mb.broker, TransportKind::Tcp);
        asio::io_context io;
        asio::ip::tcp::socket sock(io);
        sock.connect({asio::ip::make_address("127.0.0.1"), st.server.port()});
        asio::write(sock, asio::buffer(request(1, "chat/new", json::object()) + "\n\n"));
        asio::streambuf first;
        asio::read_until(sock, first, '\n');
        std::string out = "oops\n" + request(2, "chat/send", {{"conversationId", "c1"}, {"text", "ping"}}) + "\r\n";
        asio::write(sock, asio::buffer(out));
        asio::streambuf& buf = first;
        std::vector<json> frames;
        while (frames.size() < 4) {
            asio::read_until(sock, buf, '\n');
            std::istream is(&buf);
            std::string line;
            std::getline(is, line);
            frames.push_back(json::parse(line));
        }
        // The parse error is written inline; requests run on their own threads.
        std::map<std::int64_t, json> byId;
        int parseErrors = 0;
        std::string streamed;
        for (const auto& f : frames) {
            if (f.contains("id") && f["id"].is_null()) ++parseErrors;
            if (f.contains("id") && f["id"].is_number_integer()) byId[f["id"].get<std::int64_t>()] = f;
            if (f.value("method", "") == "chat/streamChunk") streamed += f["params"]["chunk"].get<std::string>();
        }
        CHECK(parseErrors == 1);
        CHECK(byId.at(1)["result"]["id"] == "c1");
        CHECK(byId.at(2)["result"]["message"]["content"] == "pong");
        CHECK(streamed == "pong");
    }

    TEST_CASE("WebSocket transport")
    {
        testing::MockBroker mb;
        ServerThread st(*mb.broker, TransportKind::WebSocket);
        asio::io_context io;
        beast::websocket::stream<asio::ip::tcp::socket> ws(io);
        ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), st.server.port()});
        ws.handshake("127.0.0.1", "/");
        ws.text(true);
        ws.write(asio::buffer(request(1, "workspace/open", {{"uri", "w.swift"}, {"languageId", "swift"},
                                                            {"content", "let x = "}})));
        beast::flat_buffer b;
        ws.read(b);
        auto first = json::parse(beast::buffers_to_string(b.data()));
        CHECK(first["result"]["version"] == 0);
        b.consume(b.size());
        ws.write(asio::buffer(request(2, "suggest/get", {{"uri", "w.swift"}, {"cursor", pos(0, 8)}})));
        ws.read(b);
        auto second = json::parse(beast::buffers_to_string(b.data()));
        CHECK(second["result"]["suggestions"][0]["text"] == "42");
        ws.close(beast::websocket::close_code::normal);
    }

    TEST_CASE("binding a busy port fails with BindFailed")
    {
        testing::MockBroker mb;
        SocketServer first(*mb.broker, TransportKind::Tcp, 0);
        try {
            SocketServer second(*mb.broker, TransportKind::Tcp, first.port());
            FAIL("expected BindFailed");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BindFailed);
        }
    }
}
