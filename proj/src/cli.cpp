#include "assist/cli.hpp"

#include <chrono>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "assist/config.hpp"
#include "assist/error.hpp"
#include "assist/replay.hpp"
#include "assist/scenario.hpp"
#include "assist/transport.hpp"
#include "assist/wire.hpp"

namespace assist {

namespace {

struct ServeFlags {
    std::string transport = "stdio";
    std::string config;
    std::string recordDir;
};

struct ReplayFlags {
    std::string transcript;
    std::string golden;
    std::string config;
    bool writeGolden = false;
};

struct EvalFlags {
    std::vector<std::string> scenarios;
    bool all = false;
};

Config configFrom(const std::string& path)
{
    return path.empty() ? defaultConfig() : loadConfig(path);
}

int serve(const ServeFlags& flags, CliStreams& io)
{
    auto spec = parseTransport(flags.transport);
    auto cfg = configFrom(flags.config);
    BrokerHooks hooks;
    hooks.stateDir = effectiveStateDir(cfg);
    Broker broker(cfg, hooks);
    TapFactory tap;
    if (!flags.recordDir.empty()) {
        tap = recordingTaps(flags.recordDir);
    }
    if (io.serving) io.serving(&broker);
    struct Unhook {
        CliStreams& io;
        ~Unhook()
        {
            if (io.serving) io.serving(nullptr);
        }
    } unhook{io};

    if (spec.kind == TransportKind::Stdio) {
        spdlog::info("serving {} on stdio", kProtocolVersion);
        serveStreams(broker, io.in, io.out, tap);
        return ExitOk;
    }
    SocketServer server(broker, spec.kind, spec.port, "127.0.0.1", tap);
    spdlog::info("serving {} on {}:{}", kProtocolVersion, spec.kind == TransportKind::Tcp ? "tcp" : "ws",
                 server.port());
    server.run();
    return ExitOk;
}

int replay(const ReplayFlags& flags, CliStreams& io)
{
    auto cfg = configFrom(flags.config);
    auto inbound = readFrames(flags.transcript);
    auto produced = runTranscript(cfg, inbound);
    if (flags.writeGolden) {
        writeFrames(flags.golden, produced);
        io.out << "wrote " << produced.size() << " frames to " << flags.golden << '\n';
        return ExitOk;
    }
    auto golden = readFrames(flags.golden);
    if (auto diff = compareFrames(produced, golden)) {
        io.err << "golden mismatch at frame " << diff->index + 1 << '\n'
               << "  expected: " << (diff->index < golden.size() ? diff->expected : "<end of golden>") << '\n'
               << "  actual:   " << (diff->index < produced.size() ? diff->actual : "<end of output>") << '\n';
        return ExitFailed;
    }
    io.out << "replay ok: " << inbound.size() << " requests, " << produced.size() << " frames\n";
    return ExitOk;
}

int eval(const EvalFlags& flags, CliStreams& io)
{
    auto names = flags.all ? scenarioNames() : flags.scenarios;
    if (names.empty()) {
        io.err << "eval: give --scenario NAME or --all\n";
        return ExitUsage;
    }
    auto started = std::chrono::steady_clock::now();
    std::size_t passed = 0;
    for (const auto& name : names) {
        auto result = runScenario(name);
        io.out << result.transcript;
        passed += result.passed ? 1 : 0;
    }
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    io.err << "eval: " << passed << "/" << names.size() << " scenarios passed in " << ms.count() << " ms\n";
    return passed == names.size() ? ExitOk : ExitFailed;
}

}  // namespace

int runCli(int argc, const char* const* argv, CliStreams io)
{
    CLI::App app{"Editor-side broker for AI code suggestions and chat", "assist-bridge"};
    app.require_subcommand(1);

    ServeFlags serveFlags;
    auto* serveCmd = app.add_subcommand("serve", "Run the daemon");
    serveCmd->add_option("--transport", serveFlags.transport, "stdio, tcp:PORT or ws:PORT")->capture_default_str();
    serveCmd->add_option("--config", serveFlags.config, "Config file (TOML)");
    serveCmd->add_option("--record-dir", serveFlags.recordDir,
                         "Record each connection as a replayable transcript/golden pair");

    ReplayFlags replayFlags;
    auto* replayCmd = app.add_subcommand("replay", "Replay a transcript and diff against a golden");
    replayCmd->add_option("--transcript", replayFlags.transcript, "Inbound frames, one per line")->required();
    replayCmd->add_option("--golden", replayFlags.golden, "Expected outbound frames")->required();
    replayCmd->add_option("--config", replayFlags.config, "Config file (TOML)");
    replayCmd->add_flag("--write-golden", replayFlags.writeGolden, "Write the output as the golden instead");

    EvalFlags evalFlags;
    auto* evalCmd = app.add_subcommand("eval", "Run case-study scenarios against the mock provider");
    evalCmd->add_option("--scenario", evalFlags.scenarios, "Scenario name (repeatable)");
    evalCmd->add_flag("--all", evalFlags.all, "Run every shipped scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, io.out, io.err) == 0 ? ExitOk : ExitUsage;
    }

    try {
        if (*serveCmd) return serve(serveFlags, io);
        if (*replayCmd) return replay(replayFlags, io);
        return eval(evalFlags, io);
    } catch (const Error& e) {
        io.err << errorName(e.code()) << ": " << e.what() << '\n';
        return ExitUsage;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return ExitUsage;
    }
}

}  // namespace assist
