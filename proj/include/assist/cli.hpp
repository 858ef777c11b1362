#pragma once

#include <functional>
#include <iosfwd>

#include "assist/broker.hpp"

namespace assist {

struct CliStreams {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
    /// Called with the live broker when serving starts and with nullptr
    /// when it stops (signal handlers hook in here).
    std::function<void(Broker*)> serving;
};

/// Exit codes of the command line.
enum CliExit : int {
    ExitOk = 0,
    /// Golden mismatch or a failing scenario.
    ExitFailed = 1,
    /// Bad usage, invalid config, bind failure or unknown scenario.
    ExitUsage = 2,
};

/// `serve`, `replay` and `eval`; `argv[0]` is the program name.
int runCli(int argc, const char* const* argv, CliStreams io);

}  // namespace assist
