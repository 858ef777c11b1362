#include <csignal>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "assist/cli.hpp"

namespace {

std::mutex gBrokerMu;
assist::Broker* gBroker = nullptr;
bool gSignalled = false;

}  // namespace

int main(int argc, char** argv)
{
    // stdout carries protocol frames under the stdio transport.
    spdlog::set_default_logger(spdlog::stderr_color_mt("assist-bridge"));

    // Signals go to a dedicated thread; blocked before any other thread starts.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::thread([set] {
        int sig = 0;
        while (sigwait(&set, &sig) == 0) {
            std::lock_guard lock(gBrokerMu);
            gSignalled = true;
            if (gBroker != nullptr) {
                spdlog::info("signal {}: shutting down", sig);
                gBroker->requestShutdown();
            } else {
                std::_Exit(128 + sig);
            }
        }
    }).detach();

    assist::CliStreams io{std::cin, std::cout, std::cerr, [](assist::Broker* b) {
                              std::lock_guard lock(gBrokerMu);
                              gBroker = b;
                              if (b != nullptr && gSignalled) {
                                  b->requestShutdown();
                              }
                          }};
    int code = assist::runCli(argc, argv, io);
    std::cout.flush();
    std::fflush(nullptr);
    // A stdin reader may still be blocked after a shutdown request.
    std::_Exit(code);
}
