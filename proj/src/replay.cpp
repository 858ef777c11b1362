#include "assist/replay.hpp"

#include <atomic>

#include <nlohmann/json.hpp>

#include "assist/error.hpp"
#include "assist/wire.hpp"

namespace assist {

namespace {

using json = nlohmann::json;

void zeroClockFields(json& j)
{
    if (j.is_object()) {
        for (auto& [key, value] : j.items()) {
            if (key == "createdAt" && value.is_number()) {
                value = 0;
            } else {
                zeroClockFields(value);
            }
        }
    } else if (j.is_array()) {
        for (auto& v : j) {
            zeroClockFields(v);
        }
    }
}

}  // namespace

std::vector<std::string> runTranscript(Broker& broker, const std::vector<std::string>& inbound)
{
    std::mutex mu;
    std::vector<std::string> out;
    auto conn = Connection::create(broker, [&](const std::string& frame) {
        std::lock_guard lock(mu);
        out.push_back(frame);
    });
    for (const auto& frame : inbound) {
        conn->receive(frame);
        conn->waitIdle();
        broker.suggest().waitIdle();
        conn->waitIdle();
    }
    conn->close();
    std::lock_guard lock(mu);
    return out;
}

std::vector<std::string> runTranscript(const Config& cfg, const std::vector<std::string>& inbound)
{
    BrokerHooks hooks;
    hooks.clock = [] { return std::int64_t{0}; };
    Broker broker(cfg, hooks);
    return runTranscript(broker, inbound);
}

std::string normalizeFrame(std::string_view frame)
{
    auto j = json::parse(frame, nullptr, false);
    if (j.is_discarded()) {
        return std::string(frame);
    }
    zeroClockFields(j);
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::optional<ReplayDiff> compareFrames(const std::vector<std::string>& actual, const std::vector<std::string>& golden)
{
    auto n = std::max(actual.size(), golden.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::string a = i < actual.size() ? normalizeFrame(actual[i]) : std::string();
        std::string g = i < golden.size() ? normalizeFrame(golden[i]) : std::string();
        if (i >= actual.size() || i >= golden.size() || a != g) {
            return ReplayDiff{i, i < golden.size() ? golden[i] : std::string(),
                              i < actual.size() ? actual[i] : std::string()};
        }
    }
    return std::nullopt;
}

std::vector<std::string> readFrames(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::InvalidParams, "cannot read " + path.string(), {{"path", path.string()}});
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
    }
    return lines;
}

void writeFrames(const std::filesystem::path& path, const std::vector<std::string>& frames)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::InvalidParams, "cannot write " + path.string(), {{"path", path.string()}});
    }
    for (const auto& f : frames) {
        out << f << '\n';
    }
}

TranscriptRecorder::TranscriptRecorder(const std::filesystem::path& dir, std::size_t index)
{
    std::filesystem::create_directories(dir);
    auto stem = std::to_string(index);
    in_.open(dir / (stem + ".transcript.jsonl"), std::ios::binary | std::ios::trunc);
    out_.open(dir / (stem + ".golden.jsonl"), std::ios::binary | std::ios::trunc);
    if (!in_ || !out_) {
        throw Error(ErrorCode::InvalidParams, "cannot record into " + dir.string(), {{"path", dir.string()}});
    }
}

void TranscriptRecorder::inbound(std::string_view frame)
{
    std::lock_guard lock(mu_);
    in_ << frame << '\n';
    in_.flush();
}

void TranscriptRecorder::outbound(std::string_view frame)
{
    std::lock_guard lock(mu_);
    out_ << frame << '\n';
    out_.flush();
}

TapFactory recordingTaps(const std::filesystem::path& dir)
{
    auto counter = std::make_shared<std::atomic<std::size_t>>(0);
    return [dir, counter]() -> std::shared_ptr<FrameTap> {
        return std::make_shared<TranscriptRecorder>(dir, ++*counter);
    };
}

}  // namespace assist
