#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "assist/broker.hpp"
#include "assist/transport.hpp"

namespace assist {

/// Feeds inbound frames to a fresh connection one at a time. After each frame
/// it waits until every request is answered and all scheduled real-time work
/// has been delivered, so the output order is deterministic. Returns the
/// outbound frames in emission order.
std::vector<std::string> runTranscript(Broker& broker, const std::vector<std::string>& inbound);

/// Same, on a broker built from `cfg` with a frozen clock and no state dir.
std::vector<std::string> runTranscript(const Config& cfg, const std::vector<std::string>& inbound);

/// Canonical form used for comparison: JSON frames are re-serialized with
/// wall-clock fields ("createdAt") zeroed; anything else is kept verbatim.
std::string normalizeFrame(std::string_view frame);

struct ReplayDiff {
    std::size_t index = 0;  // 0-based frame index
    std::string expected;   // empty when the golden ran out
    std::string actual;     // empty when the output ran out
};

/// First difference after normalization, or nullopt when equal.
std::optional<ReplayDiff> compareFrames(const std::vector<std::string>& actual,
                                        const std::vector<std::string>& golden);

/// Lines of a JSONL file; a final newline does not add an empty line.
/// Throws InvalidParams when the file cannot be read.
std::vector<std::string> readFrames(const std::filesystem::path& path);
void writeFrames(const std::filesystem::path& path, const std::vector<std::string>& frames);

/// Records connection N as `N.transcript.jsonl` (inbound) and
/// `N.golden.jsonl` (outbound) in a directory; the pair replays as is.
class TranscriptRecorder final : public FrameTap {
public:
    TranscriptRecorder(const std::filesystem::path& dir, std::size_t index);

    void inbound(std::string_view frame) override;
    void outbound(std::string_view frame) override;

private:
    std::mutex mu_;
    std::ofstream in_;
    std::ofstream out_;
};

/// Numbers connections from 1 in accept order.
TapFactory recordingTaps(const std::filesystem::path& dir);

}  // namespace assist
