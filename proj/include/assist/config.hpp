#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "assist/comment_syntax.hpp"
#include "assist/context.hpp"
#include "assist/providers.hpp"

namespace assist {

/// Parses the TOML subset used by config files into a JSON tree: bare and
/// quoted keys, dotted table headers, arrays of tables, basic/literal and
/// multi-line strings, integers, floats, booleans and single-type arrays.
/// `lines` receives the source line of every key, keyed by dotted path
/// ("providers[0].id"). Throws ConfigInvalid with {line} data.
nlohmann::json parseToml(std::string_view text, std::map<std::string, int>* lines = nullptr);

struct Config {
    std::vector<ProviderConfig> providers;
    std::chrono::milliseconds debounce{300};
    std::size_t prefetchCapacity = 32;
    int maxResults = 3;
    std::size_t historyCap = 64;
    ContextCaps caps;
    /// Defaults merged with `[templates.NAME]` entries.
    std::map<std::string, Template> templates;
    std::vector<CommentSyntax> commentSyntaxOverrides;
    std::optional<std::filesystem::path> stateDir;
    std::string workspaceRoot;
};

/// Config with one mock provider and every default.
Config defaultConfig();

/// Validates and converts; ConfigInvalid data carries {line, field}.
Config parseConfig(std::string_view text);
Config loadConfig(const std::filesystem::path& path);

/// ASSIST_BRIDGE_STATE_DIR when set, otherwise the configured directory.
std::optional<std::filesystem::path> effectiveStateDir(const Config& cfg);

SyntaxRegistry buildSyntaxRegistry(const Config& cfg);

}  // namespace assist
