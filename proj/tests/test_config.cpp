#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "assist/config.hpp"
#include "assist/error.hpp"

using namespace assist;
using json = nlohmann::json;

namespace {

Error errorOf(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e;
    }
    FAIL("expected an assist::Error");
    return Error(ErrorCode::InternalError, "unreachable");
}

const char* const kFull = R"(# bridge settings
debounce_ms = 150
prefetch_capacity = 8
max_results = 5
history_cap = 10
state_dir = "/tmp/assist-state"
workspace_root = '/repo'

[caps]
prefix_bytes = 100
suffix_bytes = 50
selection_bytes = 25

[[providers]]
id = "remote"
kind = "completion"
endpoint = "https://example.invalid/v1/complete"
credential_ref = "REMOTE_KEY"
timeout_ms = 1500
priority = 2

[[providers]]
id = "local"
kind = "mock"
mock_latency_ms = 5
mock_synthetic_fallback = true
priority = -1

[templates.review]
body = """
Review {{file_path}}:
{{selection}}"""

[comment_syntax.json]
line = "//"

[comment_syntax.lua]
block_open = "--[["
block_close = "]]"

[comment_syntax.swift]
unsupported = true
)";

}  // namespace

TEST_SUITE("config")
{
    TEST_CASE("TOML subset")
    {
        std::map<std::string, int> lines;
        auto j = parseToml(R"(a = 1
b = "two" # trailing comment
"quoted key" = 'lit\n'
f = 1.5
yes = true
list = [1, 2, 3]
esc = "tab\tunié"

[t.sub]
x = -4

[[arr]]
k = "first"
[[arr]]
k = "second"
)",
                           &lines);
        CHECK(j["a"] == 1);
        CHECK(j["b"] == "two");
        CHECK(j["quoted key"] == "lit\\n");
        CHECK(j["f"] == 1.5);
        CHECK(j["yes"] == true);
        CHECK(j["list"] == json::array({1, 2, 3}));
        CHECK(j["esc"] == "tab\tuni\xC3\xA9");
        CHECK(j["t"]["sub"]["x"] == -4);
        REQUIRE(j["arr"].size() == 2);
        CHECK(j["arr"][1]["k"] == "second");
        CHECK(lines.at("a") == 1);
        CHECK(lines.at("t.sub.x") == 10);
        CHECK(lines.at("arr[1].k") == 15);
    }

    TEST_CASE("TOML syntax errors carry the line")
    {
        auto e = errorOf([] { parseToml("a = 1\nb = \n"); });
        CHECK(e.code() == ErrorCode::ConfigInvalid);
        CHECK(e.data()["line"] == 2);
        CHECK(errorOf([] { parseToml("a = 1\na = 2\n"); }).data()["line"] == 2);
        CHECK(errorOf([] { parseToml("s = \"open\n"); }).code() == ErrorCode::ConfigInvalid);
        CHECK(errorOf([] { parseToml("[t\nx = 1\n"); }).data()["line"] == 1);
    }

    TEST_CASE("full config")
    {
        auto cfg = parseConfig(kFull);
        CHECK(cfg.debounce == std::chrono::milliseconds(150));
        CHECK(cfg.prefetchCapacity == 8);
        CHECK(cfg.maxResults == 5);
        CHECK(cfg.historyCap == 10);
        CHECK(cfg.stateDir == std::filesystem::path("/tmp/assist-state"));
        CHECK(cfg.workspaceRoot == "/repo");
        CHECK(cfg.caps.prefixBytes == 100);
        CHECK(cfg.caps.selectionBytes == 25);
        REQUIRE(cfg.providers.size() == 2);
        CHECK(cfg.providers[0].id == "remote");
        CHECK(cfg.providers[0].kind == ProviderKind::Completion);
        CHECK(cfg.providers[0].credentialRef == "REMOTE_KEY");
        CHECK(cfg.providers[0].timeoutMs == 1500);
        CHECK(cfg.providers[1].mockSyntheticFallback);
        CHECK(cfg.providers[1].priority == -1);
        REQUIRE(cfg.templates.contains("review"));
        CHECK(cfg.templates.at("review").uses(Placeholder::Selection));
        CHECK(cfg.templates.contains("prompt_to_code"));

        auto reg = buildSyntaxRegistry(cfg);
        CHECK(reg.lookup("json").linePrefix == std::optional<std::string>("//"));
        CHECK(reg.lookup("lua").block == std::optional(std::make_pair(std::string("--[["), std::string("]]"))));
        CHECK_FALSE(reg.lookup("swift").supported());
        CHECK(reg.lookup("python").supported());
    }

    TEST_CASE("validation errors name the line and field")
    {
        struct Case {
            const char* text;
            int line;
            const char* field;
        };
        for (const auto& c : std::vector<Case>{
                 {"[[providers]]\nid = \"a\"\nkind = \"mock\"\n[[providers]]\nid = \"a\"\nkind = \"mock\"\n", 5,
                  "providers[1].id"},
                 {"[[providers]]\nid = \"a\"\nkind = \"grpc\"\n", 3, "providers[0].kind"},
                 {"[[providers]]\nid = \"a\"\nkind = \"completion\"\nendpoint = \"localhost\"\n", 4,
                  "providers[0].endpoint"},
                 {"[[providers]]\nid = \"a\"\nkind = \"mock\"\ntimeout_ms = 0\n", 4, "providers[0].timeout_ms"},
                 {"max_results = 11\n[[providers]]\nid = \"a\"\nkind = \"mock\"\n", 1, "max_results"},
                 {"debounce_ms = \"fast\"\n[[providers]]\nid = \"a\"\nkind = \"mock\"\n", 1, "debounce_ms"},
                 {"colour = 1\n[[providers]]\nid = \"a\"\nkind = \"mock\"\n", 1, "colour"},
                 {"[[providers]]\nid = \"a\"\nkind = \"mock\"\n[templates.bad]\nbody = \"{{nope}}\"\n", 5,
                  "templates.bad.body"},
                 {"[[providers]]\nid = \"a\"\nkind = \"mock\"\n[comment_syntax.x]\nblock_open = \"/*\"\n", 5,
                  "comment_syntax.x.block_close"},
             }) {
            CAPTURE(c.text);
            auto e = errorOf([&] { parseConfig(c.text); });
            CHECK(e.code() == ErrorCode::ConfigInvalid);
            CHECK(e.data()["line"] == c.line);
            CHECK(e.data()["field"] == c.field);
        }
        CHECK(errorOf([] { parseConfig("debounce_ms = 10\n"); }).data()["field"] == "providers");
    }

    TEST_CASE("secret-like keys are refused")
    {
        for (const char* key : {"api_key", "token", "password", "secret"}) {
            std::string text = std::string("[[providers]]\nid = \"a\"\nkind = \"mock\"\n") + key + " = \"sk-123\"\n";
            auto e = errorOf([&] { parseConfig(text); });
            CHECK(e.code() == ErrorCode::ConfigInvalid);
            CHECK(e.data()["line"] == 4);
            CHECK(std::string(e.what()).find("sk-123") == std::string::npos);
        }
    }

    TEST_CASE("defaults and files")
    {
        auto cfg = defaultConfig();
        REQUIRE(cfg.providers.size() == 1);
        CHECK(cfg.providers[0].kind == ProviderKind::Mock);
        CHECK(cfg.debounce == std::chrono::milliseconds(300));
        CHECK(cfg.prefetchCapacity == 32);

        auto path = std::filesystem::temp_directory_path() / "assist-config-test.toml";
        {
            std::ofstream out(path);
            out << kFull;
        }
        CHECK(loadConfig(path).providers.size() == 2);
        std::filesystem::remove(path);
        CHECK(errorOf([&] { loadConfig(path); }).code() == ErrorCode::ConfigInvalid);
    }

    TEST_CASE("state dir environment override")
    {
        Config cfg;
        cfg.stateDir = "/configured";
        ::unsetenv("ASSIST_BRIDGE_STATE_DIR");
        CHECK(effectiveStateDir(cfg) == std::filesystem::path("/configured"));
        ::setenv("ASSIST_BRIDGE_STATE_DIR", "/from-env", 1);
        CHECK(effectiveStateDir(cfg) == std::filesystem::path("/from-env"));
        ::unsetenv("ASSIST_BRIDGE_STATE_DIR");
        CHECK_FALSE(effectiveStateDir(Config{}).has_value());
    }
}
