#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace assist {

/// Responses seen so far in a scenario, indexed by step (request id - 1).
/// Each entry is the whole response frame, parsed.
using ScenarioHistory = std::vector<nlohmann::json>;

struct ScenarioExpectation {
    std::string what;
    /// Returns an empty string on success, otherwise the failure detail.
    std::function<std::string(const nlohmann::json& response, const ScenarioHistory&)> check;
};

/// One wire request. Request ids are assigned from 1 in step order; params
/// may refer to earlier responses (session ids, patches, versions).
struct ScenarioStep {
    std::string method;
    std::function<nlohmann::json(const ScenarioHistory&)> params;
    std::vector<ScenarioExpectation> expectations;
};

struct Scenario {
    std::string name;
    std::vector<std::string> prompts;
    std::vector<ScenarioStep> script;
};

struct ScenarioCheck {
    std::size_t step = 0;  // 1-based
    std::string what;
    bool passed = false;
    std::string detail;
};

struct ScenarioResult {
    std::string name;
    bool passed = false;
    /// ">> " request and "<< " response or notification lines, then one
    /// "ok" / "FAIL" line per expectation, in order. Byte-identical across runs.
    std::string transcript;
    std::vector<ScenarioCheck> checks;
};

/// The shipped case-study scenarios, in run order.
const std::vector<Scenario>& scenarios();
std::vector<std::string> scenarioNames();

/// Drives one scenario through the full wire path against the built-in mock
/// provider. Throws ScenarioUnknown for an unregistered name.
ScenarioResult runScenario(const std::string& name);
ScenarioResult runScenario(const Scenario& scenario);

}  // namespace assist
