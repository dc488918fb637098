#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "toolseq/agent.hpp"
#include "toolseq/clock.hpp"
#include "toolseq/kpi.hpp"
#include "toolseq/remote_backend.hpp"
#include "toolseq/scripted_backend.hpp"
#include "toolseq/toolsim.hpp"
#include "toolseq/wire.hpp"

namespace toolseq::experiment {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kPartial = 2;
}  // namespace exit_code

struct ScriptedModelConfig {
    agent::FaultProgram fault;
    // When set, the fault step is max(1, floor(k * fraction)) instead of fault.step.
    std::optional<double> step_fraction;
    double fault_rate = 1.0;
    double stop_probability = 0.0;
};

struct ModelConfig {
    std::string id;
    bool scripted = true;
    ScriptedModelConfig script;
    agent::EndpointConfig endpoint;
};

struct ScenarioConfig {
    std::string scenario = "A";  // "A" or "B"
    std::vector<Approach> approaches;
    std::vector<ModelConfig> models;
    int runs_per_cell = 50;
    std::vector<int> k_values;
    std::uint64_t seed = 42;
    ClockKind clock = ClockKind::Steady;
    int workers = 1;
    std::optional<int> max_turns;
    double tool_timeout_seconds = 10.0;
    bool fold_other_into_wrong_order = false;

    // Scenario A
    std::vector<std::pair<std::string, std::string>> intents;  // (ue_id, session_type)
    std::shared_ptr<const sim::FixtureSet> fixtures;

    agent::ScenarioPrompts prompts;
};

/// Parses a scenario config document, filling scenario defaults. Throws ConfigError.
ScenarioConfig parse_config(const json& doc);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Global options shared by every subcommand.
struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "out";
    std::string servers;  // empty: in-process loopback
    std::optional<int> workers;
};

void apply_overrides(ScenarioConfig& config, const GlobalOptions& options);

/// Ground truth and servers for one scenario, shared by every run of a batch.
class ScenarioRuntime {
public:
    ScenarioRuntime(const ScenarioConfig& config, const std::filesystem::path& out_dir, const std::string& servers);

    const ToolRegistry& registry() const { return registry_; }
    /// Every (intent, expected procedure) of the scenario, keyed by a short tag.
    struct Case {
        std::string tag;
        Intent intent;
        Procedure expected;
    };
    const std::vector<Case>& cases() const { return cases_; }
    const agent::ScenarioPrompts& prompts() const { return prompts_; }
    const agent::ServerMap& clients() const { return clients_; }
    std::shared_ptr<const sim::KpiToolPool> pool() const { return pool_; }

    /// In-process servers (present with loopback transport or for `serve`).
    std::vector<wire::ToolServer*> local_servers() const;

private:
    std::string scenario_;
    ToolRegistry registry_;
    std::vector<Case> cases_;
    agent::ScenarioPrompts prompts_;
    std::shared_ptr<const sim::KpiToolPool> pool_;
    std::vector<std::unique_ptr<wire::ToolServer>> servers_;
    agent::ServerMap clients_;
};

/// Registry used to classify a scenario's records.
ToolRegistry scenario_registry(const std::string& scenario);

/// Attaches verdict_agent, and for A4 runs verdict_flattened, to a record.
void annotate(RunRecord& run, const ToolRegistry& registry);

int cmd_gen(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log);
int cmd_run(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log);
int cmd_classify(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log);
int cmd_report(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log);
/// Serves the scenario's tool servers on the --servers endpoints until `stop` becomes true.
int cmd_serve(const ScenarioConfig& config, const GlobalOptions& options, std::ostream& log,
              const std::atomic<bool>& stop);

inline constexpr const char* kRunsFile = "runs.jsonl";
inline constexpr const char* kClassifiedFile = "classified.jsonl";

}  // namespace toolseq::experiment
