#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toolseq/agent.hpp"

namespace toolseq::agent {

/// Fills a parameter from a field of the most recent result of another tool.
struct Binding {
    std::string param;
    std::string source_tool;
    std::string field;
};

struct PlannedCall {
    std::string name;
    Arguments arguments;
    std::vector<Binding> bindings;
    // Take arguments from matching structured intent fields at emission time
    // (used for injected calls to tools outside the procedure).
    bool arguments_from_intent = false;
};

enum class FaultKind { None, StopAfter, DuplicateStep, SwapSteps, HallucinateNameAt, DropParamAt, CallOutsideAt, NoCalls };

std::string_view to_string(FaultKind kind);
std::optional<FaultKind> parse_fault_kind(std::string_view s);

/// Step indices are 1-based positions in the planned call list.
struct FaultProgram {
    FaultKind kind = FaultKind::None;
    int step = 0;
    std::string tool;  // CallOutsideAt: the tool to inject; DropParamAt: optional param name

    static FaultProgram none() { return {}; }
    static FaultProgram stop_after(int j) { return {FaultKind::StopAfter, j, {}}; }
    static FaultProgram duplicate_step(int j) { return {FaultKind::DuplicateStep, j, {}}; }
    static FaultProgram swap_steps(int j) { return {FaultKind::SwapSteps, j, {}}; }
    static FaultProgram hallucinate_name_at(int j) { return {FaultKind::HallucinateNameAt, j, {}}; }
    static FaultProgram drop_param_at(int j, std::string param = {}) { return {FaultKind::DropParamAt, j, std::move(param)}; }
    static FaultProgram call_outside_at(int j, std::string tool) { return {FaultKind::CallOutsideAt, j, std::move(tool)}; }
    static FaultProgram no_calls() { return {FaultKind::NoCalls, 0, {}}; }
};

/// Deterministic name that no registry in this project defines.
std::string hallucinated_name(const std::string& name);

/// Applies a fault program to an ideal call list. Throws std::out_of_range
/// when the step index does not fit the list.
std::vector<PlannedCall> apply_fault(std::vector<PlannedCall> calls, const FaultProgram& fault);

struct ScriptOptions {
    // Call the repository meta tool first (approach A2).
    bool retrieve_first = false;
    std::string retrieval_tool = "get_procedures";
    FaultProgram fault;
    // Independent per-step chance of ending the run before that step.
    double stop_probability = 0;
    std::uint64_t stop_seed = 0;
};

/// Replays a fixed playbook: one tool call per turn, then a summary turn. The
/// position is derived from the number of assistant turns already in the
/// history, so one instance serves one run at a time.
class ScriptedBackend final : public ModelBackend {
public:
    ScriptedBackend(std::string model_id, std::vector<PlannedCall> playbook, Intent intent, ScriptOptions options = {});

    std::string model_id() const override { return model_id_; }
    AssistantTurn next_turn(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) override;

    /// Calls this backend will emit, retrieval included, before the summary.
    const std::vector<PlannedCall>& turns() const { return turns_; }

private:
    std::string model_id_;
    Intent intent_;
    std::vector<PlannedCall> turns_;
};

/// Ideal calls for a procedure: constrained values become arguments;
/// wildcard parameters are left for the caller to bind.
std::vector<PlannedCall> playbook_from_procedure(const Procedure& procedure);

/// Scenario-A playbook: the allocation address comes from the static-IP or
/// DHCP result, and dual-stack sessions pass the IPv6 address as secondary.
std::vector<PlannedCall> allocation_playbook(const Procedure& procedure);

}  // namespace toolseq::agent
