#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace toolseq {

using json = nlohmann::json;

/// Milliseconds on a monotonic (possibly injected) clock.
using Millis = std::int64_t;

// ---------------------------------------------------------------------------
// Argument values
// ---------------------------------------------------------------------------

/// A typed scalar argument. Strings are stored trimmed; nothing else is coerced.
using ArgValue = std::variant<std::string, std::int64_t>;
using Arguments = std::map<std::string, ArgValue>;

std::string trim(std::string_view text);
ArgValue make_arg(std::string_view text);
ArgValue make_arg(std::int64_t value);
std::string to_string(const ArgValue& value);

/// Converts a JSON object of call arguments into typed scalars. Strings are
/// trimmed, integral numbers become integers, anything else is kept as its
/// compact JSON text so that kind checks can reject it.
Arguments arguments_from_json(const json& object);
json arguments_to_json(const Arguments& args);

// ---------------------------------------------------------------------------
// Tools
// ---------------------------------------------------------------------------

enum class ValueKind { String, Integer, Enum };
enum class ToolScope { Procedure, Meta, Encapsulated };

struct ParamSpec {
    std::string name;
    ValueKind kind = ValueKind::String;
    bool required = true;
    std::vector<std::string> enum_values;
    std::string description;

    friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;
    ToolScope scope = ToolScope::Procedure;
    // Set only for scope == Encapsulated: the procedure the tool runs internally.
    std::string encapsulated_procedure;

    const ParamSpec* find_param(std::string_view param) const;

    friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

bool is_valid_tool_name(std::string_view name);

/// Name-unique collection of tool specs, kept in registration order.
class ToolRegistry {
public:
    ToolRegistry() = default;
    explicit ToolRegistry(std::vector<ToolSpec> tools);

    /// Throws std::invalid_argument on a malformed or duplicate spec.
    void add(ToolSpec tool);

    /// Exact, case-sensitive match.
    std::optional<ToolSpec> lookup(std::string_view name) const;
    const ToolSpec* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    const std::vector<ToolSpec>& tools() const { return tools_; }
    std::size_t size() const { return tools_.size(); }

    /// Merges another registry; duplicate names are rejected.
    void merge(const ToolRegistry& other);

private:
    std::vector<ToolSpec> tools_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

inline std::optional<ToolSpec> registry_lookup(const ToolRegistry& registry, std::string_view name) {
    return registry.lookup(name);
}

// ---------------------------------------------------------------------------
// Procedures and traces
// ---------------------------------------------------------------------------

/// Per-parameter constraint: a concrete value or a wildcard (nullopt).
using ArgConstraints = std::map<std::string, std::optional<ArgValue>>;

struct ExpectedStep {
    std::string tool_name;
    ArgConstraints arg_constraints;

    friend bool operator==(const ExpectedStep&, const ExpectedStep&) = default;
};

struct Procedure {
    std::string procedure_id;
    std::string intent_key;
    std::vector<ExpectedStep> steps;

    std::size_t length() const { return steps.size(); }

    friend bool operator==(const Procedure&, const Procedure&) = default;
};

/// Throws std::invalid_argument unless k >= 1 and every step names a
/// procedure-scope tool of the registry.
void validate_procedure(const Procedure& procedure, const ToolRegistry& registry);

enum class CallOrigin { AgentIssued, ToolInternal };

struct ToolCallRecord {
    int step_index = 0;
    std::string tool_name;
    Arguments arguments;
    json result;
    bool success = false;
    Millis started_at = 0;
    Millis ended_at = 0;
    CallOrigin origin = CallOrigin::AgentIssued;
    // For tool_internal records: step_index of the encapsulated call that issued it.
    std::optional<int> parent_step;

    Millis duration() const { return ended_at - started_at; }

    friend bool operator==(const ToolCallRecord&, const ToolCallRecord&) = default;
};

struct ObservedTrace {
    std::vector<ToolCallRecord> records;

    std::size_t length() const { return records.size(); }
    bool empty() const { return records.empty(); }

    friend bool operator==(const ObservedTrace&, const ObservedTrace&) = default;
};

struct Intent {
    std::string intent_key;
    std::string text;
    std::map<std::string, std::string> structured;

    friend bool operator==(const Intent&, const Intent&) = default;
};

enum class Approach { A1, A2, A3, A4 };
enum class TerminatedReason { ModelFinished, TurnCapHit, BackendError };

struct LlmStep {
    Millis started_at = 0;
    Millis ended_at = 0;

    Millis duration() const { return ended_at - started_at; }

    friend bool operator==(const LlmStep&, const LlmStep&) = default;
};

enum class Outcome { Correct, WrongTool, DuplicateTool, PrematureStop, WrongOrder, NoToolCalls, OtherDeviation };
enum class WrongToolSubclass { ToolOutsideProcedure, WrongToolName, WrongParameters };

struct Verdict {
    Outcome outcome = Outcome::Correct;
    std::optional<WrongToolSubclass> wrong_tool_subclass;
    std::string detail;
    std::optional<int> offending_step;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct RunRecord {
    std::string run_id;
    std::string scenario;
    Approach approach = Approach::A1;
    std::string model_id;
    Intent intent;
    // Ground truth over procedure tools, and for A4 the agent-level expectation
    // (the single encapsulated call).
    Procedure expected;
    std::optional<Procedure> expected_agent;
    ObservedTrace trace;
    std::vector<LlmStep> llm_steps;
    std::string final_text;
    TerminatedReason terminated_reason = TerminatedReason::ModelFinished;
    std::string error;
    // Filled in by the classify stage.
    std::optional<Verdict> verdict_agent;
    std::optional<Verdict> verdict_flattened;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

enum class TraceLevel { Agent, Flattened };

/// Conformance view of a run. Agent level keeps agent-issued calls whose tool
/// is not meta-scoped; flattened level additionally swaps every encapsulated
/// call for the internal calls it recorded. Tools absent from the registry
/// (hallucinated names) are kept.
ObservedTrace effective_trace(const RunRecord& run, TraceLevel level, const ToolRegistry& registry);

// ---------------------------------------------------------------------------
// Enum names (wire and archive spelling)
// ---------------------------------------------------------------------------

std::string_view to_string(ValueKind v);
std::string_view to_string(ToolScope v);
std::string_view to_string(CallOrigin v);
std::string_view to_string(Approach v);
std::string_view to_string(TerminatedReason v);
std::string_view to_string(Outcome v);
std::string_view to_string(WrongToolSubclass v);

std::optional<ValueKind> parse_value_kind(std::string_view s);
std::optional<ToolScope> parse_tool_scope(std::string_view s);
std::optional<CallOrigin> parse_call_origin(std::string_view s);
std::optional<Approach> parse_approach(std::string_view s);
std::optional<TerminatedReason> parse_terminated_reason(std::string_view s);
std::optional<Outcome> parse_outcome(std::string_view s);
std::optional<WrongToolSubclass> parse_wrong_tool_subclass(std::string_view s);

}  // namespace toolseq
