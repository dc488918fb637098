#include "toolseq/model.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace toolseq {

std::string trim(std::string_view text) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = text.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(ws);
    return std::string(text.substr(first, last - first + 1));
}

ArgValue make_arg(std::string_view text) { return ArgValue{trim(text)}; }
ArgValue make_arg(std::int64_t value) { return ArgValue{value}; }

std::string to_string(const ArgValue& value) {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    return std::to_string(std::get<std::int64_t>(value));
}

Arguments arguments_from_json(const json& object) {
    Arguments args;
    if (!object.is_object()) return args;
    for (const auto& [key, value] : object.items()) {
        if (value.is_string()) {
            args.emplace(key, make_arg(value.get<std::string>()));
        } else if (value.is_number_integer()) {
            args.emplace(key, make_arg(value.get<std::int64_t>()));
        } else {
            args.emplace(key, ArgValue{value.dump()});
        }
    }
    return args;
}

json arguments_to_json(const Arguments& args) {
    json out = json::object();
    for (const auto& [key, value] : args) {
        std::visit([&](const auto& v) { out[key] = v; }, value);
    }
    return out;
}

const ParamSpec* ToolSpec::find_param(std::string_view param) const {
    for (const auto& p : params)
        if (p.name == param) return &p;
    return nullptr;
}

bool is_valid_tool_name(std::string_view name) {
    if (name.empty() || name.front() < 'a' || name.front() > 'z') return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

ToolRegistry::ToolRegistry(std::vector<ToolSpec> tools) {
    for (auto& t : tools) add(std::move(t));
}

void ToolRegistry::add(ToolSpec tool) {
    if (!is_valid_tool_name(tool.name))
        throw std::invalid_argument("invalid tool name '" + tool.name + "'");
    if (index_.count(tool.name) != 0)
        throw std::invalid_argument("duplicate tool name '" + tool.name + "'");
    for (std::size_t i = 0; i < tool.params.size(); ++i) {
        for (std::size_t j = i + 1; j < tool.params.size(); ++j) {
            if (tool.params[i].name == tool.params[j].name)
                throw std::invalid_argument("tool '" + tool.name + "' declares parameter '" +
                                            tool.params[i].name + "' twice");
        }
    }
    if (tool.scope == ToolScope::Encapsulated && tool.encapsulated_procedure.empty())
        throw std::invalid_argument("encapsulated tool '" + tool.name + "' names no procedure");
    index_.emplace(tool.name, tools_.size());
    tools_.push_back(std::move(tool));
}

std::optional<ToolSpec> ToolRegistry::lookup(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    return std::nullopt;
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : &tools_[it->second];
}

void ToolRegistry::merge(const ToolRegistry& other) {
    for (const auto& t : other.tools()) add(t);
}

void validate_procedure(const Procedure& procedure, const ToolRegistry& registry) {
    if (procedure.steps.empty())
        throw std::invalid_argument("procedure '" + procedure.procedure_id + "' has no steps");
    for (const auto& step : procedure.steps) {
        const auto* tool = registry.find(step.tool_name);
        if (tool == nullptr)
            throw std::invalid_argument("procedure '" + procedure.procedure_id + "' references unknown tool '" +
                                        step.tool_name + "'");
        if (tool->scope != ToolScope::Procedure && tool->scope != ToolScope::Encapsulated)
            throw std::invalid_argument("procedure '" + procedure.procedure_id + "' references meta tool '" +
                                        step.tool_name + "'");
    }
}

ObservedTrace effective_trace(const RunRecord& run, TraceLevel level, const ToolRegistry& registry) {
    ObservedTrace out;
    const auto& records = run.trace.records;
    for (const auto& rec : records) {
        if (rec.origin != CallOrigin::AgentIssued) continue;
        const auto* tool = registry.find(rec.tool_name);
        if (tool != nullptr && tool->scope == ToolScope::Meta) continue;
        if (level == TraceLevel::Flattened && tool != nullptr && tool->scope == ToolScope::Encapsulated) {
            for (const auto& sub : records) {
                if (sub.origin == CallOrigin::ToolInternal && sub.parent_step == rec.step_index)
                    out.records.push_back(sub);
            }
            continue;
        }
        out.records.push_back(rec);
    }
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const ToolCallRecord& a, const ToolCallRecord& b) { return a.started_at < b.started_at; });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table) {
    for (const auto& [value, name] : table)
        if (name == s) return value;
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::array<std::pair<E, std::string_view>, N>& table) {
    for (const auto& [value, name] : table)
        if (value == v) return name;
    return "?";
}

constexpr std::array kValueKinds{
    std::pair{ValueKind::String, std::string_view{"string"}},
    std::pair{ValueKind::Integer, std::string_view{"integer"}},
    std::pair{ValueKind::Enum, std::string_view{"enum"}},
};
constexpr std::array kScopes{
    std::pair{ToolScope::Procedure, std::string_view{"procedure"}},
    std::pair{ToolScope::Meta, std::string_view{"meta"}},
    std::pair{ToolScope::Encapsulated, std::string_view{"encapsulated"}},
};
constexpr std::array kOrigins{
    std::pair{CallOrigin::AgentIssued, std::string_view{"agent_issued"}},
    std::pair{CallOrigin::ToolInternal, std::string_view{"tool_internal"}},
};
constexpr std::array kApproaches{
    std::pair{Approach::A1, std::string_view{"A1"}},
    std::pair{Approach::A2, std::string_view{"A2"}},
    std::pair{Approach::A3, std::string_view{"A3"}},
    std::pair{Approach::A4, std::string_view{"A4"}},
};
constexpr std::array kTerminated{
    std::pair{TerminatedReason::ModelFinished, std::string_view{"model_finished"}},
    std::pair{TerminatedReason::TurnCapHit, std::string_view{"turn_cap_hit"}},
    std::pair{TerminatedReason::BackendError, std::string_view{"backend_error"}},
};
constexpr std::array kOutcomes{
    std::pair{Outcome::Correct, std::string_view{"Correct"}},
    std::pair{Outcome::WrongTool, std::string_view{"WrongTool"}},
    std::pair{Outcome::DuplicateTool, std::string_view{"DuplicateTool"}},
    std::pair{Outcome::PrematureStop, std::string_view{"PrematureStop"}},
    std::pair{Outcome::WrongOrder, std::string_view{"WrongOrder"}},
    std::pair{Outcome::NoToolCalls, std::string_view{"NoToolCalls"}},
    std::pair{Outcome::OtherDeviation, std::string_view{"OtherDeviation"}},
};
constexpr std::array kSubclasses{
    std::pair{WrongToolSubclass::ToolOutsideProcedure, std::string_view{"tool_outside_procedure"}},
    std::pair{WrongToolSubclass::WrongToolName, std::string_view{"wrong_tool_name"}},
    std::pair{WrongToolSubclass::WrongParameters, std::string_view{"wrong_parameters"}},
};

}  // namespace

std::string_view to_string(ValueKind v) { return enum_name(v, kValueKinds); }
std::string_view to_string(ToolScope v) { return enum_name(v, kScopes); }
std::string_view to_string(CallOrigin v) { return enum_name(v, kOrigins); }
std::string_view to_string(Approach v) { return enum_name(v, kApproaches); }
std::string_view to_string(TerminatedReason v) { return enum_name(v, kTerminated); }
std::string_view to_string(Outcome v) { return enum_name(v, kOutcomes); }
std::string_view to_string(WrongToolSubclass v) { return enum_name(v, kSubclasses); }

std::optional<ValueKind> parse_value_kind(std::string_view s) { return parse_enum(s, kValueKinds); }
std::optional<ToolScope> parse_tool_scope(std::string_view s) { return parse_enum(s, kScopes); }
std::optional<CallOrigin> parse_call_origin(std::string_view s) { return parse_enum(s, kOrigins); }
std::optional<Approach> parse_approach(std::string_view s) { return parse_enum(s, kApproaches); }
std::optional<TerminatedReason> parse_terminated_reason(std::string_view s) { return parse_enum(s, kTerminated); }
std::optional<Outcome> parse_outcome(std::string_view s) { return parse_enum(s, kOutcomes); }
std::optional<WrongToolSubclass> parse_wrong_tool_subclass(std::string_view s) { return parse_enum(s, kSubclasses); }

}  // namespace toolseq
