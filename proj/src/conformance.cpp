#include "toolseq/conformance.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace toolseq {

std::string_view to_string(CallValidity v) {
    switch (v) {
        case CallValidity::Ok: return "ok";
        case CallValidity::UnknownName: return "unknown_name";
        case CallValidity::OutsideProcedure: return "outside_procedure";
        case CallValidity::BadParams: return "bad_params";
    }
    return "?";
}

bool satisfies_schema(const Arguments& args, const ToolSpec& tool) {
    for (const auto& param : tool.params) {
        const auto it = args.find(param.name);
        if (it == args.end()) {
            if (param.required) return false;
            continue;
        }
        const auto& value = it->second;
        switch (param.kind) {
            case ValueKind::Integer:
                if (!std::holds_alternative<std::int64_t>(value)) return false;
                break;
            case ValueKind::String:
                if (!std::holds_alternative<std::string>(value)) return false;
                break;
            case ValueKind::Enum: {
                const auto* s = std::get_if<std::string>(&value);
                if (s == nullptr) return false;
                if (std::find(param.enum_values.begin(), param.enum_values.end(), *s) == param.enum_values.end())
                    return false;
                break;
            }
        }
    }
    return true;
}

bool satisfies_constraints(const Arguments& args, const ExpectedStep& step) {
    for (const auto& [param, wanted] : step.arg_constraints) {
        const auto it = args.find(param);
        if (it == args.end()) return false;
        if (wanted && it->second != *wanted) return false;
    }
    return true;
}

namespace {

bool position_matches(const ToolCallRecord& call, const ExpectedStep& step, const ToolRegistry* registry) {
    if (call.tool_name != step.tool_name) return false;
    if (!satisfies_constraints(call.arguments, step)) return false;
    if (registry != nullptr) {
        const auto* tool = registry->find(call.tool_name);
        if (tool != nullptr && !satisfies_schema(call.arguments, *tool)) return false;
    }
    return true;
}

Verdict make_verdict(Outcome outcome, std::string detail, std::optional<int> step = std::nullopt) {
    Verdict v;
    v.outcome = outcome;
    v.detail = std::move(detail);
    v.offending_step = step;
    return v;
}

WrongToolSubclass subclass_for(CallValidity v) {
    switch (v) {
        case CallValidity::UnknownName: return WrongToolSubclass::WrongToolName;
        case CallValidity::OutsideProcedure: return WrongToolSubclass::ToolOutsideProcedure;
        default: return WrongToolSubclass::WrongParameters;
    }
}

}  // namespace

int reliability(const Procedure& expected, const ObservedTrace& observed, const ToolRegistry* registry) {
    if (expected.length() != observed.length()) return 0;
    for (std::size_t j = 0; j < expected.steps.size(); ++j) {
        if (!position_matches(observed.records[j], expected.steps[j], registry)) return 0;
    }
    return 1;
}

CallValidity validate_call(const ToolCallRecord& call, const Procedure& expected, const ToolRegistry& registry) {
    const auto* tool = registry.find(call.tool_name);
    if (tool == nullptr) return CallValidity::UnknownName;

    bool in_procedure = false;
    for (const auto& step : expected.steps) {
        if (step.tool_name != call.tool_name) continue;
        in_procedure = true;
        if (satisfies_constraints(call.arguments, step) && satisfies_schema(call.arguments, *tool))
            return CallValidity::Ok;
    }
    return in_procedure ? CallValidity::BadParams : CallValidity::OutsideProcedure;
}

Verdict classify(const Procedure& expected, const ObservedTrace& observed, const ToolRegistry& registry) {
    const auto& calls = observed.records;
    const auto k = expected.length();
    const auto k_hat = observed.length();

    if (calls.empty()) return make_verdict(Outcome::NoToolCalls, "no tool was invoked");

    for (const auto& call : calls) {
        const auto validity = validate_call(call, expected, registry);
        if (validity == CallValidity::Ok) continue;
        auto v = make_verdict(Outcome::WrongTool,
                              fmt::format("step {} '{}': {}", call.step_index, call.tool_name, to_string(validity)),
                              call.step_index);
        v.wrong_tool_subclass = subclass_for(validity);
        return v;
    }

    std::map<std::string, int> allowed;
    for (const auto& step : expected.steps) ++allowed[step.tool_name];
    std::map<std::string, int> seen;
    for (const auto& call : calls) {
        if (++seen[call.tool_name] > allowed[call.tool_name]) {
            return make_verdict(Outcome::DuplicateTool,
                                fmt::format("'{}' invoked {} time(s), procedure requires {}", call.tool_name,
                                            std::count_if(calls.begin(), calls.end(),
                                                          [&](const auto& c) { return c.tool_name == call.tool_name; }),
                                            allowed[call.tool_name]),
                                call.step_index);
        }
    }

    if (k_hat < k) {
        bool prefix = true;
        for (std::size_t j = 0; j < k_hat && prefix; ++j) prefix = position_matches(calls[j], expected.steps[j], &registry);
        if (prefix) {
            return make_verdict(Outcome::PrematureStop,
                                fmt::format("stopped after {} of {} steps; next expected '{}'", k_hat, k,
                                            expected.steps[k_hat].tool_name));
        }
    }

    const bool correct = reliability(expected, observed, &registry) == 1;

    // Duplicates are ruled out above, so seen == allowed is multiset equality.
    if (!correct && seen == allowed) {
        std::optional<int> first_diff;
        for (std::size_t j = 0; j < k; ++j) {
            if (!position_matches(calls[j], expected.steps[j], &registry)) {
                first_diff = calls[j].step_index;
                break;
            }
        }
        return make_verdict(Outcome::WrongOrder, "all required tools invoked in a different order", first_diff);
    }

    if (correct) return make_verdict(Outcome::Correct, "observed trace matches the procedure");

    std::optional<int> first_diff;
    for (std::size_t j = 0; j < k_hat; ++j) {
        if (j >= k || !position_matches(calls[j], expected.steps[j], &registry)) {
            first_diff = calls[j].step_index;
            break;
        }
    }
    return make_verdict(Outcome::OtherDeviation,
                        fmt::format("{} of {} steps executed without a prefix, permutation or exact match", k_hat, k),
                        first_diff);
}

}  // namespace toolseq
