#include "toolseq/scripted_backend.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "toolseq/kpi.hpp"
#include "toolseq/toolsim.hpp"

namespace toolseq::agent {

std::string_view to_string(FaultKind kind) {
    switch (kind) {
        case FaultKind::None: return "none";
        case FaultKind::StopAfter: return "stop_after";
        case FaultKind::DuplicateStep: return "duplicate_step";
        case FaultKind::SwapSteps: return "swap_steps";
        case FaultKind::HallucinateNameAt: return "hallucinate_name_at";
        case FaultKind::DropParamAt: return "drop_param_at";
        case FaultKind::CallOutsideAt: return "call_outside_at";
        case FaultKind::NoCalls: return "no_calls";
    }
    return "?";
}

std::optional<FaultKind> parse_fault_kind(std::string_view s) {
    for (auto k : {FaultKind::None, FaultKind::StopAfter, FaultKind::DuplicateStep, FaultKind::SwapSteps,
                   FaultKind::HallucinateNameAt, FaultKind::DropParamAt, FaultKind::CallOutsideAt, FaultKind::NoCalls})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::string hallucinated_name(const std::string& name) { return name + "_check"; }

std::vector<PlannedCall> apply_fault(std::vector<PlannedCall> calls, const FaultProgram& fault) {
    const auto n = static_cast<int>(calls.size());
    auto require = [&](int lo, int hi) {
        if (fault.step < lo || fault.step > hi)
            throw std::out_of_range(fmt::format("fault {} step {} outside [{}, {}]", to_string(fault.kind), fault.step,
                                                lo, hi));
    };
    switch (fault.kind) {
        case FaultKind::None: break;
        case FaultKind::StopAfter:
            require(0, n);
            calls.resize(static_cast<std::size_t>(fault.step));
            break;
        case FaultKind::DuplicateStep: {
            require(1, n);
            const auto copy = calls[fault.step - 1];
            calls.insert(calls.begin() + fault.step, copy);
            break;
        }
        case FaultKind::SwapSteps:
            require(1, n - 1);
            std::swap(calls[fault.step - 1], calls[fault.step]);
            break;
        case FaultKind::HallucinateNameAt:
            require(1, n);
            calls[fault.step - 1].name = hallucinated_name(calls[fault.step - 1].name);
            break;
        case FaultKind::DropParamAt: {
            require(1, n);
            auto& call = calls[fault.step - 1];
            const auto param = fault.tool.empty() ? (call.arguments.empty() ? std::string{} : call.arguments.begin()->first)
                                                  : fault.tool;
            call.arguments.erase(param);
            std::erase_if(call.bindings, [&](const Binding& b) { return b.param == param; });
            break;
        }
        case FaultKind::CallOutsideAt:
            require(1, n + 1);
            calls.insert(calls.begin() + (fault.step - 1), PlannedCall{fault.tool, {}, {}, true});
            break;
        case FaultKind::NoCalls: calls.clear(); break;
    }
    return calls;
}

ScriptedBackend::ScriptedBackend(std::string model_id, std::vector<PlannedCall> playbook, Intent intent,
                                 ScriptOptions options)
    : model_id_(std::move(model_id)), intent_(std::move(intent)) {
    auto calls = apply_fault(std::move(playbook), options.fault);
    if (options.stop_probability > 0) {
        for (std::size_t i = 0; i < calls.size(); ++i) {
            if (sim::unit_interval(sim::keyed_draw(options.stop_seed, "scripted-stop", i)) < options.stop_probability) {
                calls.resize(i);
                break;
            }
        }
    }
    if (options.retrieve_first && options.fault.kind != FaultKind::NoCalls)
        turns_.push_back(PlannedCall{options.retrieval_tool, {}, {}, false});
    turns_.insert(turns_.end(), calls.begin(), calls.end());
}

namespace {

// Most recent result of `tool` in the history, parsed.
std::optional<json> last_result_of(const std::vector<ChatMessage>& history, const std::string& tool) {
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (it->role == Role::Tool && it->name == tool) {
            auto parsed = json::parse(it->content, nullptr, false);
            if (!parsed.is_discarded()) return parsed;
        }
    }
    return std::nullopt;
}

}  // namespace

AssistantTurn ScriptedBackend::next_turn(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) {
    const auto position = static_cast<std::size_t>(
        std::count_if(history.begin(), history.end(), [](const ChatMessage& m) { return m.role == Role::Assistant; }));

    AssistantTurn turn;
    if (position >= turns_.size()) {
        const auto executed = std::count_if(history.begin(), history.end(),
                                            [](const ChatMessage& m) { return m.role == Role::Tool; });
        turn.text = executed == 0 ? std::string("No tool call is needed for this request.")
                                  : fmt::format("Procedure finished after {} tool call(s).", executed);
        return turn;
    }

    const auto& planned = turns_[position];
    Arguments args = planned.arguments;
    if (planned.arguments_from_intent) {
        const auto spec = std::find_if(tools.begin(), tools.end(), [&](const ToolSpec& t) { return t.name == planned.name; });
        if (spec != tools.end()) {
            for (const auto& p : spec->params) {
                if (const auto f = intent_.structured.find(p.name); f != intent_.structured.end())
                    args.emplace(p.name, make_arg(f->second));
            }
        } else {
            for (const auto& [key, value] : intent_.structured) args.emplace(key, make_arg(value));
        }
    }
    for (const auto& b : planned.bindings) {
        const auto result = last_result_of(history, b.source_tool);
        if (!result || !result->is_object()) continue;
        const auto field = result->find(b.field);
        if (field != result->end() && field->is_string()) args[b.param] = make_arg(field->get<std::string>());
    }
    turn.tool_calls.push_back(
        ToolCallRequest{fmt::format("call_{}", position + 1), planned.name, arguments_to_json(args).dump()});
    return turn;
}

std::vector<PlannedCall> playbook_from_procedure(const Procedure& procedure) {
    std::vector<PlannedCall> out;
    for (const auto& step : procedure.steps) {
        PlannedCall call;
        call.name = step.tool_name;
        for (const auto& [param, value] : step.arg_constraints)
            if (value) call.arguments.emplace(param, *value);
        out.push_back(std::move(call));
    }
    return out;
}

std::vector<PlannedCall> allocation_playbook(const Procedure& procedure) {
    auto calls = playbook_from_procedure(procedure);
    const auto has = [&](const char* tool) {
        return std::any_of(calls.begin(), calls.end(), [&](const PlannedCall& c) { return c.name == tool; });
    };
    const bool v4 = has(sim::kDhcpV4);
    const bool v6 = has(sim::kDhcpV6);
    for (auto& call : calls) {
        if (call.name != sim::kRegistry) continue;
        if (v4) call.bindings.push_back({"address", sim::kDhcpV4, "address"});
        else if (v6) call.bindings.push_back({"address", sim::kDhcpV6, "address"});
        else call.bindings.push_back({"address", sim::kStatic, "static_ip"});
        if (v4 && v6) call.bindings.push_back({"secondary_address", sim::kDhcpV6, "address"});
    }
    return calls;
}

}  // namespace toolseq::agent
