#include "toolseq/agent.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace toolseq::agent {

std::vector<ParsedCall> parse_tool_calls(const AssistantTurn& turn) {
    std::vector<ParsedCall> out;
    out.reserve(turn.tool_calls.size());
    for (const auto& req : turn.tool_calls) {
        ParsedCall call{req.id, trim(req.name), {}, false};
        const auto blob = trim(req.arguments);
        if (!blob.empty()) {
            const auto parsed = json::parse(blob, nullptr, /*allow_exceptions=*/false);
            if (parsed.is_object()) call.arguments = arguments_from_json(parsed);
            else call.malformed_arguments = true;
        }
        out.push_back(std::move(call));
    }
    return out;
}

AssistantTurn assistant_turn_from_json(const json& message) {
    AssistantTurn turn;
    if (const auto it = message.find("content"); it != message.end() && it->is_string()) turn.text = it->get<std::string>();
    const auto calls = message.find("tool_calls");
    if (calls == message.end() || !calls->is_array()) return turn;
    for (const auto& c : *calls) {
        ToolCallRequest req;
        req.id = c.value("id", std::string{});
        const auto fn = c.value("function", json::object());
        req.name = fn.value("name", std::string{});
        const auto args = fn.find("arguments");
        if (args == fn.end() || args->is_null()) req.arguments.clear();
        else if (args->is_string()) req.arguments = args->get<std::string>();
        else req.arguments = args->dump();
        turn.tool_calls.push_back(std::move(req));
    }
    return turn;
}

// ---------------------------------------------------------------------------

std::string render_steps(const Procedure& procedure) {
    std::string out;
    int n = 1;
    for (const auto& step : procedure.steps) {
        std::string args;
        for (const auto& [param, value] : step.arg_constraints) {
            if (!args.empty()) args += ", ";
            args += value ? fmt::format("{}={}", param, to_string(*value))
                          : fmt::format("{}=<value from an earlier step>", param);
        }
        out += fmt::format("{}. {}({})\n", n++, step.tool_name, args);
    }
    return out;
}

namespace {

std::string substitute(const std::string& text, const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) break;
        const auto close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        out.append(text, pos, open - pos);
        const auto key = text.substr(open + 2, close - open - 2);
        const auto it = vars.find(key);
        if (it == vars.end()) throw std::invalid_argument("prompt template references unknown field '" + key + "'");
        out += it->second;
        pos = close + 2;
    }
    out.append(text, pos, std::string::npos);
    return out;
}

bool mentions(const PromptPair& p, const char* field) {
    const auto needle = fmt::format("{{{{{}}}}}", field);
    return p.system.find(needle) != std::string::npos || p.user.find(needle) != std::string::npos;
}

}  // namespace

ApproachContext build_context(Approach approach, const Intent& intent, const Procedure& procedure,
                              const ScenarioPrompts& prompts) {
    const auto it = prompts.templates.find(approach);
    if (it == prompts.templates.end())
        throw std::invalid_argument(fmt::format("no prompt template for approach {}", to_string(approach)));
    const auto& tpl = it->second;

    if ((approach == Approach::A1 || approach == Approach::A2) && mentions(tpl, "catalog") && prompts.catalog.empty())
        throw std::invalid_argument(fmt::format("approach {} needs a procedure catalog rendering", to_string(approach)));
    if (approach == Approach::A1 && !mentions(tpl, "catalog"))
        throw std::invalid_argument("approach A1 template must embed {{catalog}}");
    if (approach == Approach::A3 && !mentions(tpl, "steps"))
        throw std::invalid_argument("approach A3 template must embed {{steps}}");
    if (approach == Approach::A4 && (mentions(tpl, "steps") || mentions(tpl, "catalog")))
        throw std::invalid_argument("approach A4 template must not carry procedure text");

    std::map<std::string, std::string> vars(intent.structured.begin(), intent.structured.end());
    vars["intent_text"] = intent.text;
    vars["catalog"] = prompts.catalog;
    vars["steps"] = render_steps(procedure);

    ApproachContext ctx;
    ctx.approach = approach;
    ctx.system_prompt = substitute(tpl.system, vars);
    ctx.user_prompt = substitute(tpl.user, vars);
    ctx.visible_servers = {approach == Approach::A4 ? prompts.encapsulated_server : prompts.procedure_server};
    ctx.repository_visible = approach == Approach::A2;
    return ctx;
}

// ---------------------------------------------------------------------------

namespace {

struct Route {
    ToolSpec spec;
    std::shared_ptr<wire::ToolClient> client;
};

}  // namespace

RunRecord run_agent(const ApproachContext& context, const Intent& intent, ModelBackend& backend,
                    const ServerMap& servers, const Limits& limits, Clock& clock, const std::string& session) {
    if (limits.max_turns < 1) throw std::invalid_argument("max_turns must be at least 1");

    RunRecord run;
    run.approach = context.approach;
    run.model_id = backend.model_id();
    run.intent = intent;

    std::vector<ToolSpec> visible;
    std::map<std::string, Route> routes;
    std::shared_ptr<wire::ToolClient> fallback;
    try {
        for (const int id : context.visible_servers) {
            const auto it = servers.find(id);
            if (it == servers.end()) throw std::runtime_error(fmt::format("tool server {} not configured", id));
            if (!fallback) fallback = it->second;
            for (auto& spec : it->second->list_tools(session)) {
                if (spec.scope == ToolScope::Meta && !context.repository_visible) continue;
                visible.push_back(spec);
                routes.emplace(spec.name, Route{std::move(spec), it->second});
            }
        }
    } catch (const std::exception& e) {
        run.terminated_reason = TerminatedReason::BackendError;
        run.error = std::string("tool discovery failed: ") + e.what();
        return run;
    }

    std::vector<ChatMessage> history;
    history.push_back(ChatMessage{Role::System, context.system_prompt, {}, {}, {}});
    history.push_back(ChatMessage{Role::User, context.user_prompt, {}, {}, {}});

    auto& records = run.trace.records;
    int step = 0;
    run.terminated_reason = TerminatedReason::TurnCapHit;
    for (int turn_no = 0; turn_no < limits.max_turns; ++turn_no) {
        AssistantTurn turn;
        LlmStep llm;
        llm.started_at = clock.now();
        try {
            turn = backend.next_turn(history, visible);
        } catch (const BackendError& e) {
            run.terminated_reason = TerminatedReason::BackendError;
            run.error = e.what();
            return run;
        }
        llm.ended_at = clock.now();
        run.llm_steps.push_back(llm);

        auto calls = parse_tool_calls(turn);
        ChatMessage assistant{Role::Assistant, turn.text, turn.tool_calls, {}, {}};
        for (std::size_t i = 0; i < assistant.tool_calls.size(); ++i) {
            if (assistant.tool_calls[i].id.empty()) {
                assistant.tool_calls[i].id = fmt::format("call_{}", step + 1 + static_cast<int>(i));
                calls[i].id = assistant.tool_calls[i].id;
            }
        }
        history.push_back(std::move(assistant));

        if (calls.empty()) {
            run.final_text = turn.text;
            run.terminated_reason = TerminatedReason::ModelFinished;
            return run;
        }

        for (const auto& call : calls) {
            const auto route = routes.find(call.name);
            auto client = route != routes.end() ? route->second.client : fallback;
            const auto outcome = client->call_tool(call.name, call.arguments, session, clock);

            ToolCallRecord rec;
            rec.step_index = ++step;
            rec.tool_name = call.name;
            rec.arguments = call.arguments;
            rec.result = outcome.content;
            rec.success = outcome.success;
            rec.started_at = outcome.started_at;
            rec.ended_at = outcome.ended_at;
            rec.origin = CallOrigin::AgentIssued;
            const int parent = rec.step_index;
            const Millis parent_start = rec.started_at;
            const Millis parent_end = rec.ended_at;
            records.push_back(std::move(rec));

            // Internal timestamps come from the server clock; shift them into
            // the parent's envelope.
            if (!outcome.internal_calls.empty()) {
                const Millis base = outcome.internal_calls.front().started_at;
                for (auto sub : outcome.internal_calls) {
                    sub.step_index = ++step;
                    sub.origin = CallOrigin::ToolInternal;
                    sub.parent_step = parent;
                    sub.started_at = std::min(parent_start + (sub.started_at - base), parent_end);
                    sub.ended_at = std::clamp(parent_start + (sub.ended_at - base), sub.started_at, parent_end);
                    records.push_back(std::move(sub));
                }
            }

            json tool_content = outcome.success ? outcome.content : json{{"is_error", true}, {"content", outcome.content}};
            history.push_back(ChatMessage{Role::Tool, tool_content.dump(), {}, call.id, call.name});
        }
    }
    return run;
}

}  // namespace toolseq::agent
