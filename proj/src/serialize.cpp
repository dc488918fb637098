#include "toolseq/serialize.hpp"

#include <stdexcept>

namespace toolseq {

namespace {

template <typename E, typename Parse>
E enum_from(const json& j, Parse parse, const char* what) {
    const auto text = j.get<std::string>();
    if (auto v = parse(text)) return *v;
    throw std::invalid_argument(std::string("unknown ") + what + " '" + text + "'");
}

json arg_value_to_json(const ArgValue& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

ArgValue arg_value_from_json(const json& j) {
    if (j.is_number_integer()) return ArgValue{j.get<std::int64_t>()};
    if (j.is_string()) return ArgValue{j.get<std::string>()};
    throw std::invalid_argument("argument value must be a string or an integer");
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

}  // namespace

void to_json(json& j, const ParamSpec& v) {
    j = json{{"name", v.name},
             {"value_kind", to_string(v.kind)},
             {"required", v.required},
             {"enum_values", v.enum_values},
             {"description", v.description}};
}

void from_json(const json& j, ParamSpec& v) {
    v.name = j.at("name").get<std::string>();
    v.kind = enum_from<ValueKind>(j.at("value_kind"), parse_value_kind, "value kind");
    v.required = j.value("required", true);
    v.enum_values = j.value("enum_values", std::vector<std::string>{});
    v.description = j.value("description", std::string{});
}

void to_json(json& j, const ToolSpec& v) {
    j = json{{"name", v.name}, {"description", v.description}, {"params", v.params}, {"scope", to_string(v.scope)}};
    if (v.scope == ToolScope::Encapsulated) j["encapsulated_procedure"] = v.encapsulated_procedure;
}

void from_json(const json& j, ToolSpec& v) {
    v.name = j.at("name").get<std::string>();
    v.description = j.value("description", std::string{});
    v.params = j.value("params", std::vector<ParamSpec>{});
    v.scope = enum_from<ToolScope>(j.at("scope"), parse_tool_scope, "tool scope");
    v.encapsulated_procedure = j.value("encapsulated_procedure", std::string{});
}

void to_json(json& j, const ExpectedStep& v) {
    json constraints = json::object();
    for (const auto& [param, value] : v.arg_constraints)
        constraints[param] = value ? arg_value_to_json(*value) : json(nullptr);
    j = json{{"tool_name", v.tool_name}, {"arg_constraints", std::move(constraints)}};
}

void from_json(const json& j, ExpectedStep& v) {
    v.tool_name = j.at("tool_name").get<std::string>();
    v.arg_constraints.clear();
    if (const auto it = j.find("arg_constraints"); it != j.end()) {
        for (const auto& [param, value] : it->items()) {
            if (value.is_null()) v.arg_constraints.emplace(param, std::nullopt);
            else v.arg_constraints.emplace(param, arg_value_from_json(value));
        }
    }
}

void to_json(json& j, const Procedure& v) {
    j = json{{"procedure_id", v.procedure_id}, {"intent_key", v.intent_key}, {"steps", v.steps}};
}

void from_json(const json& j, Procedure& v) {
    v.procedure_id = j.at("procedure_id").get<std::string>();
    v.intent_key = j.value("intent_key", std::string{});
    v.steps = j.at("steps").get<std::vector<ExpectedStep>>();
}

void to_json(json& j, const ToolCallRecord& v) {
    json args = json::object();
    for (const auto& [param, value] : v.arguments) args[param] = arg_value_to_json(value);
    j = json{{"step_index", v.step_index},
             {"tool_name", v.tool_name},
             {"arguments", std::move(args)},
             {"result", v.result},
             {"success", v.success},
             {"started_at", v.started_at},
             {"ended_at", v.ended_at},
             {"origin", to_string(v.origin)}};
    if (v.parent_step) j["parent_step"] = *v.parent_step;
}

void from_json(const json& j, ToolCallRecord& v) {
    v.step_index = j.at("step_index").get<int>();
    v.tool_name = j.at("tool_name").get<std::string>();
    v.arguments.clear();
    for (const auto& [param, value] : j.at("arguments").items()) v.arguments.emplace(param, arg_value_from_json(value));
    v.result = j.value("result", json());
    v.success = j.at("success").get<bool>();
    v.started_at = j.at("started_at").get<Millis>();
    v.ended_at = j.at("ended_at").get<Millis>();
    v.origin = enum_from<CallOrigin>(j.at("origin"), parse_call_origin, "call origin");
    v.parent_step = get_optional<int>(j, "parent_step");
    if (v.ended_at < v.started_at) throw std::invalid_argument("tool call ends before it starts");
}

void to_json(json& j, const ObservedTrace& v) { j = json{{"records", v.records}}; }

void from_json(const json& j, ObservedTrace& v) {
    v.records = j.at("records").get<std::vector<ToolCallRecord>>();
}

void to_json(json& j, const Intent& v) {
    j = json{{"intent_key", v.intent_key}, {"text", v.text}, {"structured", v.structured}};
}

void from_json(const json& j, Intent& v) {
    v.intent_key = j.at("intent_key").get<std::string>();
    v.text = j.value("text", std::string{});
    v.structured = j.value("structured", std::map<std::string, std::string>{});
}

void to_json(json& j, const LlmStep& v) { j = json{{"started_at", v.started_at}, {"ended_at", v.ended_at}}; }

void from_json(const json& j, LlmStep& v) {
    v.started_at = j.at("started_at").get<Millis>();
    v.ended_at = j.at("ended_at").get<Millis>();
}

void to_json(json& j, const Verdict& v) {
    j = json{{"outcome", to_string(v.outcome)}, {"detail", v.detail}};
    if (v.wrong_tool_subclass) j["wrong_tool_subclass"] = to_string(*v.wrong_tool_subclass);
    else j["wrong_tool_subclass"] = nullptr;
    put_optional(j, "offending_step", v.offending_step);
}

void from_json(const json& j, Verdict& v) {
    v.outcome = enum_from<Outcome>(j.at("outcome"), parse_outcome, "outcome");
    v.detail = j.value("detail", std::string{});
    if (const auto sub = get_optional<std::string>(j, "wrong_tool_subclass"))
        v.wrong_tool_subclass = enum_from<WrongToolSubclass>(json(*sub), parse_wrong_tool_subclass, "subclass");
    else v.wrong_tool_subclass.reset();
    v.offending_step = get_optional<int>(j, "offending_step");
    if (v.wrong_tool_subclass.has_value() != (v.outcome == Outcome::WrongTool))
        throw std::invalid_argument("wrong_tool_subclass must be present iff outcome is WrongTool");
}

void to_json(json& j, const RunRecord& v) {
    j = json{{"run_id", v.run_id},
             {"scenario", v.scenario},
             {"approach", to_string(v.approach)},
             {"model_id", v.model_id},
             {"intent", v.intent},
             {"expected", v.expected},
             {"trace", v.trace},
             {"llm_steps", v.llm_steps},
             {"final_text", v.final_text},
             {"terminated_reason", to_string(v.terminated_reason)},
             {"error", v.error}};
    put_optional(j, "expected_agent", v.expected_agent);
    if (v.verdict_agent) j["verdict_agent"] = *v.verdict_agent;
    if (v.verdict_flattened) j["verdict_flattened"] = *v.verdict_flattened;
}

void from_json(const json& j, RunRecord& v) {
    v.run_id = j.at("run_id").get<std::string>();
    v.scenario = j.value("scenario", std::string{});
    v.approach = enum_from<Approach>(j.at("approach"), parse_approach, "approach");
    v.model_id = j.at("model_id").get<std::string>();
    v.intent = j.at("intent").get<Intent>();
    v.expected = j.at("expected").get<Procedure>();
    v.expected_agent = get_optional<Procedure>(j, "expected_agent");
    v.trace = j.at("trace").get<ObservedTrace>();
    v.llm_steps = j.at("llm_steps").get<std::vector<LlmStep>>();
    v.final_text = j.value("final_text", std::string{});
    v.terminated_reason =
        enum_from<TerminatedReason>(j.at("terminated_reason"), parse_terminated_reason, "terminated reason");
    v.error = j.value("error", std::string{});
    v.verdict_agent = get_optional<Verdict>(j, "verdict_agent");
    v.verdict_flattened = get_optional<Verdict>(j, "verdict_flattened");
}

std::string to_archive_line(const RunRecord& run) { return json(run).dump(); }

RunRecord from_archive_line(const std::string& line) { return json::parse(line).get<RunRecord>(); }

}  // namespace toolseq
