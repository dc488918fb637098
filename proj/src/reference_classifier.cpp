#include "toolseq/reference_classifier.hpp"

#include <algorithm>
#include <stdexcept>

namespace toolseq {

namespace {

// Does `value` fit the declared kind of `param`?
bool kind_fits(const ParamSpec& param, const ArgValue& value) {
    if (param.kind == ValueKind::Integer) return value.index() == 1;
    if (value.index() != 0) return false;
    if (param.kind == ValueKind::String) return true;
    const auto& text = std::get<0>(value);
    for (const auto& allowed : param.enum_values)
        if (allowed == text) return true;
    return false;
}

// A call "is" step s when it names s's tool, carries every constrained
// parameter with the constrained value (or any value for a wildcard) and
// presents well-formed arguments for the tool's declared parameters.
bool call_is_step(const ToolCallRecord& call, const ExpectedStep& s, const ToolRegistry& registry) {
    if (call.tool_name != s.tool_name) return false;
    for (const auto& entry : s.arg_constraints) {
        if (call.arguments.count(entry.first) == 0) return false;
        if (entry.second.has_value() && !(call.arguments.at(entry.first) == entry.second.value())) return false;
    }
    const auto spec = registry.lookup(call.tool_name);
    if (!spec) return false;
    for (const auto& p : spec->params) {
        if (call.arguments.count(p.name) == 0) {
            if (p.required) return false;
        } else if (!kind_fits(p, call.arguments.at(p.name))) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> names_of(const std::vector<ExpectedStep>& steps) {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.tool_name);
    return out;
}

std::vector<std::string> names_of(const std::vector<ToolCallRecord>& calls) {
    std::vector<std::string> out;
    for (const auto& c : calls) out.push_back(c.tool_name);
    return out;
}

}  // namespace

Verdict reference_classify(const Procedure& expected, const ObservedTrace& observed, const ToolRegistry& registry) {
    const auto& P = expected.steps;
    const auto& O = observed.records;
    if (P.size() > kReferenceMaxProcedure || O.size() > kReferenceMaxTrace)
        throw std::invalid_argument("reference_classify: instance exceeds the small-instance bound");

    const auto p_names = names_of(P);
    const auto o_names = names_of(O);

    // No Tool Calls: the observed sequence is empty.
    const bool no_tool_calls = O.empty();

    // Wrong Tool, per call, the most severe applicable form.
    std::optional<WrongToolSubclass> wrong_tool;
    std::optional<int> wrong_step;
    for (const auto& call : O) {
        std::optional<WrongToolSubclass> form;
        const bool registered = registry.lookup(call.tool_name).has_value();
        const bool in_p = std::find(p_names.begin(), p_names.end(), call.tool_name) != p_names.end();
        if (!registered) {
            form = WrongToolSubclass::WrongToolName;
        } else if (!in_p) {
            form = WrongToolSubclass::ToolOutsideProcedure;
        } else {
            const bool fits_some_step =
                std::any_of(P.begin(), P.end(), [&](const ExpectedStep& s) { return call_is_step(call, s, registry); });
            if (!fits_some_step) form = WrongToolSubclass::WrongParameters;
        }
        if (form) {
            wrong_tool = form;
            wrong_step = call.step_index;
            break;
        }
    }

    // Duplicate Tool: some tool of P appears in O more often than in P.
    bool duplicate = false;
    for (const auto& name : p_names) {
        const auto in_o = std::count(o_names.begin(), o_names.end(), name);
        const auto in_p = std::count(p_names.begin(), p_names.end(), name);
        if (in_o > in_p) duplicate = true;
    }

    // Exact match: same length, each position is the expected step.
    bool exact = O.size() == P.size();
    for (std::size_t j = 0; exact && j < O.size(); ++j) exact = call_is_step(O[j], P[j], registry);

    // Premature Stop: O is a proper prefix of P.
    bool premature = O.size() < P.size();
    for (std::size_t j = 0; premature && j < O.size(); ++j) premature = call_is_step(O[j], P[j], registry);

    // Wrong Order: same elements (as a multiset of names), yet O != P.
    auto sorted_p = p_names;
    auto sorted_o = o_names;
    std::sort(sorted_p.begin(), sorted_p.end());
    std::sort(sorted_o.begin(), sorted_o.end());
    const bool wrong_order = sorted_p == sorted_o && !exact;

    Verdict v;
    if (no_tool_calls) {
        v.outcome = Outcome::NoToolCalls;
    } else if (wrong_tool) {
        v.outcome = Outcome::WrongTool;
        v.wrong_tool_subclass = wrong_tool;
        v.offending_step = wrong_step;
    } else if (duplicate) {
        v.outcome = Outcome::DuplicateTool;
    } else if (premature) {
        v.outcome = Outcome::PrematureStop;
    } else if (wrong_order) {
        v.outcome = Outcome::WrongOrder;
    } else if (exact) {
        v.outcome = Outcome::Correct;
    } else {
        v.outcome = Outcome::OtherDeviation;
    }
    v.detail = "reference";
    return v;
}

}  // namespace toolseq
