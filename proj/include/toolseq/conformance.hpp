#pragma once

#include "toolseq/model.hpp"

namespace toolseq {

enum class CallValidity { Ok, UnknownName, OutsideProcedure, BadParams };

std::string_view to_string(CallValidity v);

/// True when the arguments meet the tool's schema: every required parameter
/// present, every supplied declared parameter of the declared kind, enum
/// values within range. Undeclared extra parameters are ignored.
bool satisfies_schema(const Arguments& args, const ToolSpec& tool);

/// Exact-match or wildcard per constrained parameter; unconstrained
/// parameters are ignored. A wildcard still requires the parameter present.
bool satisfies_constraints(const Arguments& args, const ExpectedStep& step);

/// Binary exact-match metric: 1 iff lengths agree and every position names
/// the expected tool with arguments meeting that step's constraints. When a
/// registry is given the arguments must also meet the tool's schema, which
/// keeps reliability and classify consistent on schema-invalid calls.
int reliability(const Procedure& expected, const ObservedTrace& observed, const ToolRegistry* registry = nullptr);

CallValidity validate_call(const ToolCallRecord& call, const Procedure& expected, const ToolRegistry& registry);

/// Single-label classification with the precedence cascade
/// NoToolCalls > WrongTool > DuplicateTool > PrematureStop > WrongOrder >
/// Correct > OtherDeviation.
Verdict classify(const Procedure& expected, const ObservedTrace& observed, const ToolRegistry& registry);

}  // namespace toolseq
