#pragma once

#include <string>

#include "toolseq/model.hpp"

// JSON mapping for the domain types. Field names follow the type definitions
// one to one; run archives hold one RunRecord document per line.

namespace toolseq {

void to_json(json& j, const ParamSpec& v);
void from_json(const json& j, ParamSpec& v);
void to_json(json& j, const ToolSpec& v);
void from_json(const json& j, ToolSpec& v);
void to_json(json& j, const ExpectedStep& v);
void from_json(const json& j, ExpectedStep& v);
void to_json(json& j, const Procedure& v);
void from_json(const json& j, Procedure& v);
void to_json(json& j, const ToolCallRecord& v);
void from_json(const json& j, ToolCallRecord& v);
void to_json(json& j, const ObservedTrace& v);
void from_json(const json& j, ObservedTrace& v);
void to_json(json& j, const Intent& v);
void from_json(const json& j, Intent& v);
void to_json(json& j, const LlmStep& v);
void from_json(const json& j, LlmStep& v);
void to_json(json& j, const Verdict& v);
void from_json(const json& j, Verdict& v);
void to_json(json& j, const RunRecord& v);
void from_json(const json& j, RunRecord& v);

/// One archive line (no trailing newline).
std::string to_archive_line(const RunRecord& run);
/// Throws json::exception or std::invalid_argument on a corrupt line.
RunRecord from_archive_line(const std::string& line);

}  // namespace toolseq
