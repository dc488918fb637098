#pragma once

// Shared fixtures for the test executables.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "toolseq/experiment.hpp"
#include "toolseq/model.hpp"
#include "toolseq/toolsim.hpp"

namespace toolseq::test {

inline std::filesystem::path config_dir() { return TOOLSEQ_CONFIG_DIR; }

inline std::shared_ptr<const sim::FixtureSet> shipped_fixtures() {
    return experiment::load_config(config_dir() / "scenario_a.json").fixtures;
}

inline ExpectedStep auth_step(const std::string& ue = "ue-001", const std::string& type = "IPv4") {
    return ExpectedStep{sim::kAuth, {{"ue_id", ArgValue{ue}}, {"session_type", ArgValue{type}}}};
}
inline ExpectedStep static_step(const std::string& ue = "ue-001") {
    return ExpectedStep{sim::kStatic, {{"ue_id", ArgValue{ue}}}};
}
inline ExpectedStep registry_step(const std::string& ue = "ue-001", const std::string& type = "IPv4") {
    return ExpectedStep{sim::kRegistry,
                        {{"ue_id", ArgValue{ue}}, {"address", std::nullopt}, {"session_type", ArgValue{type}}}};
}

/// P = (auth, static, registry) for ue-001 / IPv4.
inline Procedure static_ip_procedure() {
    return Procedure{"ue_ip_allocation:ue-001:IPv4", sim::kAllocationIntent, {auth_step(), static_step(), registry_step()}};
}

/// Arguments that satisfy the ue-001 / IPv4 expectation for each Scenario-A tool.
inline Arguments good_args(const std::string& tool) {
    if (tool == sim::kAuth) return {{"ue_id", ArgValue{"ue-001"}}, {"session_type", ArgValue{"IPv4"}}};
    if (tool == sim::kRegistry)
        return {{"ue_id", ArgValue{"ue-001"}}, {"address", ArgValue{"10.0.0.42"}}, {"session_type", ArgValue{"IPv4"}}};
    return {{"ue_id", ArgValue{"ue-001"}}};
}

inline ToolCallRecord call(int step, const std::string& tool, Arguments args, Millis start = 0, Millis end = 0) {
    ToolCallRecord r;
    r.step_index = step;
    r.tool_name = tool;
    r.arguments = std::move(args);
    r.result = json::object();
    r.success = true;
    r.started_at = start;
    r.ended_at = end;
    return r;
}

/// Trace of agent-issued calls with well-formed arguments.
inline ObservedTrace trace_of(const std::vector<std::string>& tools) {
    ObservedTrace t;
    int i = 1;
    for (const auto& name : tools) t.records.push_back(call(i++, name, good_args(name)));
    return t;
}

/// Every sequence over `alphabet` of length 0..max_len, shortest first.
template <typename T>
std::vector<std::vector<T>> all_sequences(const std::vector<T>& alphabet, std::size_t max_len) {
    std::vector<std::vector<T>> out{{}};
    std::size_t begin = 0;
    for (std::size_t len = 1; len <= max_len; ++len) {
        const std::size_t end = out.size();
        for (std::size_t i = begin; i < end; ++i)
            for (const auto& a : alphabet) {
                auto next = out[i];
                next.push_back(a);
                out.push_back(std::move(next));
            }
        begin = end;
    }
    return out;
}

/// The five Scenario-A procedure tools plus one unregistered name.
inline std::vector<std::string> enumeration_alphabet() {
    return {sim::kAuth, sim::kStatic, sim::kDhcpV4, sim::kDhcpV6, sim::kRegistry, "ue_lookup"};
}

struct BranchCase {
    std::string ue_id;
    std::string session_type;
    std::vector<std::string> tools;
};

/// Allocation procedures for the shipped fixtures, written out by hand from
/// the branch rules: rejected -> auth only; usable static address -> no DHCP;
/// otherwise DHCPv4 and/or DHCPv6 by session type, v4 first.
inline std::vector<BranchCase> branch_table() {
    const std::string A = sim::kAuth, S = sim::kStatic, D4 = sim::kDhcpV4, D6 = sim::kDhcpV6, R = sim::kRegistry;
    return {
        {"ue-001", "IPv4", {A, S, R}},
        {"ue-001", "IPv6", {A}},
        {"ue-001", "IPv4v6", {A, S, D4, D6, R}},
        {"ue-002", "IPv4", {A, S, D4, R}},
        {"ue-002", "IPv6", {A, S, D6, R}},
        {"ue-002", "IPv4v6", {A, S, D4, D6, R}},
        {"ue-003", "IPv4", {A}},
        {"ue-003", "IPv6", {A, S, D6, R}},
        {"ue-003", "IPv4v6", {A}},
        {"ue-999", "IPv4", {A}},
    };
}

/// Twenty argument sets for Scenario-A tools, valid and invalid alike.
/// Each tool takes the parameters it declares from a set.
inline std::vector<std::map<std::string, std::string>> wire_argument_sets() {
    std::vector<std::map<std::string, std::string>> out;
    const std::vector<std::string> ues{"ue-001", "ue-002", "ue-003", "ue-999"};
    const std::vector<std::string> types{"IPv4", "IPv6", "IPv4v6", "IPv5", "IPv4"};
    const std::vector<std::string> addresses{"10.0.0.42", "2001:db8::7", "100.64.0.9", "not-an-ip"};
    for (std::size_t i = 0; i < 20; ++i) {
        out.push_back({{"ue_id", ues[i % ues.size()]},
                       {"session_type", types[i % types.size()]},
                       {"address", addresses[(i / 2) % addresses.size()]}});
        if (i % 7 == 3) out.back()["secondary_address"] = "2001:db8::99";
    }
    return out;
}

inline Arguments arguments_for(const ToolSpec& spec, const std::map<std::string, std::string>& set) {
    Arguments args;
    for (const auto& p : spec.params)
        if (const auto it = set.find(p.name); it != set.end()) args.emplace(p.name, ArgValue{it->second});
    return args;
}

}  // namespace toolseq::test
