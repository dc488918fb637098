#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "toolseq/clock.hpp"
#include "toolseq/model.hpp"

// Simulated UE IP allocation tools. Everything here is deterministic given
// the fixture set and the per-run session state.

namespace toolseq::sim {

enum class SessionType { IPv4, IPv6, IPv4v6 };

std::string_view to_string(SessionType t);
std::optional<SessionType> parse_session_type(std::string_view s);
inline const std::vector<std::string> kSessionTypeNames{"IPv4", "IPv6", "IPv4v6"};

enum class AddressFamily { V4, V6 };
std::optional<AddressFamily> address_family(const std::string& address);

/// A single-address static assignment serves only the matching single-stack
/// session type; IPv4v6 needs both families and always goes dynamic.
bool static_ip_compatible(const std::string& address, SessionType type);

struct UeFixture {
    std::string ue_id;
    std::set<SessionType> authorized_session_types;
    std::optional<std::string> static_ip;
};

struct DhcpConfig {
    std::string v4_base = "100.64.0.0";
    std::string v6_base = "2001:db8::";
    int capacity = 256;
};

class FixtureSet {
public:
    FixtureSet() = default;
    /// Throws std::invalid_argument on duplicate ids or an unusable static ip.
    FixtureSet(std::vector<UeFixture> fixtures, DhcpConfig dhcp = {});

    const UeFixture* find(std::string_view ue_id) const;
    const std::vector<UeFixture>& fixtures() const { return fixtures_; }
    const DhcpConfig& dhcp() const { return dhcp_; }

private:
    std::vector<UeFixture> fixtures_;
    DhcpConfig dhcp_;
};

struct Assignment {
    std::string address;
    std::optional<std::string> secondary_address;
    SessionType session_type = SessionType::IPv4;
    int assigned_at = 0;
};

/// Per-run mutable state: DHCP cursors and the allocation registry.
struct UeSession {
    std::map<std::string, std::vector<Assignment>> registry;
    int v4_issued = 0;
    int v6_issued = 0;
    int assignments = 0;
};

struct ToolResult {
    json content;
    bool is_error = false;

    friend bool operator==(const ToolResult&, const ToolResult&) = default;
};

// Tool names.
inline constexpr const char* kAuth = "ue_authorization";
inline constexpr const char* kStatic = "static_ip_retrieval";
inline constexpr const char* kDhcpV4 = "dhcpv4_allocate";
inline constexpr const char* kDhcpV6 = "dhcpv6_allocate";
inline constexpr const char* kRegistry = "ip_assignment";
inline constexpr const char* kEncapsulatedAllocation = "ue_ip_allocation_procedure";
inline constexpr const char* kEncapsulatedLookup = "ue_static_ip_lookup_procedure";
inline constexpr const char* kProcedureRepository = "get_procedures";

inline constexpr const char* kAllocationIntent = "ue_ip_allocation";
inline constexpr const char* kLookupIntent = "ue_static_ip_lookup";

std::vector<ToolSpec> procedure_tool_specs();
std::vector<ToolSpec> encapsulated_tool_specs();
ToolSpec procedure_repository_spec();

/// All Scenario-A tool specs (procedure, encapsulated and meta).
ToolRegistry scenario_a_registry();

ToolResult ue_authorization(const FixtureSet& fixtures, const std::string& ue_id, const std::string& session_type);
ToolResult static_ip_retrieval(const FixtureSet& fixtures, const std::string& ue_id);
ToolResult dhcpv4_allocate(const FixtureSet& fixtures, UeSession& session, const std::string& ue_id);
ToolResult dhcpv6_allocate(const FixtureSet& fixtures, UeSession& session, const std::string& ue_id);
ToolResult ip_assignment(UeSession& session, const std::string& ue_id, const std::string& address,
                         const std::string& session_type,
                         const std::optional<std::string>& secondary_address = std::nullopt);

struct EncapsulatedResult {
    ToolResult result;
    // Internal calls in execution order; timestamps are offsets on `clock`.
    std::vector<ToolCallRecord> internal_calls;
};

/// Runs the allocation decision tree by invoking the five tools in turn.
EncapsulatedResult encapsulated_ip_allocation(const FixtureSet& fixtures, UeSession& session, const std::string& ue_id,
                                              const std::string& session_type, Clock& clock);

/// Authorization followed by static-IP retrieval, nothing allocated.
EncapsulatedResult encapsulated_static_ip_lookup(const FixtureSet& fixtures, UeSession& session,
                                                 const std::string& ue_id, const std::string& session_type,
                                                 Clock& clock);

Intent make_allocation_intent(const std::string& ue_id, const std::string& session_type);

/// Decision tree over the fixture: unauthorized -> (auth); compatible static
/// -> (auth, static, registry); otherwise auth, static, the DHCP tool(s) of
/// the session type (v4 before v6), registry. Throws std::invalid_argument for
/// intents other than ue_ip_allocation / ue_static_ip_lookup.
Procedure ground_truth_procedure(const Intent& intent, const FixtureSet& fixtures);

/// Agent-level expectation for A4: one call of the matching encapsulated tool.
Procedure encapsulated_expectation(const Intent& intent);

/// Canonical rendering of the procedure set; also the repository payload.
class ProcedureRepository {
public:
    explicit ProcedureRepository(std::string rendering = {}) : rendering_(std::move(rendering)) {}
    const std::string& fetch() const { return rendering_; }

private:
    std::string rendering_;
};

}  // namespace toolseq::sim
