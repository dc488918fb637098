#include "toolseq/toolsim.hpp"

#include <arpa/inet.h>

#include <array>
#include <cstring>
#include <stdexcept>

namespace toolseq::sim {

std::string_view to_string(SessionType t) {
    switch (t) {
        case SessionType::IPv4: return "IPv4";
        case SessionType::IPv6: return "IPv6";
        case SessionType::IPv4v6: return "IPv4v6";
    }
    return "?";
}

std::optional<SessionType> parse_session_type(std::string_view s) {
    if (s == "IPv4") return SessionType::IPv4;
    if (s == "IPv6") return SessionType::IPv6;
    if (s == "IPv4v6") return SessionType::IPv4v6;
    return std::nullopt;
}

std::optional<AddressFamily> address_family(const std::string& address) {
    std::array<unsigned char, 16> buf{};
    if (inet_pton(AF_INET, address.c_str(), buf.data()) == 1) return AddressFamily::V4;
    if (inet_pton(AF_INET6, address.c_str(), buf.data()) == 1) return AddressFamily::V6;
    return std::nullopt;
}

bool static_ip_compatible(const std::string& address, SessionType type) {
    const auto family = address_family(address);
    if (!family) return false;
    if (type == SessionType::IPv4) return *family == AddressFamily::V4;
    if (type == SessionType::IPv6) return *family == AddressFamily::V6;
    return false;
}

FixtureSet::FixtureSet(std::vector<UeFixture> fixtures, DhcpConfig dhcp)
    : fixtures_(std::move(fixtures)), dhcp_(std::move(dhcp)) {
    for (std::size_t i = 0; i < fixtures_.size(); ++i) {
        const auto& f = fixtures_[i];
        for (std::size_t j = i + 1; j < fixtures_.size(); ++j)
            if (fixtures_[j].ue_id == f.ue_id) throw std::invalid_argument("duplicate fixture '" + f.ue_id + "'");
        if (f.static_ip) {
            bool usable = false;
            for (auto t : f.authorized_session_types) usable = usable || static_ip_compatible(*f.static_ip, t);
            if (!usable)
                throw std::invalid_argument("fixture '" + f.ue_id + "': static ip " + *f.static_ip +
                                            " fits no authorized session type");
        }
    }
    if (address_family(dhcp_.v4_base) != AddressFamily::V4) throw std::invalid_argument("bad DHCPv4 base");
    if (address_family(dhcp_.v6_base) != AddressFamily::V6) throw std::invalid_argument("bad DHCPv6 base");
    if (dhcp_.capacity < 1) throw std::invalid_argument("DHCP capacity must be positive");
}

const UeFixture* FixtureSet::find(std::string_view ue_id) const {
    for (const auto& f : fixtures_)
        if (f.ue_id == ue_id) return &f;
    return nullptr;
}

namespace {

ToolResult failure(std::string message) { return ToolResult{json{{"error", std::move(message)}}, true}; }

std::string v4_offset(const std::string& base, int offset) {
    in_addr addr{};
    inet_pton(AF_INET, base.c_str(), &addr);
    addr.s_addr = htonl(ntohl(addr.s_addr) + static_cast<std::uint32_t>(offset));
    std::array<char, INET_ADDRSTRLEN> text{};
    inet_ntop(AF_INET, &addr, text.data(), text.size());
    return text.data();
}

std::string v6_offset(const std::string& base, int offset) {
    in6_addr addr{};
    inet_pton(AF_INET6, base.c_str(), &addr);
    unsigned carry = static_cast<unsigned>(offset);
    for (int i = 15; i >= 0 && carry != 0; --i) {
        const unsigned sum = addr.s6_addr[i] + (carry & 0xffu);
        addr.s6_addr[i] = static_cast<unsigned char>(sum & 0xffu);
        carry = (carry >> 8) + (sum >> 8);
    }
    std::array<char, INET6_ADDRSTRLEN> text{};
    inet_ntop(AF_INET6, &addr, text.data(), text.size());
    return text.data();
}

ParamSpec string_param(std::string name, std::string description, bool required = true) {
    return ParamSpec{std::move(name), ValueKind::String, required, {}, std::move(description)};
}

ParamSpec session_type_param() {
    return ParamSpec{"session_type", ValueKind::Enum, true, kSessionTypeNames,
                     "Requested PDU session type: IPv4, IPv6 or IPv4v6"};
}

}  // namespace

std::vector<ToolSpec> procedure_tool_specs() {
    return {
        ToolSpec{kAuth,
                 "Validates the UE ID and the requested PDU session type.",
                 {string_param("ue_id", "UE identifier"), session_type_param()},
                 ToolScope::Procedure,
                 {}},
        ToolSpec{kStatic,
                 "Checks whether a static IP address is pre-assigned for the UE.",
                 {string_param("ue_id", "UE identifier")},
                 ToolScope::Procedure,
                 {}},
        ToolSpec{kDhcpV4,
                 "Dynamically allocates an IPv4 address for the UE.",
                 {string_param("ue_id", "UE identifier")},
                 ToolScope::Procedure,
                 {}},
        ToolSpec{kDhcpV6,
                 "Dynamically allocates an IPv6 address for the UE.",
                 {string_param("ue_id", "UE identifier")},
                 ToolScope::Procedure,
                 {}},
        ToolSpec{kRegistry,
                 "Finalizes the IP assignment: notifies the UE and records the allocation in the network registry.",
                 {string_param("ue_id", "UE identifier"), string_param("address", "Assigned IP address"),
                  session_type_param(),
                  string_param("secondary_address", "Second address of a dual-stack (IPv4v6) session", false)},
                 ToolScope::Procedure,
                 {}},
    };
}

std::vector<ToolSpec> encapsulated_tool_specs() {
    return {
        ToolSpec{kEncapsulatedAllocation,
                 "Runs the complete UE IP allocation procedure (authorization, static IP check, dynamic "
                 "allocation when needed, registry update) and returns the final outcome.",
                 {string_param("ue_id", "UE identifier"), session_type_param()},
                 ToolScope::Encapsulated,
                 kAllocationIntent},
        ToolSpec{kEncapsulatedLookup,
                 "Authorizes the UE and reports its pre-assigned static IP address, without allocating anything.",
                 {string_param("ue_id", "UE identifier"), session_type_param()},
                 ToolScope::Encapsulated,
                 kLookupIntent},
    };
}

ToolSpec procedure_repository_spec() {
    return ToolSpec{kProcedureRepository,
                    "Retrieves the network procedure definitions from the procedure repository.",
                    {},
                    ToolScope::Meta,
                    {}};
}

ToolRegistry scenario_a_registry() {
    ToolRegistry reg(procedure_tool_specs());
    for (auto& t : encapsulated_tool_specs()) reg.add(std::move(t));
    reg.add(procedure_repository_spec());
    return reg;
}

ToolResult ue_authorization(const FixtureSet& fixtures, const std::string& ue_id, const std::string& session_type) {
    const auto type = parse_session_type(session_type);
    if (!type) return failure("malformed session_type '" + session_type + "'");
    const auto* f = fixtures.find(ue_id);
    if (f == nullptr)
        return ToolResult{json{{"status", "rejected"}, {"ue_id", ue_id}, {"reason", "unknown_ue"}}, false};
    if (f->authorized_session_types.count(*type) == 0)
        return ToolResult{json{{"status", "rejected"}, {"ue_id", ue_id}, {"reason", "session_type_not_allowed"}},
                          false};
    return ToolResult{json{{"status", "authorized"}, {"ue_id", ue_id}, {"session_type", session_type}}, false};
}

ToolResult static_ip_retrieval(const FixtureSet& fixtures, const std::string& ue_id) {
    const auto* f = fixtures.find(ue_id);
    if (f == nullptr || !f->static_ip) return ToolResult{json{{"ue_id", ue_id}, {"static_ip", nullptr}}, false};
    return ToolResult{json{{"ue_id", ue_id}, {"static_ip", *f->static_ip}}, false};
}

ToolResult dhcpv4_allocate(const FixtureSet& fixtures, UeSession& session, const std::string& ue_id) {
    if (session.v4_issued >= fixtures.dhcp().capacity) return failure("DHCPv4 pool exhausted");
    const auto address = v4_offset(fixtures.dhcp().v4_base, ++session.v4_issued);
    return ToolResult{json{{"ue_id", ue_id}, {"address", address}, {"family", "IPv4"}}, false};
}

ToolResult dhcpv6_allocate(const FixtureSet& fixtures, UeSession& session, const std::string& ue_id) {
    if (session.v6_issued >= fixtures.dhcp().capacity) return failure("DHCPv6 pool exhausted");
    const auto address = v6_offset(fixtures.dhcp().v6_base, ++session.v6_issued);
    return ToolResult{json{{"ue_id", ue_id}, {"address", address}, {"family", "IPv6"}}, false};
}

ToolResult ip_assignment(UeSession& session, const std::string& ue_id, const std::string& address,
                         const std::string& session_type, const std::optional<std::string>& secondary_address) {
    const auto type = parse_session_type(session_type);
    if (!type) return failure("malformed session_type '" + session_type + "'");
    if (!address_family(address)) return failure("invalid address '" + address + "'");
    if (secondary_address && !address_family(*secondary_address))
        return failure("invalid secondary address '" + *secondary_address + "'");

    Assignment a{address, secondary_address, *type, ++session.assignments};
    session.registry[ue_id].push_back(a);

    json confirmation{{"status", "assigned"}, {"ue_id", ue_id}, {"address", address}, {"session_type", session_type}};
    if (secondary_address) confirmation["secondary_address"] = *secondary_address;
    return ToolResult{std::move(confirmation), false};
}

namespace {

// Times one internal call on the tool's own clock and records it.
class InternalRecorder {
public:
    InternalRecorder(Clock& clock, std::vector<ToolCallRecord>& out) : clock_(clock), out_(out) {}

    template <typename Fn>
    ToolResult call(const char* name, Arguments args, Fn&& fn) {
        ToolCallRecord rec;
        rec.step_index = static_cast<int>(out_.size()) + 1;
        rec.tool_name = name;
        rec.arguments = std::move(args);
        rec.origin = CallOrigin::ToolInternal;
        rec.started_at = clock_.now();
        ToolResult r = fn();
        rec.ended_at = clock_.now();
        rec.result = r.content;
        rec.success = !r.is_error;
        out_.push_back(std::move(rec));
        return r;
    }

private:
    Clock& clock_;
    std::vector<ToolCallRecord>& out_;
};

Arguments args_of(std::initializer_list<std::pair<const char*, std::string>> items) {
    Arguments a;
    for (const auto& [k, v] : items) a.emplace(k, make_arg(v));
    return a;
}

bool authorized(const ToolResult& r) { return !r.is_error && r.content.value("status", "") == "authorized"; }

std::optional<std::string> static_from(const ToolResult& r) {
    const auto it = r.content.find("static_ip");
    if (r.is_error || it == r.content.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

EncapsulatedResult encapsulated_ip_allocation(const FixtureSet& fixtures, UeSession& session, const std::string& ue_id,
                                              const std::string& session_type, Clock& clock) {
    EncapsulatedResult out;
    InternalRecorder rec(clock, out.internal_calls);

    const auto auth = rec.call(kAuth, args_of({{"ue_id", ue_id}, {"session_type", session_type}}),
                               [&] { return ue_authorization(fixtures, ue_id, session_type); });
    if (auth.is_error) {
        out.result = auth;
        return out;
    }
    if (!authorized(auth)) {
        out.result = ToolResult{json{{"status", "rejected"}, {"ue_id", ue_id}, {"reason", auth.content["reason"]}},
                                false};
        return out;
    }

    const auto type = *parse_session_type(session_type);
    const auto stat = rec.call(kStatic, args_of({{"ue_id", ue_id}}), [&] { return static_ip_retrieval(fixtures, ue_id); });
    if (stat.is_error) {
        out.result = stat;
        return out;
    }

    std::string address;
    std::optional<std::string> secondary;
    const auto static_ip = static_from(stat);
    if (static_ip && static_ip_compatible(*static_ip, type)) {
        address = *static_ip;
    } else {
        if (type == SessionType::IPv4 || type == SessionType::IPv4v6) {
            const auto v4 =
                rec.call(kDhcpV4, args_of({{"ue_id", ue_id}}), [&] { return dhcpv4_allocate(fixtures, session, ue_id); });
            if (v4.is_error) {
                out.result = v4;
                return out;
            }
            address = v4.content["address"].get<std::string>();
        }
        if (type == SessionType::IPv6 || type == SessionType::IPv4v6) {
            const auto v6 =
                rec.call(kDhcpV6, args_of({{"ue_id", ue_id}}), [&] { return dhcpv6_allocate(fixtures, session, ue_id); });
            if (v6.is_error) {
                out.result = v6;
                return out;
            }
            auto v6_address = v6.content["address"].get<std::string>();
            if (address.empty()) address = std::move(v6_address);
            else secondary = std::move(v6_address);
        }
    }

    auto reg_args = args_of({{"ue_id", ue_id}, {"address", address}, {"session_type", session_type}});
    if (secondary) reg_args.emplace("secondary_address", make_arg(*secondary));
    out.result = rec.call(kRegistry, std::move(reg_args),
                          [&] { return ip_assignment(session, ue_id, address, session_type, secondary); });
    return out;
}

EncapsulatedResult encapsulated_static_ip_lookup(const FixtureSet& fixtures, UeSession&, const std::string& ue_id,
                                                 const std::string& session_type, Clock& clock) {
    EncapsulatedResult out;
    InternalRecorder rec(clock, out.internal_calls);
    const auto auth = rec.call(kAuth, args_of({{"ue_id", ue_id}, {"session_type", session_type}}),
                               [&] { return ue_authorization(fixtures, ue_id, session_type); });
    if (auth.is_error || !authorized(auth)) {
        out.result = auth;
        return out;
    }
    out.result = rec.call(kStatic, args_of({{"ue_id", ue_id}}), [&] { return static_ip_retrieval(fixtures, ue_id); });
    return out;
}

Intent make_allocation_intent(const std::string& ue_id, const std::string& session_type) {
    Intent intent;
    intent.intent_key = kAllocationIntent;
    intent.text = "Allocate an IP address for UE " + ue_id + " with session type " + session_type + ".";
    intent.structured = {{"ue_id", ue_id}, {"session_type", session_type}};
    return intent;
}

namespace {

ExpectedStep step(const char* tool, ArgConstraints constraints) { return ExpectedStep{tool, std::move(constraints)}; }

const std::string& field(const Intent& intent, const char* name) {
    const auto it = intent.structured.find(name);
    if (it == intent.structured.end())
        throw std::invalid_argument("intent '" + intent.intent_key + "' lacks field '" + name + "'");
    return it->second;
}

}  // namespace

Procedure ground_truth_procedure(const Intent& intent, const FixtureSet& fixtures) {
    if (intent.intent_key != kAllocationIntent && intent.intent_key != kLookupIntent)
        throw std::invalid_argument("no ground-truth generator for intent '" + intent.intent_key + "'");
    const auto& ue_id = field(intent, "ue_id");
    const auto& session_type = field(intent, "session_type");
    const ArgValue ue{ue_id};
    const ArgValue st{session_type};

    Procedure p;
    p.intent_key = intent.intent_key;
    p.procedure_id = intent.intent_key + ":" + ue_id + ":" + session_type;
    p.steps.push_back(step(kAuth, {{"ue_id", ue}, {"session_type", st}}));

    const auto* f = fixtures.find(ue_id);
    const auto type = parse_session_type(session_type);
    if (f == nullptr || !type || f->authorized_session_types.count(*type) == 0) return p;

    p.steps.push_back(step(kStatic, {{"ue_id", ue}}));
    if (intent.intent_key == kLookupIntent) return p;

    const bool use_static = f->static_ip && static_ip_compatible(*f->static_ip, *type);
    if (!use_static) {
        if (*type != SessionType::IPv6) p.steps.push_back(step(kDhcpV4, {{"ue_id", ue}}));
        if (*type != SessionType::IPv4) p.steps.push_back(step(kDhcpV6, {{"ue_id", ue}}));
    }
    p.steps.push_back(step(kRegistry, {{"ue_id", ue}, {"address", std::nullopt}, {"session_type", st}}));
    return p;
}

Procedure encapsulated_expectation(const Intent& intent) {
    const char* tool = nullptr;
    if (intent.intent_key == kAllocationIntent) tool = kEncapsulatedAllocation;
    else if (intent.intent_key == kLookupIntent) tool = kEncapsulatedLookup;
    else throw std::invalid_argument("no encapsulated tool for intent '" + intent.intent_key + "'");

    Procedure p;
    p.intent_key = intent.intent_key;
    p.procedure_id = intent.intent_key + ":encapsulated";
    p.steps.push_back(step(tool, {{"ue_id", ArgValue{field(intent, "ue_id")}},
                                  {"session_type", ArgValue{field(intent, "session_type")}}}));
    return p;
}

}  // namespace toolseq::sim
