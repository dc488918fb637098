#include "toolseq/wire.hpp"

#include <sstream>

#include "toolseq/serialize.hpp"

namespace toolseq::wire {

namespace {

json rpc_error(const json& id, int code, std::string message, json data = nullptr) {
    json err{{"code", code}, {"message", std::move(message)}};
    if (!data.is_null()) err["data"] = std::move(data);
    return json{{"jsonrpc", "2.0"}, {"id", id}, {"error", std::move(err)}};
}

json rpc_result(const json& id, json result) {
    return json{{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
}

// Schema problems the server rejects before dispatch: missing required
// parameters and values of the wrong scalar type. Enum ranges are left to
// the handler, which reports them as a tool-level error.
std::vector<std::string> schema_problems(const ToolSpec& spec, const Arguments& args) {
    std::vector<std::string> problems;
    for (const auto& p : spec.params) {
        const auto it = args.find(p.name);
        if (it == args.end()) {
            if (p.required) problems.push_back("missing required parameter '" + p.name + "'");
            continue;
        }
        const bool is_int = std::holds_alternative<std::int64_t>(it->second);
        if (p.kind == ValueKind::Integer && !is_int) problems.push_back("parameter '" + p.name + "' must be an integer");
        if (p.kind != ValueKind::Integer && is_int) problems.push_back("parameter '" + p.name + "' must be a string");
    }
    return problems;
}

}  // namespace

ToolServer::ToolServer(int server_id, std::shared_ptr<Clock> clock) : id_(server_id), clock_(std::move(clock)) {}

void ToolServer::host(ToolSpec spec, Handler handler) {
    registry_.add(spec);
    hosted_.push_back(Hosted{std::move(spec), std::move(handler)});
}

std::shared_ptr<ToolServer::Slot> ToolServer::slot_for(const std::string& session) {
    std::lock_guard lock(sessions_mutex_);
    auto& slot = sessions_[session];
    if (!slot) slot = std::make_shared<Slot>();
    return slot;
}

std::size_t ToolServer::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

ToolOutput ToolServer::invoke(const std::string& name, const Arguments& args, const std::string& session) {
    for (auto& h : hosted_) {
        if (h.spec.name != name) continue;
        auto slot = slot_for(session);
        std::lock_guard lock(slot->mutex);
        return h.handler(args, slot->state, *clock_);
    }
    throw std::out_of_range("unknown tool '" + name + "'");
}

json ToolServer::call(const json& id, const json& params, const std::string& session) {
    if (!params.is_object() || !params.contains("name") || !params["name"].is_string())
        return rpc_error(id, rpc_code::kInvalidParams, "tools/call requires params.name",
                         json{{"kind", "validation"}});
    const auto name = params["name"].get<std::string>();
    const auto* spec = registry_.find(name);
    if (spec == nullptr)
        return rpc_error(id, rpc_code::kInvalidParams, "unknown tool '" + name + "'",
                         json{{"kind", "not_found"}, {"name", name}});

    const json raw_args = params.value("arguments", json::object());
    if (!raw_args.is_object())
        return rpc_error(id, rpc_code::kInvalidParams, "params.arguments must be an object",
                         json{{"kind", "validation"}, {"name", name}});
    const auto args = arguments_from_json(raw_args);
    if (auto problems = schema_problems(*spec, args); !problems.empty()) {
        std::string message = "invalid arguments for '" + name + "': " + problems.front();
        return rpc_error(id, rpc_code::kInvalidParams, std::move(message),
                         json{{"kind", "validation"}, {"name", name}, {"problems", problems}});
    }

    ToolOutput out;
    try {
        out = invoke(name, args, session);
    } catch (const std::exception& e) {
        return rpc_error(id, rpc_code::kInternalError, "tool '" + name + "' failed: " + e.what(),
                         json{{"kind", "internal"}, {"name", name}});
    }
    json result{{"content", std::move(out.result.content)}, {"is_error", out.result.is_error}};
    if (spec->scope == ToolScope::Encapsulated) result["internal_calls"] = out.internal_calls;
    return rpc_result(id, std::move(result));
}

json ToolServer::handle(const json& request, const std::string& session) {
    const json id = request.is_object() ? request.value("id", json()) : json();
    if (!request.is_object() || request.value("jsonrpc", "") != "2.0" || !request.contains("method") ||
        !request["method"].is_string())
        return rpc_error(id, rpc_code::kInvalidRequest, "not a JSON-RPC 2.0 request");

    const auto method = request["method"].get<std::string>();
    if (method == "tools/list") {
        json tools = json::array();
        for (const auto& h : hosted_) tools.push_back(h.spec);
        return rpc_result(id, json{{"tools", std::move(tools)}});
    }
    if (method == "tools/call") {
        if (session.empty())
            return rpc_error(id, rpc_code::kInvalidRequest, std::string("missing ") + kSessionHeader + " header");
        return call(id, request.value("params", json::object()), session);
    }
    return rpc_error(id, rpc_code::kMethodNotFound, "unknown method '" + method + "'");
}

std::string ToolServer::handle_text(const std::string& body, const std::string& session) {
    json request;
    try {
        request = json::parse(body);
    } catch (const json::parse_error& e) {
        return rpc_error(nullptr, rpc_code::kParseError, e.what()).dump();
    }
    return handle(request, session).dump();
}

// ---------------------------------------------------------------------------

namespace {

std::string arg_text(const Arguments& args, const char* name) {
    const auto it = args.find(name);
    return it == args.end() ? std::string{} : to_string(it->second);
}

std::optional<std::string> optional_arg(const Arguments& args, const char* name) {
    const auto it = args.find(name);
    if (it == args.end()) return std::nullopt;
    return to_string(it->second);
}

ToolOutput plain(sim::ToolResult r) { return ToolOutput{std::move(r), {}}; }

void host_repository(ToolServer& server, std::shared_ptr<const sim::ProcedureRepository> repository) {
    server.host(sim::procedure_repository_spec(), [repository](const Arguments&, SessionState&, Clock&) {
        return plain(sim::ToolResult{json{{"procedures", repository->fetch()}}, false});
    });
}

}  // namespace

std::unique_ptr<ToolServer> make_encapsulated_server(std::shared_ptr<const sim::FixtureSet> fixtures,
                                                     std::shared_ptr<Clock> clock) {
    auto server = std::make_unique<ToolServer>(1, std::move(clock));
    auto specs = sim::encapsulated_tool_specs();
    server->host(specs[0], [fixtures](const Arguments& a, SessionState& s, Clock& c) {
        return sim::encapsulated_ip_allocation(*fixtures, s.ue, arg_text(a, "ue_id"), arg_text(a, "session_type"), c);
    });
    server->host(specs[1], [fixtures](const Arguments& a, SessionState& s, Clock& c) {
        return sim::encapsulated_static_ip_lookup(*fixtures, s.ue, arg_text(a, "ue_id"), arg_text(a, "session_type"),
                                                  c);
    });
    return server;
}

std::unique_ptr<ToolServer> make_allocation_server(std::shared_ptr<const sim::FixtureSet> fixtures,
                                                   std::shared_ptr<const sim::ProcedureRepository> repository,
                                                   std::shared_ptr<Clock> clock) {
    auto server = std::make_unique<ToolServer>(2, std::move(clock));
    auto specs = sim::procedure_tool_specs();
    server->host(specs[0], [fixtures](const Arguments& a, SessionState&, Clock&) {
        return plain(sim::ue_authorization(*fixtures, arg_text(a, "ue_id"), arg_text(a, "session_type")));
    });
    server->host(specs[1], [fixtures](const Arguments& a, SessionState&, Clock&) {
        return plain(sim::static_ip_retrieval(*fixtures, arg_text(a, "ue_id")));
    });
    server->host(specs[2], [fixtures](const Arguments& a, SessionState& s, Clock&) {
        return plain(sim::dhcpv4_allocate(*fixtures, s.ue, arg_text(a, "ue_id")));
    });
    server->host(specs[3], [fixtures](const Arguments& a, SessionState& s, Clock&) {
        return plain(sim::dhcpv6_allocate(*fixtures, s.ue, arg_text(a, "ue_id")));
    });
    server->host(specs[4], [](const Arguments& a, SessionState& s, Clock&) {
        return plain(sim::ip_assignment(s.ue, arg_text(a, "ue_id"), arg_text(a, "address"),
                                        arg_text(a, "session_type"), optional_arg(a, "secondary_address")));
    });
    if (repository) host_repository(*server, std::move(repository));
    return server;
}

std::unique_ptr<ToolServer> make_kpi_server(std::shared_ptr<const sim::KpiToolPool> pool,
                                            std::shared_ptr<const sim::ProcedureRepository> repository,
                                            std::shared_ptr<Clock> clock) {
    auto server = std::make_unique<ToolServer>(3, std::move(clock));
    for (auto& spec : pool->tool_specs()) {
        auto name = spec.name;
        server->host(std::move(spec), [pool, name](const Arguments& a, SessionState&, Clock&) {
            return plain(sim::kpi_query(*pool, name, arg_text(a, "region")));
        });
    }
    if (repository) host_repository(*server, std::move(repository));
    return server;
}

// ---------------------------------------------------------------------------

json LoopbackTransport::exchange(const json& request, const std::string& session) {
    return json::parse(server_.handle_text(request.dump(), session));
}

std::vector<Endpoint> parse_server_list(const std::string& list) {
    std::vector<Endpoint> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const auto colon = item.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == item.size())
            throw std::invalid_argument("server endpoint '" + item + "' is not host:port");
        int port = 0;
        try {
            std::size_t used = 0;
            port = std::stoi(item.substr(colon + 1), &used);
            if (used != item.size() - colon - 1) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw std::invalid_argument("server endpoint '" + item + "' has a bad port");
        }
        if (port <= 0 || port > 65535) throw std::invalid_argument("server endpoint '" + item + "' has a bad port");
        out.push_back(Endpoint{item.substr(0, colon), port});
    }
    if (out.empty() || out.size() > 3) throw std::invalid_argument("expected one to three server endpoints");
    return out;
}

// ---------------------------------------------------------------------------

long ToolClient::next_id() {
    std::lock_guard lock(id_mutex_);
    return next_id_++;
}

std::vector<ToolSpec> ToolClient::list_tools(const std::string& session) {
    const json request{{"jsonrpc", "2.0"}, {"id", next_id()}, {"method", "tools/list"}};
    const auto response = transport_->exchange(request, session);
    if (response.contains("error"))
        throw std::runtime_error("tools/list failed: " + response["error"].value("message", std::string{}));
    return response.at("result").at("tools").get<std::vector<ToolSpec>>();
}

CallOutcome ToolClient::call_tool(const std::string& name, const Arguments& args, const std::string& session,
                                  Clock& clock) {
    const json request{{"jsonrpc", "2.0"},
                       {"id", next_id()},
                       {"method", "tools/call"},
                       {"params", {{"name", name}, {"arguments", arguments_to_json(args)}}}};
    CallOutcome out;
    out.started_at = clock.now();
    try {
        const auto response = transport_->exchange(request, session);
        if (const auto err = response.find("error"); err != response.end()) {
            const auto data = err->value("data", json::object());
            out.error_kind = data.is_object() ? data.value("kind", std::string("protocol")) : "protocol";
            out.content = json{{"error", err->value("message", std::string{})}, {"kind", out.error_kind}};
            if (data.is_object() && data.contains("problems")) out.content["problems"] = data["problems"];
        } else {
            const auto& result = response.at("result");
            out.content = result.value("content", json());
            out.success = !result.value("is_error", false);
            if (!out.success) out.error_kind = "tool_error";
            if (const auto it = result.find("internal_calls"); it != result.end())
                out.internal_calls = it->get<std::vector<ToolCallRecord>>();
        }
    } catch (const TransportError& e) {
        out = CallOutcome{json{{"error", e.what()}, {"kind", "transport"}}, false, {}, out.started_at, 0, "transport"};
    } catch (const std::exception& e) {
        out = CallOutcome{json{{"error", e.what()}, {"kind", "protocol"}}, false, {}, out.started_at, 0, "protocol"};
    }
    out.ended_at = clock.now();
    return out;
}

}  // namespace toolseq::wire
