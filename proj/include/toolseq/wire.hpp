#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "toolseq/clock.hpp"
#include "toolseq/kpi.hpp"
#include "toolseq/model.hpp"
#include "toolseq/toolsim.hpp"

// Minimal JSON-RPC tool-server protocol (tools/list, tools/call) with
// per-run session isolation, plus the client used by the agent runtime.

namespace toolseq::wire {

inline constexpr const char* kSessionHeader = "X-Run-Session";
inline constexpr const char* kRpcPath = "/rpc";

namespace rpc_code {
inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;
inline constexpr int kInternalError = -32603;
}  // namespace rpc_code

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-run mutable tool state.
struct SessionState {
    sim::UeSession ue;
};

using ToolOutput = sim::EncapsulatedResult;
/// Handlers get validated arguments, the caller's session state and the
/// server clock (for timing internal sub-calls).
using Handler = std::function<ToolOutput(const Arguments&, SessionState&, Clock&)>;

class ToolServer {
public:
    explicit ToolServer(int server_id, std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

    ToolServer(const ToolServer&) = delete;
    ToolServer& operator=(const ToolServer&) = delete;

    int id() const { return id_; }
    void host(ToolSpec spec, Handler handler);
    const ToolRegistry& registry() const { return registry_; }

    /// Invokes a handler directly, bypassing the protocol. Throws
    /// std::out_of_range for an unknown tool.
    ToolOutput invoke(const std::string& name, const Arguments& args, const std::string& session);

    /// Handles one JSON-RPC request document and returns the response document.
    json handle(const json& request, const std::string& session);
    std::string handle_text(const std::string& body, const std::string& session);

    std::size_t session_count() const;

private:
    struct Hosted {
        ToolSpec spec;
        Handler handler;
    };
    struct Slot {
        std::mutex mutex;
        SessionState state;
    };

    std::shared_ptr<Slot> slot_for(const std::string& session);
    json call(const json& id, const json& params, const std::string& session);

    int id_;
    std::shared_ptr<Clock> clock_;
    ToolRegistry registry_;
    std::vector<Hosted> hosted_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

/// Server 1: encapsulated procedure tools.
std::unique_ptr<ToolServer> make_encapsulated_server(std::shared_ptr<const sim::FixtureSet> fixtures,
                                                     std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());
/// Server 2: the five allocation tools, plus the repository meta tool when given.
std::unique_ptr<ToolServer> make_allocation_server(std::shared_ptr<const sim::FixtureSet> fixtures,
                                                   std::shared_ptr<const sim::ProcedureRepository> repository,
                                                   std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());
/// Server 3: the KPI pool, plus the repository meta tool when given.
std::unique_ptr<ToolServer> make_kpi_server(std::shared_ptr<const sim::KpiToolPool> pool,
                                            std::shared_ptr<const sim::ProcedureRepository> repository = nullptr,
                                            std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

class Transport {
public:
    virtual ~Transport() = default;
    /// Sends one request document; throws TransportError on failure.
    virtual json exchange(const json& request, const std::string& session) = 0;
};

/// In-process transport. Requests still pass through text serialization.
class LoopbackTransport final : public Transport {
public:
    explicit LoopbackTransport(ToolServer& server) : server_(server) {}
    json exchange(const json& request, const std::string& session) override;

private:
    ToolServer& server_;
};

class HttpTransport final : public Transport {
public:
    HttpTransport(std::string host, int port, double timeout_seconds = 10.0);
    json exchange(const json& request, const std::string& session) override;

private:
    std::string host_;
    int port_;
    double timeout_seconds_;
};

/// Serves a ToolServer over HTTP POST on a background thread.
class HttpToolServer {
public:
    explicit HttpToolServer(ToolServer& server);
    ~HttpToolServer();

    HttpToolServer(const HttpToolServer&) = delete;
    HttpToolServer& operator=(const HttpToolServer&) = delete;

    /// Binds and starts listening; port 0 picks a free port. Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Blocks serving on the calling thread.
    void listen_blocking(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

struct Endpoint {
    std::string host;
    int port = 0;
};

/// Parses "host:port,host:port,host:port" into server ids 1..3.
std::vector<Endpoint> parse_server_list(const std::string& list);

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

struct CallOutcome {
    json content;
    bool success = false;
    // Internal sub-calls of encapsulated tools, timestamps on the server clock.
    std::vector<ToolCallRecord> internal_calls;
    Millis started_at = 0;
    Millis ended_at = 0;
    // "", "tool_error", "not_found", "validation", "transport" or "protocol".
    std::string error_kind;
};

class ToolClient {
public:
    explicit ToolClient(std::shared_ptr<Transport> transport) : transport_(std::move(transport)) {}

    /// Throws TransportError or std::runtime_error on a protocol error.
    std::vector<ToolSpec> list_tools(const std::string& session = "list");

    /// Never throws: every failure becomes a failed outcome the agent can see.
    CallOutcome call_tool(const std::string& name, const Arguments& args, const std::string& session, Clock& clock);

private:
    std::shared_ptr<Transport> transport_;
    std::mutex id_mutex_;
    long next_id_ = 1;
    long next_id();
};

}  // namespace toolseq::wire
