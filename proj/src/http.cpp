#include <atomic>
#include <thread>

#include <httplib.h>

#include "toolseq/wire.hpp"

namespace toolseq::wire {

HttpTransport::HttpTransport(std::string host, int port, double timeout_seconds)
    : host_(std::move(host)), port_(port), timeout_seconds_(timeout_seconds) {}

json HttpTransport::exchange(const json& request, const std::string& session) {
    httplib::Client client(host_, port_);
    const auto sec = static_cast<time_t>(timeout_seconds_);
    const auto usec = static_cast<time_t>((timeout_seconds_ - static_cast<double>(sec)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);

    httplib::Headers headers{{kSessionHeader, session}};
    const auto res = client.Post(kRpcPath, headers, request.dump(), "application/json");
    if (!res) throw TransportError("request to " + host_ + ":" + std::to_string(port_) +
                                   " failed: " + httplib::to_string(res.error()));
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw TransportError(std::string("malformed response body: ") + e.what());
    }
}

struct HttpToolServer::Impl {
    explicit Impl(ToolServer& s) : server(s) {
        http.Post(kRpcPath, [this](const httplib::Request& req, httplib::Response& res) {
            const auto session = req.get_header_value(kSessionHeader);
            res.set_content(server.handle_text(req.body, session), "application/json");
        });
    }

    ToolServer& server;
    httplib::Server http;
    std::thread worker;
};

HttpToolServer::HttpToolServer(ToolServer& server) : impl_(std::make_unique<Impl>(server)) {}

HttpToolServer::~HttpToolServer() { stop(); }

int HttpToolServer::start(const std::string& host, int port) {
    if (port == 0) {
        port_ = impl_->http.bind_to_any_port(host);
    } else if (impl_->http.bind_to_port(host, port)) {
        port_ = port;
    } else {
        port_ = -1;
    }
    if (port_ <= 0) throw TransportError("cannot bind " + host + ":" + std::to_string(port));
    impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return port_;
}

void HttpToolServer::listen_blocking(const std::string& host, int port) {
    port_ = port;
    if (!impl_->http.listen(host, port)) throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpToolServer::stop() {
    if (!impl_) return;
    impl_->http.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace toolseq::wire
