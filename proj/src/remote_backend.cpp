#include "toolseq/remote_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

namespace toolseq::agent {

json tool_descriptor(const ToolSpec& tool) {
    json properties = json::object();
    json required = json::array();
    for (const auto& p : tool.params) {
        json prop{{"type", p.kind == ValueKind::Integer ? "integer" : "string"}};
        if (!p.description.empty()) prop["description"] = p.description;
        if (p.kind == ValueKind::Enum) prop["enum"] = p.enum_values;
        properties[p.name] = std::move(prop);
        if (p.required) required.push_back(p.name);
    }
    return json{{"type", "function"},
                {"function",
                 {{"name", tool.name},
                  {"description", tool.description},
                  {"parameters", {{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}}}}}};
}

json message_to_json(const ChatMessage& message) {
    switch (message.role) {
        case Role::System: return json{{"role", "system"}, {"content", message.content}};
        case Role::User: return json{{"role", "user"}, {"content", message.content}};
        case Role::Tool:
            return json{{"role", "tool"}, {"tool_call_id", message.tool_call_id}, {"content", message.content}};
        case Role::Assistant: {
            json out{{"role", "assistant"}};
            out["content"] = message.content.empty() && !message.tool_calls.empty() ? json(nullptr) : json(message.content);
            if (!message.tool_calls.empty()) {
                json calls = json::array();
                for (const auto& c : message.tool_calls)
                    calls.push_back({{"id", c.id}, {"type", "function"}, {"function", {{"name", c.name}, {"arguments", c.arguments}}}});
                out["tool_calls"] = std::move(calls);
            }
            return out;
        }
    }
    return json::object();
}

RemoteLlmBackend::RemoteLlmBackend(EndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw std::invalid_argument("remote backend needs a base_url");
    if (config_.retries < 0) throw std::invalid_argument("retries must be non-negative");
}

json RemoteLlmBackend::build_request(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) const {
    json messages = json::array();
    for (const auto& m : history) messages.push_back(message_to_json(m));
    json body{{"model", config_.model},
              {"messages", std::move(messages)},
              {"temperature", config_.temperature},
              {"max_tokens", config_.max_tokens}};
    if (!tools.empty()) {
        json descriptors = json::array();
        for (const auto& t : tools) descriptors.push_back(tool_descriptor(t));
        body["tools"] = std::move(descriptors);
        body["tool_choice"] = "auto";
    }
    return body;
}

namespace {

struct SplitUrl {
    std::string scheme_host_port;
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("base_url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    auto path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_start), path};
}

}  // namespace

AssistantTurn RemoteLlmBackend::next_turn(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) {
    const auto url = split_url(config_.base_url);
    const auto body = build_request(history, tools).dump();

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0')
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    int delay_ms = config_.backoff_ms;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            if (retry_sink_) retry_sink_(fmt::format("{}: retry {}/{} after {}", config_.model_id, attempt, config_.retries, last_error));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms *= 2;
        }
        httplib::Client client(url.scheme_host_port);
        const auto sec = static_cast<time_t>(config_.timeout_seconds);
        const auto usec = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(sec)) * 1e6);
        client.set_connection_timeout(sec, usec);
        client.set_read_timeout(sec, usec);
        client.set_write_timeout(sec, usec);

        const auto res = client.Post(url.path + "/chat/completions", headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        const auto parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty()) {
            last_error = "response has no choices";
            continue;
        }
        return assistant_turn_from_json(parsed["choices"][0].value("message", json::object()));
    }
    throw BackendError(fmt::format("{}: giving up after {} attempt(s): {}", config_.model_id, config_.retries + 1, last_error));
}

}  // namespace toolseq::agent
