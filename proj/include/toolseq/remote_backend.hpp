#pragma once

#include <functional>
#include <string>

#include "toolseq/agent.hpp"

namespace toolseq::agent {

struct EndpointConfig {
    std::string model_id;        // label used in run records and reports
    std::string base_url;        // e.g. http://127.0.0.1:8000/v1
    std::string model;           // model name sent to the endpoint
    std::string api_key_env;     // environment variable holding the bearer token, optional
    double temperature = 0.0;
    int max_tokens = 1024;
    int retries = 2;
    int backoff_ms = 500;        // doubles after every failed attempt
    double timeout_seconds = 120;
};

/// Chat-completions client with tool calling. Safe to share across runs.
class RemoteLlmBackend final : public ModelBackend {
public:
    explicit RemoteLlmBackend(EndpointConfig config);

    std::string model_id() const override { return config_.model_id; }
    AssistantTurn next_turn(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) override;

    /// Request body for the endpoint.
    json build_request(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) const;

    /// Receives one line per retry, for logging.
    void on_retry(std::function<void(const std::string&)> sink) { retry_sink_ = std::move(sink); }

private:
    EndpointConfig config_;
    std::function<void(const std::string&)> retry_sink_;
};

/// Function-tool descriptor in chat-completions form.
json tool_descriptor(const ToolSpec& tool);

json message_to_json(const ChatMessage& message);

}  // namespace toolseq::agent
