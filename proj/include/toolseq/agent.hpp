#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "toolseq/clock.hpp"
#include "toolseq/model.hpp"
#include "toolseq/wire.hpp"

namespace toolseq::agent {

enum class Role { System, User, Assistant, Tool };

struct ToolCallRequest {
    std::string id;
    std::string name;
    // Raw JSON text of the arguments object, as emitted by the model.
    std::string arguments;
};

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCallRequest> tool_calls;  // assistant turns
    std::string tool_call_id;                 // tool results
    std::string name;                         // tool results: tool name
};

struct AssistantTurn {
    std::string text;
    std::vector<ToolCallRequest> tool_calls;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model access. One call = one reasoning step. Implementations throw
/// BackendError on transport failure.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual std::string model_id() const = 0;
    virtual AssistantTurn next_turn(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) = 0;
};

/// Serializes access for backends that are not safe to share.
class SerializingBackend final : public ModelBackend {
public:
    explicit SerializingBackend(std::shared_ptr<ModelBackend> inner) : inner_(std::move(inner)) {}
    std::string model_id() const override { return inner_->model_id(); }
    AssistantTurn next_turn(const std::vector<ChatMessage>& history, const std::vector<ToolSpec>& tools) override {
        std::lock_guard lock(mutex_);
        return inner_->next_turn(history, tools);
    }

private:
    std::shared_ptr<ModelBackend> inner_;
    std::mutex mutex_;
};

struct ParsedCall {
    std::string id;
    std::string name;
    Arguments arguments;
    bool malformed_arguments = false;
};

/// Extracts tool-call requests in emission order. An argument blob that is not
/// a JSON object yields an empty argument map instead of an error.
std::vector<ParsedCall> parse_tool_calls(const AssistantTurn& turn);

/// Reads a chat-completions assistant message ({content, tool_calls[]}).
AssistantTurn assistant_turn_from_json(const json& message);

// ---------------------------------------------------------------------------
// Approach context
// ---------------------------------------------------------------------------

struct PromptPair {
    std::string system;
    std::string user;
};

/// Fixed prompt templates and procedure renderings for one scenario.
/// Templates use {{name}} placeholders: {{catalog}}, {{steps}},
/// {{intent_text}}, plus every structured intent field.
struct ScenarioPrompts {
    std::string version;
    std::map<Approach, PromptPair> templates;
    std::string catalog;
    int procedure_server = 2;
    int encapsulated_server = 1;
};

struct ApproachContext {
    Approach approach = Approach::A1;
    std::string system_prompt;
    std::string user_prompt;
    std::vector<int> visible_servers;
    bool repository_visible = false;
};

/// Numbered step list with bound arguments, e.g. "1. ue_authorization(ue_id=ue-001, ...)".
std::string render_steps(const Procedure& procedure);

/// Deterministic prompt assembly. Throws std::invalid_argument when the
/// approach has no template or a required rendering is missing.
ApproachContext build_context(Approach approach, const Intent& intent, const Procedure& procedure,
                              const ScenarioPrompts& prompts);

// ---------------------------------------------------------------------------
// Agent loop
// ---------------------------------------------------------------------------

struct Limits {
    int max_turns = 12;
};

/// Default cap 2k + 6 on model invocations.
inline Limits default_limits(std::size_t k) { return Limits{static_cast<int>(2 * k + 6)}; }

using ServerMap = std::map<int, std::shared_ptr<wire::ToolClient>>;

/// Runs one intent to completion. Tool failures go back to the model as error
/// results; a backend failure ends the run with terminated_reason
/// backend_error and the partial trace. The returned record has no run_id,
/// scenario or expected procedure; the caller fills those in.
RunRecord run_agent(const ApproachContext& context, const Intent& intent, ModelBackend& backend,
                    const ServerMap& servers, const Limits& limits, Clock& clock, const std::string& session);

}  // namespace toolseq::agent
