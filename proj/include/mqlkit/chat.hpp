#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mqlkit/document_db.hpp"
#include "mqlkit/errors.hpp"

namespace mqlkit {

struct ChatMessage {
  std::string role;
  std::string content;
};

/// Chat-completion provider. The tag identifies the call site as
/// "<example id>/<stage>"; transports ignore it, scripted mocks key on it.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const std::string& tag) = 0;
  virtual std::string model_name() const = 0;
};

/// Returns the last user message verbatim. A pipeline wired to echo clients
/// can only ever hand back what it was given, which makes the orchestration
/// itself testable in isolation.
class EchoChatClient : public ChatClient {
 public:
  std::string complete(const std::vector<ChatMessage>& messages,
                       const std::string&) override {
    for (std::size_t i = messages.size(); i-- > 0;)
      if (messages[i].role == "user") return messages[i].content;
    return "";
  }

  std::string model_name() const override { return "echo"; }
};

/// Replays canned replies keyed by call tag. Repeated calls with one tag
/// consume that tag's replies in order; the last reply repeats once the
/// list is exhausted. Unknown tags raise ProviderError so fixture gaps
/// surface as test failures instead of silent empties.
class ScriptedChatClient : public ChatClient {
 public:
  ScriptedChatClient() = default;

  explicit ScriptedChatClient(
      std::map<std::string, std::vector<std::string>> replies)
      : replies_(std::move(replies)) {}

  /// Loads a JSON object {tag: reply-string | [reply, ...], ...}.
  static ScriptedChatClient from_file(const std::string& path) {
    auto j = nlohmann::ordered_json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw SchemaError("scripted replies file is not a JSON object: " + path);
    std::map<std::string, std::vector<std::string>> replies;
    for (const auto& [tag, value] : j.items()) {
      if (value.is_string()) {
        replies[tag].push_back(value.get<std::string>());
      } else if (value.is_array()) {
        for (const auto& e : value) {
          if (!e.is_string())
            throw SchemaError("scripted reply for '" + tag + "' is not text");
          replies[tag].push_back(e.get<std::string>());
        }
      } else {
        throw SchemaError("scripted reply for '" + tag + "' is not text");
      }
    }
    return ScriptedChatClient(std::move(replies));
  }

  void add_reply(const std::string& tag, std::string reply) {
    replies_[tag].push_back(std::move(reply));
  }

  std::string complete(const std::vector<ChatMessage>&,
                       const std::string& tag) override {
    auto it = replies_.find(tag);
    if (it == replies_.end() || it->second.empty())
      throw ProviderError(0, "no scripted reply for tag '" + tag + "'");
    std::size_t& used = cursor_[tag];
    std::size_t idx = used < it->second.size() ? used : it->second.size() - 1;
    ++used;
    return it->second[idx];
  }

  /// Number of completions served for a tag, for call accounting in tests.
  std::size_t calls(const std::string& tag) const {
    auto it = cursor_.find(tag);
    return it == cursor_.end() ? 0 : it->second;
  }

  std::string model_name() const override { return "scripted"; }

 private:
  std::map<std::string, std::vector<std::string>> replies_;
  std::map<std::string, std::size_t> cursor_;
};

}  // namespace mqlkit
