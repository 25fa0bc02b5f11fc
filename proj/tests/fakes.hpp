#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "aps/gateway.hpp"

namespace aps::testing {

// Backend driven by a callback; records every request it sees.
class ScriptedBackend final : public ChatBackend {
 public:
  using Reply = std::function<std::string(const ChatRequest&, std::size_t call)>;
  explicit ScriptedBackend(Reply reply) : reply_(std::move(reply)) {}

  std::string id() const override { return "scripted"; }
  std::string complete(const ChatRequest& request) override {
    std::size_t call;
    {
      std::lock_guard lock(mu_);
      call = seen_.size();
      seen_.push_back(request);
    }
    return reply_(request, call);
  }

  std::vector<ChatRequest> seen() const {
    std::lock_guard lock(mu_);
    return seen_;
  }

 private:
  Reply reply_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> seen_;
};

inline RetryPolicy fast_retry(std::size_t attempts = 5) {
  return {attempts, std::chrono::milliseconds(0), std::chrono::milliseconds(0)};
}

}  // namespace aps::testing
