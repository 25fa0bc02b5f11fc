#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "aps/types.hpp"

namespace aps {

// Which role a completion serves: prompt generator, data synthesiser or
// downstream solver.
enum class Stage { Forge = 0, Synthesize = 1, Solve = 2 };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Forge: return "forge";
    case Stage::Synthesize: return "synthesize";
    case Stage::Solve: return "solve";
  }
  return "?";
}

enum class Role { System, User };

inline std::string_view to_string(Role r) { return r == Role::System ? "system" : "user"; }

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  GenerationParams params;
  Stage stage = Stage::Solve;

  void validate() const {
    if (messages.empty()) throw Error(ErrorKind::Precondition, "chat request has no messages");
    if (params.temperature < 0 || params.temperature > 2 || !(params.top_p > 0) || params.top_p > 1 ||
        params.max_tokens <= 0)
      throw Error(ErrorKind::Precondition, "generation parameters out of range");
  }

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct LedgerSnapshot {
  std::uint64_t forge = 0;
  std::uint64_t synthesize = 0;
  std::uint64_t solve = 0;

  std::uint64_t total() const { return forge + synthesize + solve; }

  std::uint64_t operator[](Stage s) const {
    switch (s) {
      case Stage::Forge: return forge;
      case Stage::Synthesize: return synthesize;
      case Stage::Solve: return solve;
    }
    return 0;
  }

  friend LedgerSnapshot operator-(const LedgerSnapshot& a, const LedgerSnapshot& b) {
    return {a.forge - b.forge, a.synthesize - b.synthesize, a.solve - b.solve};
  }
  friend bool operator==(const LedgerSnapshot&, const LedgerSnapshot&) = default;
};

/// Counts successful completions per stage. Updates are atomic.
class CallLedger {
 public:
  void record(Stage s) { counts_[static_cast<std::size_t>(s)].fetch_add(1, std::memory_order_relaxed); }

  std::uint64_t count(Stage s) const { return counts_[static_cast<std::size_t>(s)].load(std::memory_order_relaxed); }

  std::uint64_t total() const { return snapshot().total(); }

  LedgerSnapshot snapshot() const { return {count(Stage::Forge), count(Stage::Synthesize), count(Stage::Solve)}; }

 private:
  std::array<std::atomic<std::uint64_t>, 3> counts_{};
};

// Thrown by backends for failures worth retrying (timeouts, 429, 5xx).
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GatewayError : public Error {
 public:
  GatewayError(Stage stage, std::size_t attempts, const std::string& last)
      : Error(ErrorKind::Gateway, "stage " + std::string(to_string(stage)) + " failed after " +
                                      std::to_string(attempts) + " attempts: " + last),
        stage_(stage),
        attempts_(attempts) {}

  Stage stage() const { return stage_; }
  std::size_t attempts() const { return attempts_; }

 private:
  Stage stage_;
  std::size_t attempts_;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string id() const = 0;
  // Returns the assistant text or throws TransientFailure / aps::Error.
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  std::size_t max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};

  std::chrono::milliseconds delay_before(std::size_t retry) const {
    auto d = base_delay;
    for (std::size_t i = 1; i < retry && d < max_delay; ++i) d *= 2;
    return std::min(d, max_delay);
  }
};

/// Single route for all LLM traffic. Retries transient failures with
/// exponential backoff, records one ledger entry per successful completion,
/// and runs batches with bounded concurrency while returning results in
/// submission order.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {}, std::size_t max_in_flight = 1)
      : backend_(std::move(backend)), retry_(retry), max_in_flight_(std::max<std::size_t>(max_in_flight, 1)) {}

  std::string complete(const ChatRequest& request) {
    request.validate();
    std::string last_error;
    const std::size_t attempts = std::max<std::size_t>(retry_.max_attempts, 1);
    for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
      if (attempt > 1) std::this_thread::sleep_for(retry_.delay_before(attempt - 1));
      try {
        std::string text = backend_->complete(request);
        ledger_.record(request.stage);
        return text;
      } catch (const TransientFailure& e) {
        last_error = e.what();
      }
    }
    throw GatewayError(request.stage, attempts, last_error);
  }

  std::vector<std::string> complete_all(const std::vector<ChatRequest>& requests) {
    std::vector<std::string> out(requests.size());
    std::vector<std::exception_ptr> errors(requests.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
      for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
        try {
          out[i] = complete(requests[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t threads = std::min(max_in_flight_, requests.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(threads);
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }

  CallLedger& ledger() { return ledger_; }
  const CallLedger& ledger() const { return ledger_; }
  const ChatBackend& backend() const { return *backend_; }
  std::string model_id() const { return backend_->id(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  RetryPolicy retry_;
  std::size_t max_in_flight_;
  CallLedger ledger_;
};

// ---------------------------------------------------------------------------
// Solve/synthesise request layout shared by the pipeline and the simulator.

inline constexpr std::string_view kQuestionTag = "Question: ";
inline constexpr std::string_view kContextTag = "\nContext: ";
inline constexpr std::string_view kAnswerCue = "\n\nFinish with a line of the form \"The answer is X.\"";

/// Prompt (if any) as the system message, question and context as the user
/// message.
inline ChatRequest make_solve_request(std::string_view prompt, const QAExample& ex, const GenerationParams& params,
                                      Stage stage) {
  ChatRequest req;
  req.params = params;
  req.stage = stage;
  if (!prompt.empty()) req.messages.push_back({Role::System, std::string(prompt)});
  std::string user = std::string(kQuestionTag) + ex.question;
  if (!ex.context.empty()) user += std::string(kContextTag) + ex.context;
  user += kAnswerCue;
  req.messages.push_back({Role::User, std::move(user)});
  return req;
}

struct ExpectedCalls {
  std::uint64_t forge_upper_bound = 0;
  std::uint64_t synthesize = 0;
};

/// Call budget of a default run: at most |P| generator completions, and
/// exactly c * m * |P| synthesiser completions.
inline ExpectedCalls ledger_expectation(const PipelineConfig& config, std::size_t database_size) {
  return {database_size, config.clusters * config.examples_per_cluster * database_size};
}

}  // namespace aps
