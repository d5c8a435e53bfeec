#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "babylon/session/session.hpp"

namespace babylon::session {

// Owns a Session and evaluates it on a background thread. Edits are
// validated and stored immediately; evaluation starts once no edit arrived
// for the debounce window. An edit landing before execution starts cancels
// the evaluation in progress, which then restarts with the newer inputs.
class Worker {
 public:
  explicit Worker(SessionConfig config = {});
  ~Worker();
  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;

  // Each edit returns the revision of the report expected to answer it.
  int update_source(const std::string& module, std::string text);
  int remove_module(const std::string& module);
  int set_annotation(const std::string& module, SourcePos at, const annotations::Annotation& annotation);
  int remove_annotation(const std::string& module, SourcePos at);
  int set_example_enabled(const std::string& module, const std::string& name, bool enabled);
  // Throws annotations::TemplateSyntaxError.
  int set_templates(const std::string& sidecar);
  // Throws lang::ParseError for a malformed expression.
  int set_resource(const std::string& name, const ResourceSpec& spec);

  std::optional<std::string> source(const std::string& module) const;
  std::vector<std::string> module_names() const;

  // Skips the debounce window. Returns the revision expected to answer it.
  int request_evaluation();
  // Skips the debounce window and waits for a report that reflects every
  // edit made before the call.
  std::shared_ptr<const EvaluationReport> evaluate_now();
  // Waits until a report with at least `revision` is published.
  std::shared_ptr<const EvaluationReport> wait_for(int revision, std::chrono::milliseconds timeout);
  std::shared_ptr<const EvaluationReport> last_report() const;

  // Called on the worker thread, in revision order.
  int subscribe(Subscriber subscriber);
  void unsubscribe(int id);

  struct Stats {
    int started = 0;
    int completed = 0;
    int cancelled = 0;
  };
  Stats stats() const;

 private:
  int touch();  // requires mutex_
  void run();

  SessionConfig config_;
  Session session_;
  std::thread thread_;

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable published_;
  bool stop_ = false;

  // Inputs as edited, applied to the session when an evaluation starts.
  std::map<std::string, std::string> sources_;
  std::map<std::string, std::uint64_t> source_versions_;
  std::map<std::string, std::uint64_t> synced_versions_;
  std::optional<std::string> templates_;
  std::map<std::string, ResourceSpec> resources_;

  std::uint64_t changes_ = 0;
  std::uint64_t forced_ = 0;        // evaluate_now requests
  std::uint64_t forced_done_ = 0;
  std::uint64_t changes_done_ = 0;  // changes reflected by the last report
  bool pending_ = false;
  bool executing_ = false;
  std::chrono::steady_clock::time_point last_change_;
  std::shared_ptr<const EvaluationReport> last_report_;
  std::map<int, Subscriber> subscribers_;
  int next_subscriber_ = 1;
  Stats stats_;
};

}  // namespace babylon::session
