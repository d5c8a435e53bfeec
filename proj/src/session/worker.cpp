#include "babylon/session/worker.hpp"

#include <fmt/format.h>

#include <vector>

#include "babylon/lang/lexer.hpp"
#include "babylon/lang/parser.hpp"

namespace babylon::session {

using Clock = std::chrono::steady_clock;

Worker::Worker(SessionConfig config) : config_(config), session_(config) {
  thread_ = std::thread([this] { run(); });
}

Worker::~Worker() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  thread_.join();
}

int Worker::touch() {
  ++changes_;
  pending_ = true;
  last_change_ = Clock::now();
  wake_.notify_all();
  int published = last_report_ ? last_report_->revision : 0;
  return published + (executing_ ? 2 : 1);
}

int Worker::update_source(const std::string& module, std::string text) {
  std::lock_guard<std::mutex> lock(mutex_);
  sources_[module] = lang::normalize_newlines(text);
  ++source_versions_[module];
  return touch();
}

int Worker::remove_module(const std::string& module) {
  std::lock_guard<std::mutex> lock(mutex_);
  sources_.erase(module);
  source_versions_.erase(module);
  return touch();
}

namespace {

const std::string& stored(const std::map<std::string, std::string>& sources, const std::string& module) {
  auto it = sources.find(module);
  if (it == sources.end()) throw std::invalid_argument(fmt::format("unknown module \"{}\"", module));
  return it->second;
}

}  // namespace

int Worker::set_annotation(const std::string& module, SourcePos at, const annotations::Annotation& annotation) {
  std::lock_guard<std::mutex> lock(mutex_);
  sources_[module] = with_annotation(stored(sources_, module), at, annotation);
  ++source_versions_[module];
  return touch();
}

int Worker::remove_annotation(const std::string& module, SourcePos at) {
  std::lock_guard<std::mutex> lock(mutex_);
  sources_[module] = annotations::remove_annotation(stored(sources_, module), at);
  ++source_versions_[module];
  return touch();
}

int Worker::set_example_enabled(const std::string& module, const std::string& name, bool enabled) {
  std::lock_guard<std::mutex> lock(mutex_);
  sources_[module] = with_example_enabled(stored(sources_, module), name, enabled);
  ++source_versions_[module];
  return touch();
}

int Worker::set_templates(const std::string& sidecar) {
  annotations::parse_templates(sidecar);
  std::lock_guard<std::mutex> lock(mutex_);
  templates_ = sidecar;
  return touch();
}

int Worker::set_resource(const std::string& name, const ResourceSpec& spec) {
  if (spec.kind == ResourceSpec::Kind::Expression) {
    lang::parse_expression(spec.text);
  } else if (spec.text != "canvas") {
    throw std::invalid_argument(fmt::format("unknown mock \"{}\"", spec.text));
  }
  std::lock_guard<std::mutex> lock(mutex_);
  resources_[name] = spec;
  return touch();
}

std::optional<std::string> Worker::source(const std::string& module) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = sources_.find(module);
  if (it == sources_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Worker::module_names() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [k, v] : sources_) out.push_back(k);
  return out;
}

int Worker::request_evaluation() {
  std::lock_guard<std::mutex> lock(mutex_);
  ++forced_;
  pending_ = true;
  wake_.notify_all();
  int published = last_report_ ? last_report_->revision : 0;
  return published + (executing_ ? 2 : 1);
}

std::shared_ptr<const EvaluationReport> Worker::evaluate_now() {
  std::unique_lock<std::mutex> lock(mutex_);
  std::uint64_t changes = changes_;
  std::uint64_t request = ++forced_;
  pending_ = true;
  wake_.notify_all();
  published_.wait(lock, [&] { return stop_ || (forced_done_ >= request && changes_done_ >= changes); });
  return last_report_;
}

std::shared_ptr<const EvaluationReport> Worker::wait_for(int revision, std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(mutex_);
  published_.wait_for(lock, timeout, [&] { return last_report_ && last_report_->revision >= revision; });
  return last_report_;
}

std::shared_ptr<const EvaluationReport> Worker::last_report() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return last_report_;
}

int Worker::subscribe(Subscriber subscriber) {
  std::lock_guard<std::mutex> lock(mutex_);
  int id = next_subscriber_++;
  subscribers_[id] = std::move(subscriber);
  return id;
}

void Worker::unsubscribe(int id) {
  std::lock_guard<std::mutex> lock(mutex_);
  subscribers_.erase(id);
}

Worker::Stats Worker::stats() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

void Worker::run() {
  const auto debounce = std::chrono::milliseconds(config_.debounce_ms);
  std::unique_lock<std::mutex> lock(mutex_);
  while (true) {
    wake_.wait(lock, [&] { return stop_ || pending_; });
    if (stop_) break;
    bool forced = forced_ > forced_done_;
    auto due = last_change_ + debounce;
    if (!forced && Clock::now() < due) {
      wake_.wait_until(lock, due);
      continue;
    }
    pending_ = false;
    std::uint64_t seen = changes_;
    std::uint64_t forced_seen = forced_;

    std::vector<std::pair<std::string, std::string>> updates;
    std::vector<std::string> removals;
    for (const auto& [name, version] : source_versions_) {
      if (synced_versions_[name] != version) updates.emplace_back(name, sources_[name]);
    }
    for (auto it = synced_versions_.begin(); it != synced_versions_.end();) {
      if (!source_versions_.count(it->first)) {
        removals.push_back(it->first);
        it = synced_versions_.erase(it);
      } else {
        it->second = source_versions_[it->first];
        ++it;
      }
    }
    std::optional<std::string> templates = std::move(templates_);
    templates_.reset();
    auto resources = std::move(resources_);
    resources_.clear();
    ++stats_.started;
    lock.unlock();

    for (const std::string& name : removals) session_.remove_module(name);
    for (auto& [name, text] : updates) session_.update_source(name, std::move(text));
    if (templates) session_.set_templates(*templates);
    for (const auto& [name, spec] : resources) {
      try {
        session_.set_resource(name, spec);
      } catch (const std::exception&) {
        // Left unbound; examples naming it fail to instrument.
      }
    }
    auto report = session_.evaluate([&] {
      std::lock_guard<std::mutex> guard(mutex_);
      if (changes_ != seen) return true;
      executing_ = true;
      return false;
    });

    lock.lock();
    executing_ = false;
    if (!report) {
      ++stats_.cancelled;
      pending_ = true;
      continue;
    }
    ++stats_.completed;
    last_report_ = report;
    changes_done_ = seen;
    forced_done_ = forced_seen;
    auto subscribers = subscribers_;
    lock.unlock();
    for (auto& [id, sub] : subscribers) sub(report);
    lock.lock();
    published_.notify_all();
  }
  published_.notify_all();
}

}  // namespace babylon::session
