#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dsner/adapt.hpp"
#include "json.hpp"

namespace dsner {

// Append-only JSON-lines event log. Each event gets "seq" and "ts" fields.
class RunJournal {
 public:
  explicit RunJournal(std::string path);
  const std::string& path() const noexcept { return path_; }
  void append(nlohmann::json event);
  std::vector<nlohmann::json> read() const;
  std::size_t size() const noexcept { return seq_; }

 private:
  std::string path_;
  std::size_t seq_ = 0;
};

struct AnnotationItem {
  std::size_t id = 0;
  std::vector<std::string> tokens;
  double model_confidence = 0;
  std::vector<std::string> model_suggestion;
  bool submitted = false;
  std::vector<std::string> submitted_labels;
  nlohmann::json to_json() const;
};

struct HttpResult {
  int status = 200;
  nlohmann::json body;
};

// Interactive oracle for the active-learning loop. All state changes are
// journaled under `state_dir`; constructing a service over an existing journal
// replays it.
class AnnotationService {
 public:
  AnnotationService(ActiveConfig config, std::vector<PoolItem> pool, std::string state_dir,
                    nlohmann::json run_config = nlohmann::json::object());

  HttpResult get_queue() const;
  HttpResult post_labels(const std::string& body);
  HttpResult post_round();
  HttpResult get_metrics() const;
  HttpResult get_status() const;
  HttpResult handle(const std::string& method, const std::string& path, const std::string& body);

  std::size_t replayed_events() const noexcept { return replayed_; }

 private:
  struct Snapshot {
    nlohmann::json queue, status, metrics;
  };

  void replay(const std::vector<nlohmann::json>& events);
  void queue_next(bool journal);
  void rebuild_items();
  void publish();
  std::optional<std::string> validate_labels(const AnnotationItem& item, const std::vector<std::string>& labels,
                                             std::string& field) const;
  std::shared_ptr<const Snapshot> snapshot() const;

  ActiveSession session_;
  std::string state_dir_;
  RunJournal journal_;
  nlohmann::json run_config_;
  std::vector<std::string> entity_types_;
  std::vector<AnnotationItem> items_;
  std::size_t replayed_ = 0;

  mutable std::mutex state_mu_;  // items_ and the journal
  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snap_;
  std::atomic<bool> round_running_{false};
};

}  // namespace dsner

namespace dsner {

// HTTP front end for AnnotationService: the JSON API plus static files at `/`.
class HttpFrontend {
 public:
  explicit HttpFrontend(AnnotationService& service, std::string static_dir = "");
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  // Binds without serving yet; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  void run();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dsner
