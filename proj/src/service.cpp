#include "dsner/service.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>

#include "httplib.h"

namespace dsner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

HttpResult error(int status, const std::string& msg, json extra = json::object()) {
  extra["error"] = msg;
  return {status, std::move(extra)};
}

}  // namespace

RunJournal::RunJournal(std::string path) : path_(std::move(path)) {
  if (fs::exists(path_)) seq_ = read().size();
}

void RunJournal::append(json event) {
  event["seq"] = seq_;
  event["ts"] = utc_now();
  std::ofstream f(path_, std::ios::app | std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot append to journal " + path_);
  f << event.dump() << '\n';
  f.flush();
  if (!f) fail(ErrorKind::io, "write failed on journal " + path_);
  ++seq_;
}

std::vector<json> RunJournal::read() const {
  std::vector<json> out;
  if (!fs::exists(path_)) return out;
  std::ifstream f(path_, std::ios::binary);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception&) {
      // a torn final line from a crash mid-write is dropped
      if (f.peek() == std::char_traits<char>::eof()) break;
      fail(ErrorKind::parse, path_ + ":" + std::to_string(lineno) + ": malformed journal event");
    }
  }
  return out;
}

json AnnotationItem::to_json() const {
  json j{{"id", id},
         {"tokens", tokens},
         {"model_confidence", model_confidence},
         {"model_suggestion", model_suggestion},
         {"status", submitted ? "submitted" : "queued"}};
  if (submitted) j["submitted_labels"] = submitted_labels;
  return j;
}

AnnotationService::AnnotationService(ActiveConfig config, std::vector<PoolItem> pool, std::string state_dir, json run_config)
    : session_(std::move(config), std::move(pool)),
      state_dir_(std::move(state_dir)),
      journal_((fs::create_directories(state_dir_), (fs::path(state_dir_) / "journal.jsonl").string())),
      run_config_(std::move(run_config)) {
  const auto events = journal_.read();
  if (events.empty()) {
    session_.start();
    journal_.append({{"event", "start"}});
    write_history(state_dir_, session_);
  } else {
    replay(events);
  }
  entity_types_ = session_.model().labels.entity_types();
  if (session_.pending().empty() && !session_.done()) queue_next(true);
  publish();
}

void AnnotationService::replay(const std::vector<json>& events) {
  for (const auto& e : events) {
    const std::string kind = e.value("event", "");
    if (kind == "start") {
      if (session_.started()) fail(ErrorKind::parse, "journal: duplicate start event");
      session_.start();
    } else if (kind == "queued") {
      queue_next(false);
      std::vector<std::size_t> ids;
      for (const auto& it : items_) ids.push_back(it.id);
      if (ids != e.at("ids").get<std::vector<std::size_t>>())
        fail(ErrorKind::state, "journal replay diverged: queued ids differ from the recorded batch");
    } else if (kind == "labels") {
      const auto id = e.at("id").get<std::size_t>();
      auto it = std::find_if(items_.begin(), items_.end(), [&](const AnnotationItem& a) { return a.id == id; });
      if (it == items_.end()) fail(ErrorKind::state, "journal replay: labels for an item not in the queue");
      it->submitted = true;
      it->submitted_labels = e.at("labels").get<std::vector<std::string>>();
    } else if (kind == "round") {
      std::vector<std::vector<std::string>> labels;
      for (const auto& it : items_) {
        if (!it.submitted) fail(ErrorKind::state, "journal replay: round recorded with unsubmitted items");
        labels.push_back(it.submitted_labels);
      }
      session_.complete(labels);
      items_.clear();
    } else {
      fail(ErrorKind::parse, "journal: unknown event '" + kind + "'");
    }
    ++replayed_;
  }
  if (!session_.started()) fail(ErrorKind::parse, "journal has no start event");
}

void AnnotationService::queue_next(bool journal) {
  session_.select();
  rebuild_items();
  if (journal && !items_.empty()) {
    std::vector<std::size_t> ids;
    for (const auto& it : items_) ids.push_back(it.id);
    journal_.append({{"event", "queued"}, {"round", session_.rounds().size() + 1}, {"ids", ids}});
  }
}

void AnnotationService::rebuild_items() {
  items_.clear();
  for (const auto& c : session_.pending()) {
    const auto it = std::find_if(session_.pool().begin(), session_.pool().end(), [&](const PoolItem& p) { return p.id == c.id; });
    items_.push_back({c.id, it->tokens, c.confidence, c.suggestion, false, {}});
  }
}

void AnnotationService::publish() {
  auto s = std::make_shared<Snapshot>();
  s->queue = {{"round", session_.rounds().size() + 1}, {"items", json::array()}};
  std::size_t submitted = 0;
  for (const auto& it : items_) {
    s->queue["items"].push_back(it.to_json());
    submitted += it.submitted ? 1 : 0;
  }
  s->status = session_.status_json();
  s->status["queue_size"] = items_.size();
  s->status["queue_submitted"] = submitted;
  s->status["entity_types"] = entity_types_;
  s->status["config"] = run_config_;
  s->metrics = session_.history_json();
  std::lock_guard<std::mutex> lk(snap_mu_);
  snap_ = std::move(s);
}

std::shared_ptr<const AnnotationService::Snapshot> AnnotationService::snapshot() const {
  std::lock_guard<std::mutex> lk(snap_mu_);
  return snap_;
}

HttpResult AnnotationService::get_queue() const { return {200, snapshot()->queue}; }
HttpResult AnnotationService::get_metrics() const { return {200, snapshot()->metrics}; }

HttpResult AnnotationService::get_status() const {
  json s = snapshot()->status;
  s["round_running"] = round_running_.load();
  return {200, s};
}

std::optional<std::string> AnnotationService::validate_labels(const AnnotationItem& item,
                                                              const std::vector<std::string>& labels,
                                                              std::string& field) const {
  field = "labels";
  if (labels.size() != item.tokens.size())
    return "expected " + std::to_string(item.tokens.size()) + " labels, got " + std::to_string(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::pair<char, std::string> tag;
    try {
      tag = split_tag(labels[i]);
    } catch (const Error&) {
      field = "labels[" + std::to_string(i) + "]";
      return "malformed tag '" + labels[i] + "'";
    }
    if (tag.first != 'O' && std::find(entity_types_.begin(), entity_types_.end(), tag.second) == entity_types_.end()) {
      field = "labels[" + std::to_string(i) + "]";
      return "unknown entity type '" + tag.second + "'";
    }
  }
  if (!is_valid_bilou(labels)) return "labels are not a valid BILOU sequence";
  return std::nullopt;
}

HttpResult AnnotationService::post_labels(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned())
    return error(400, "body must be an object with a non-negative integer 'id'", {{"field", "id"}});
  if (!j.contains("labels") || !j["labels"].is_array())
    return error(400, "body must contain a 'labels' array", {{"field", "labels"}});
  std::vector<std::string> labels;
  for (const auto& l : j["labels"]) {
    if (!l.is_string()) return error(400, "labels must be strings", {{"field", "labels"}});
    labels.push_back(l.get<std::string>());
  }
  const auto id = j["id"].get<std::size_t>();

  std::lock_guard<std::mutex> lk(state_mu_);
  if (round_running_) return error(409, "a round is running; labels are closed until it finishes");
  auto it = std::find_if(items_.begin(), items_.end(), [&](const AnnotationItem& a) { return a.id == id; });
  if (it == items_.end()) return error(404, "item " + std::to_string(id) + " is not in the current queue", {{"field", "id"}});
  std::string field;
  if (auto problem = validate_labels(*it, labels, field))
    return error(422, *problem, {{"field", field}, {"id", id}, {"expected_length", it->tokens.size()}});
  journal_.append({{"event", "labels"}, {"id", id}, {"labels", labels}});
  it->submitted = true;
  it->submitted_labels = labels;
  publish();
  return {200, {{"id", id}, {"status", "submitted"}}};
}

HttpResult AnnotationService::post_round() {
  if (round_running_.exchange(true)) return error(409, "a round is already running");
  struct Reset {
    std::atomic<bool>& flag;
    ~Reset() { flag = false; }
  } reset{round_running_};

  std::vector<std::vector<std::string>> labels;
  {
    std::lock_guard<std::mutex> lk(state_mu_);
    if (items_.empty()) return error(409, session_.done() ? "budget exhausted; the run is complete" : "no queued batch");
    std::vector<std::size_t> missing;
    for (const auto& it : items_) {
      if (!it.submitted) missing.push_back(it.id);
      labels.push_back(it.submitted_labels);
    }
    if (!missing.empty()) return error(409, "queued items still need labels", {{"pending", missing}});
  }
  try {
    const ActiveRound& r = session_.complete(labels);
    write_round(state_dir_, session_);
    write_history(state_dir_, session_);
    std::lock_guard<std::mutex> lk(state_mu_);
    journal_.append({{"event", "round"}, {"round", r.index}});
    items_.clear();
    if (!session_.done()) queue_next(true);
    publish();
    return {200,
            {{"round", r.index},
             {"labeled", r.labeled},
             {"selected", r.selected},
             {"precision", r.report.micro.precision},
             {"recall", r.report.micro.recall},
             {"f1", r.report.micro.f1},
             {"done", session_.done()},
             {"queue_size", items_.size()}}};
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

HttpResult AnnotationService::handle(const std::string& method, const std::string& path, const std::string& body) {
  const bool get = method == "GET", post = method == "POST";
  if (path == "/api/queue") return get ? get_queue() : error(405, "use GET");
  if (path == "/api/metrics") return get ? get_metrics() : error(405, "use GET");
  if (path == "/api/status") return get ? get_status() : error(405, "use GET");
  if (path == "/api/labels") return post ? post_labels(body) : error(405, "use POST");
  if (path == "/api/round") return post ? post_round() : error(405, "use POST");
  return error(404, "no such endpoint: " + path);
}

}  // namespace dsner

// ---- HTTP ----

namespace dsner {

struct HttpFrontend::Impl {
  explicit Impl(AnnotationService& s) : service(s) {}
  AnnotationService& service;
  httplib::Server server;
};

HttpFrontend::HttpFrontend(AnnotationService& service, std::string static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResult r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  for (const char* p : {"/api/queue", "/api/metrics", "/api/status", "/api/labels", "/api/round"}) {
    srv.Get(p, route);
    srv.Post(p, route);
  }
  if (!static_dir.empty()) {
    if (!fs::is_directory(static_dir)) fail(ErrorKind::io, "static directory not found: " + static_dir);
    srv.set_mount_point("/", static_dir);
  }
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int p = srv.bind_to_any_port(host);
    if (p <= 0) fail(ErrorKind::io, "cannot bind " + host);
    return p;
  }
  if (!srv.bind_to_port(host, port)) fail(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpFrontend::run() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace dsner
