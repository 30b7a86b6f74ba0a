#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsner/common.hpp"
#include "dsner/corpus.hpp"
#include "dsner/features.hpp"
#include "json.hpp"

namespace dsner {

// O followed by B/I/L/U for each entity type (sorted).
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> entity_types);
  // An explicit inventory of O/B/I/L/U tags, e.g. a reduced set for small models.
  static LabelSet from_labels(std::vector<std::string> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t id) const { return labels_.at(id); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& entity_types() const noexcept { return types_; }
  std::optional<std::size_t> find(const std::string& label) const;
  std::size_t id(const std::string& label) const;
  // BILOU grammar: may label `to` follow label `from`?
  bool allowed(std::size_t from, std::size_t to) const;
  bool allowed_start(std::size_t id) const;
  bool allowed_end(std::size_t id) const;

  bool operator==(const LabelSet& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> types_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// A sentence mapped onto the model's feature ids; unseen features are dropped.
struct CrfInput {
  std::vector<std::vector<std::pair<std::int32_t, double>>> tokens;
  std::size_t length() const noexcept { return tokens.size(); }
};

class CrfModel {
 public:
  LabelSet labels;
  FeatureTemplateSet templates;
  std::vector<std::string> feature_keys;
  std::vector<double> state_weights;  // [feature * L + label]
  std::vector<double> transitions;    // [from * L + to]
  double l2 = 1.0;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t num_labels() const noexcept { return labels.size(); }
  std::size_t num_features() const noexcept { return feature_keys.size(); }
  std::optional<std::int32_t> feature_id(const std::string& key) const;
  void rebuild_index();

  double& state(std::int32_t f, std::size_t y) { return state_weights[static_cast<std::size_t>(f) * labels.size() + y]; }
  double& trans(std::size_t from, std::size_t to) { return transitions[from * labels.size() + to]; }
  double trans(std::size_t from, std::size_t to) const { return transitions[from * labels.size() + to]; }

  void save(const std::string& path) const;
  static CrfModel load(const std::string& path);
  std::string serialize() const;
  static CrfModel deserialize(const std::string& bytes, const std::string& origin = "<memory>");

 private:
  std::unordered_map<std::string, std::int32_t> index_;
};

CrfInput compile(const CrfModel& model, const std::vector<std::vector<Feature>>& features);
CrfInput compile(const CrfModel& model, const std::vector<std::string>& tokens, const DomainId& domain,
                 const EmbeddingProvider* provider);

// T x L state scores.
Matrix<double> state_scores(const CrfModel& model, const CrfInput& input);
double path_score(const CrfModel& model, const CrfInput& input, const std::vector<std::size_t>& labels);

// Forward algorithm in log space.
double log_partition(const CrfModel& model, const CrfInput& input);

struct Marginals {
  double log_z = 0;
  Matrix<double> unary;  // T x L
  Matrix<double> pair;   // L x L, summed over positions
};
Marginals forward_backward(const CrfModel& model, const CrfInput& input);

struct Prediction {
  std::vector<std::size_t> label_ids;
  std::vector<std::string> labels;
  double log_score = 0;
  double confidence = 0;  // Pr(best path | x)
};

// Exact argmax path; ties go to the lowest label id. With `constrain`,
// transitions that break the BILOU grammar are masked out.
Prediction viterbi(const CrfModel& model, const CrfInput& input, bool constrain = false);

// Pr(y* | x), or its per-token geometric mean when length_normalized. Computed
// with a forward pass in linear space, scaled by powers of two, so a model with
// all-zero weights gives exactly 1 / L^T.
double sequence_confidence(const CrfModel& model, const CrfInput& input, bool length_normalized = false);

struct CrfTrainOptions {
  double l2 = 1.0;
  std::size_t max_iter = 200;
  double tol = 1e-5;
  std::size_t threads = 1;
  std::optional<std::vector<std::string>> entity_types;  // default: types found in the data
  const CrfModel* warm_start = nullptr;  // weights copied by (feature key, label) where both exist
  std::function<void(std::size_t, double)> on_iter;
};

struct CrfTrainStats {
  std::size_t iterations = 0;
  double objective = 0;
  double initial_objective = 0;
  std::string stop_reason;
  std::vector<double> history;
};

// Maximizes sum log p(y|x) - l2 ||w||^2 with L-BFGS. Deterministic for a fixed data order.
CrfModel train_crf(const std::vector<LabeledSentence>& data, const FeatureTemplateSet& templates,
                   const EmbeddingProvider* provider, const CrfTrainOptions& options, CrfTrainStats* stats = nullptr);

// Negated regularized objective and its gradient for fixed compiled data (exposed for gradient checks).
struct CompiledExample {
  CrfInput input;
  std::vector<std::size_t> gold;
};
double crf_objective(const CrfModel& model, const std::vector<CompiledExample>& data, std::vector<double>& grad,
                     std::size_t threads = 1);
std::vector<double> pack_weights(const CrfModel& model);
void unpack_weights(CrfModel& model, const std::vector<double>& w);

struct TypeScores {
  std::uint64_t gold = 0, predicted = 0, correct = 0;
  double precision = 0, recall = 0, f1 = 0;
};

struct EvalReport {
  std::map<std::string, TypeScores> per_type;
  TypeScores micro;
  nlohmann::json to_json() const;
};

// Entity-level exact match (span and type), micro-averaged. Precision is 0
// when nothing is predicted; F1 is 0 when P + R = 0.
EvalReport score_entities(const std::vector<std::vector<std::string>>& gold, const std::vector<std::vector<std::string>>& predicted);

struct TagOptions {
  bool constrain = false;
};

std::vector<Prediction> tag(const CrfModel& model, const std::vector<std::vector<std::string>>& sentences,
                            const DomainId& domain, const EmbeddingProvider* provider, const TagOptions& options = {});
EvalReport evaluate(const CrfModel& model, const std::vector<LabeledSentence>& test, const EmbeddingProvider* provider,
                    const TagOptions& options = {});

std::uint64_t hash_sentences(const std::vector<LabeledSentence>& data);

}  // namespace dsner
