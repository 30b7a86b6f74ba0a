#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsner/corpus.hpp"
#include "dsner/domaindist.hpp"
#include "dsner/domainsense.hpp"
#include "json.hpp"

namespace dsner {

enum class EmbeddingSource { none, domaindist, domainsense, file };
EmbeddingSource parse_embedding_source(const std::string& s);
std::string to_string(EmbeddingSource s);

// Feature families for the NER tagger.
struct FeatureTemplateSet {
  bool unigrams = true;     // w[i] for i in -2..2
  bool bigrams = true;      // w[i]|w[i+1] for i in {-1, 0}
  bool embeddings = false;  // e[i]_j for i in -2..2
  bool shape = true;        // shape, collapsed shape, capitalization
  bool affixes = true;      // prefixes and suffixes up to length 4
  bool numpunct = true;     // number and punctuation indicators
  bool bias = true;
  EmbeddingSource provider = EmbeddingSource::none;

  void validate() const;
  nlohmann::json to_json() const;
  static FeatureTemplateSet from_json(const nlohmann::json& j);
  bool operator==(const FeatureTemplateSet&) const = default;
};

// Supplies one vector per token (nullopt for out-of-vocabulary tokens).
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingSource source() const = 0;
  virtual std::vector<std::optional<std::vector<float>>> embed(const std::vector<std::string>& tokens,
                                                               const DomainId& domain) const = 0;
};

// phi_domain(w) when the sentence's domain was trained, delta_main(w) otherwise.
// Lookup tries the token, then its lowercase form.
class DomainDistProvider : public EmbeddingProvider {
 public:
  explicit DomainDistProvider(std::shared_ptr<const DomainEmbeddingSet> set) : set_(std::move(set)) {}
  std::size_t dim() const override { return set_->dim(); }
  EmbeddingSource source() const override { return EmbeddingSource::domaindist; }
  std::vector<std::optional<std::vector<float>>> embed(const std::vector<std::string>& tokens,
                                                       const DomainId& domain) const override;

 private:
  std::shared_ptr<const DomainEmbeddingSet> set_;
};

// Posterior-weighted sense vector given the surrounding tokens (argmax sense if requested).
class DomainSenseProvider : public EmbeddingProvider {
 public:
  DomainSenseProvider(std::shared_ptr<const SenseModel> model, bool use_argmax = false)
      : model_(std::move(model)), argmax_(use_argmax) {}
  std::size_t dim() const override { return model_->dim(); }
  EmbeddingSource source() const override { return EmbeddingSource::domainsense; }
  std::vector<std::optional<std::vector<float>>> embed(const std::vector<std::string>& tokens,
                                                       const DomainId& domain) const override;

 private:
  std::shared_ptr<const SenseModel> model_;
  bool argmax_;
};

// Static vectors from a word2vec text file.
class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::string& path);
  std::size_t dim() const override { return vectors_.cols(); }
  EmbeddingSource source() const override { return EmbeddingSource::file; }
  std::vector<std::optional<std::vector<float>>> embed(const std::vector<std::string>& tokens,
                                                       const DomainId& domain) const override;

 private:
  std::unordered_map<std::string, std::size_t> index_;
  Matrix<float> vectors_;
};

struct Feature {
  std::string key;
  double value = 1.0;
};

std::string word_shape(const std::string& token);       // "U.S." -> "X.X."
std::string collapsed_shape(const std::string& token);  // distinct shape chars in first-seen order: "X."
std::vector<std::string> utf8_chars(const std::string& token);

// Per-token feature lists with deterministic keys.
std::vector<std::vector<Feature>> extract_features(const std::vector<std::string>& tokens, const DomainId& domain,
                                                   const FeatureTemplateSet& templates,
                                                   const EmbeddingProvider* provider);

}  // namespace dsner
