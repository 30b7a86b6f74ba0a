#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsner/common.hpp"

namespace dsner {

struct DomainId {
  std::string name;

  DomainId() = default;
  explicit DomainId(std::string n) : name(std::move(n)) {}
  const std::string& str() const noexcept { return name; }
  auto operator<=>(const DomainId&) const = default;
};

struct ManifestEntry {
  DomainId domain;
  std::string path;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  std::vector<DomainId> domains() const;
  std::optional<std::size_t> index_of(const DomainId& d) const;
};

// Lines are `domain<TAB>path`; `#` lines and blank lines are skipped.
// Relative paths resolve against the manifest's directory.
CorpusManifest load_manifest(const std::string& path);
void save_manifest(const CorpusManifest& manifest, const std::string& path);

using Sentence = std::vector<std::string>;

// One whitespace-tokenized sentence per line; empty lines are dropped.
std::vector<Sentence> read_sentences(const std::string& path);

class Vocabulary {
 public:
  struct Entry {
    std::string token;
    std::uint64_t count = 0;
  };

  Vocabulary() = default;
  Vocabulary(std::vector<Entry> entries, std::uint64_t min_count);

  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t min_count() const noexcept { return min_count_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::string& token(std::int32_t id) const { return entries_.at(static_cast<std::size_t>(id)).token; }
  std::uint64_t count(std::int32_t id) const { return entries_.at(static_cast<std::size_t>(id)).count; }
  std::optional<std::int32_t> find(const std::string& token) const;
  std::int32_t id(const std::string& token) const;  // throws unknown_word
  std::uint64_t total_count() const;
  std::uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    if (a.min_count_ != b.min_count_ || a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i)
      if (a.entries_[i].token != b.entries_[i].token || a.entries_[i].count != b.entries_[i].count) return false;
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::uint64_t min_count_ = 1;
};

// Descending count, lexicographic tie-break.
Vocabulary build_vocab(const CorpusManifest& manifest, std::uint64_t min_count);
Vocabulary build_vocab(const std::vector<std::vector<Sentence>>& corpora, std::uint64_t min_count);

// Corpus text mapped to vocabulary ids, out-of-vocabulary tokens dropped.
struct DomainCorpus {
  DomainId domain;
  std::vector<std::vector<std::int32_t>> sentences;
  std::uint64_t token_count() const;
};

std::vector<DomainCorpus> encode_corpus(const CorpusManifest& manifest, const Vocabulary& vocab);

// ---- labeled data and BILOU ----

enum class TagScheme { iob2, bilou };

struct EntitySpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string type;
  auto operator<=>(const EntitySpan&) const = default;
};

struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  DomainId domain;
};

struct LabeledData {
  std::vector<LabeledSentence> sentences;
  std::size_t repaired_sentences = 0;
};

LabeledData read_labeled(const std::string& path, const DomainId& domain, TagScheme scheme);
LabeledData parse_labeled(const std::string& text, const DomainId& domain, TagScheme scheme);
void write_labeled(const std::string& path, const std::vector<LabeledSentence>& sentences);

// Decodes any tag list, repairing invalid transitions:
// an I/L with no open entity of the same type starts a new entity, and an
// entity is closed by O, B, U, a type change, or the end of the sentence.
std::vector<EntitySpan> bilou_decode(const std::vector<std::string>& labels);
std::vector<std::string> bilou_encode(const std::vector<EntitySpan>& spans, std::size_t length);
std::vector<EntitySpan> iob2_decode(const std::vector<std::string>& labels);

bool is_valid_bilou(const std::vector<std::string>& labels);
std::vector<std::string> repair_bilou(const std::vector<std::string>& labels);

// Splits "B-PER" into ('B', "PER"); "O" gives ('O', ""). Throws on malformed tags.
std::pair<char, std::string> split_tag(const std::string& tag);

}  // namespace dsner
