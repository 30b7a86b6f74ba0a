#include "dsner/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace dsner {

std::vector<DomainId> CorpusManifest::domains() const {
  std::vector<DomainId> out;
  for (const auto& e : entries) out.push_back(e.domain);
  return out;
}

std::optional<std::size_t> CorpusManifest::index_of(const DomainId& d) const {
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].domain == d) return i;
  return std::nullopt;
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();

  CorpusManifest m;
  std::set<std::string> seen_domains, seen_paths;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
      fail(ErrorKind::parse, path + ":" + std::to_string(lineno) + ": expected domain<TAB>path");
    std::string domain = line.substr(0, tab);
    fs::path file = line.substr(tab + 1);
    if (file.is_relative()) file = base / file;
    file = file.lexically_normal();
    if (!seen_domains.insert(domain).second) fail(ErrorKind::parse, "duplicate domain: " + domain);
    if (!seen_paths.insert(file.string()).second) fail(ErrorKind::parse, "duplicate corpus path: " + file.string());
    if (!fs::exists(file)) fail(ErrorKind::io, "missing corpus file: " + file.string());
    m.entries.push_back({DomainId(domain), file.string()});
  }
  if (m.entries.empty()) fail(ErrorKind::parse, "empty manifest");
  return m;
}

void save_manifest(const CorpusManifest& manifest, const std::string& path) {
  const fs::path base = fs::path(path).parent_path();
  std::ostringstream out;
  for (const auto& e : manifest.entries) {
    fs::path p = e.path;
    std::error_code ec;
    auto rel = fs::relative(p, base.empty() ? fs::path(".") : base, ec);
    out << e.domain.str() << '\t' << (ec || rel.empty() ? p.string() : rel.string()) << '\n';
  }
  write_file(path, out.str());
}

std::vector<Sentence> read_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open corpus " + path);
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_ws(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

// ---- Vocabulary ----

Vocabulary::Vocabulary(std::vector<Entry> entries, std::uint64_t min_count)
    : entries_(std::move(entries)), min_count_(min_count) {
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].token, static_cast<std::int32_t>(i)).second)
      fail(ErrorKind::invalid_argument, "duplicate vocabulary token: " + entries_[i].token);
  }
}

std::optional<std::int32_t> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocabulary::id(const std::string& token) const {
  auto id = find(token);
  if (!id) fail(ErrorKind::unknown_word, "unknown word: " + token);
  return *id;
}

std::uint64_t Vocabulary::total_count() const {
  std::uint64_t t = 0;
  for (const auto& e : entries_) t += e.count;
  return t;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& e : entries_) {
    h = fnv1a(e.token, h);
    h = fnv1a("\t" + std::to_string(e.count) + "\n", h);
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ostringstream out;
  out << "#min_count\t" << min_count_ << '\n';
  for (const auto& e : entries_) out << e.token << '\t' << e.count << '\n';
  write_file(path, out.str());
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::uint64_t min_count = 1;
  std::vector<Entry> entries;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorKind::parse, path + ":" + std::to_string(lineno) + ": expected token<TAB>count");
    if (line.rfind("#min_count\t", 0) == 0) {
      min_count = std::stoull(line.substr(tab + 1));
      continue;
    }
    entries.push_back({line.substr(0, tab), std::stoull(line.substr(tab + 1))});
  }
  return Vocabulary(std::move(entries), min_count);
}

namespace {

Vocabulary vocab_from_counts(const std::unordered_map<std::string, std::uint64_t>& counts, std::uint64_t min_count) {
  if (min_count == 0) fail(ErrorKind::invalid_argument, "min_count must be positive");
  std::vector<Vocabulary::Entry> entries;
  for (const auto& [tok, c] : counts)
    if (c >= min_count) entries.push_back({tok, c});
  if (entries.empty()) fail(ErrorKind::invalid_argument, "empty vocabulary (min_count " + std::to_string(min_count) + ")");
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.token < b.token;
  });
  return Vocabulary(std::move(entries), min_count);
}

}  // namespace

Vocabulary build_vocab(const CorpusManifest& manifest, std::uint64_t min_count) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& e : manifest.entries)
    for (const auto& s : read_sentences(e.path))
      for (const auto& t : s) ++counts[t];
  return vocab_from_counts(counts, min_count);
}

Vocabulary build_vocab(const std::vector<std::vector<Sentence>>& corpora, std::uint64_t min_count) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& c : corpora)
    for (const auto& s : c)
      for (const auto& t : s) ++counts[t];
  return vocab_from_counts(counts, min_count);
}

std::uint64_t DomainCorpus::token_count() const {
  std::uint64_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<DomainCorpus> encode_corpus(const CorpusManifest& manifest, const Vocabulary& vocab) {
  std::vector<DomainCorpus> out;
  for (const auto& e : manifest.entries) {
    DomainCorpus dc;
    dc.domain = e.domain;
    for (const auto& s : read_sentences(e.path)) {
      std::vector<std::int32_t> ids;
      ids.reserve(s.size());
      for (const auto& t : s)
        if (auto id = vocab.find(t)) ids.push_back(*id);
      if (!ids.empty()) dc.sentences.push_back(std::move(ids));
    }
    out.push_back(std::move(dc));
  }
  return out;
}

// ---- BILOU ----

std::pair<char, std::string> split_tag(const std::string& tag) {
  if (tag == "O") return {'O', ""};
  if (tag.size() < 3 || tag[1] != '-') fail(ErrorKind::parse, "malformed tag: " + tag);
  const char p = tag[0];
  if (p != 'B' && p != 'I' && p != 'L' && p != 'U') fail(ErrorKind::parse, "malformed tag: " + tag);
  return {p, tag.substr(2)};
}

std::vector<EntitySpan> bilou_decode(const std::vector<std::string>& labels) {
  std::vector<EntitySpan> spans;
  std::optional<EntitySpan> open;
  auto close = [&](std::size_t end) {
    if (open) {
      open->end = end;
      spans.push_back(*open);
      open.reset();
    }
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [prefix, type] = split_tag(labels[i]);
    switch (prefix) {
      case 'O':
        close(i);
        break;
      case 'B':
        close(i);
        open = EntitySpan{i, 0, type};
        break;
      case 'I':
        if (!open || open->type != type) {
          close(i);
          open = EntitySpan{i, 0, type};
        }
        break;
      case 'L':
        if (!open || open->type != type) {
          close(i);
          spans.push_back({i, i + 1, type});
        } else {
          close(i + 1);
        }
        break;
      case 'U':
        close(i);
        spans.push_back({i, i + 1, type});
        break;
    }
  }
  close(labels.size());
  return spans;
}

std::vector<EntitySpan> iob2_decode(const std::vector<std::string>& labels) {
  std::vector<EntitySpan> spans;
  std::optional<EntitySpan> open;
  auto close = [&](std::size_t end) {
    if (open) {
      open->end = end;
      spans.push_back(*open);
      open.reset();
    }
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [prefix, type] = split_tag(labels[i]);
    if (prefix == 'O') {
      close(i);
    } else if (prefix == 'B') {
      close(i);
      open = EntitySpan{i, 0, type};
    } else if (prefix == 'I') {
      if (!open || open->type != type) {
        close(i);
        open = EntitySpan{i, 0, type};
      }
    } else {
      fail(ErrorKind::parse, "tag not valid in IOB2: " + labels[i]);
    }
  }
  close(labels.size());
  return spans;
}

std::vector<std::string> bilou_encode(const std::vector<EntitySpan>& spans, std::size_t length) {
  std::vector<std::string> out(length, "O");
  std::vector<bool> used(length, false);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > length) fail(ErrorKind::invalid_argument, "entity span out of range");
    if (s.type.empty()) fail(ErrorKind::invalid_argument, "entity span without type");
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (used[i]) fail(ErrorKind::invalid_argument, "overlapping entity spans");
      used[i] = true;
    }
    if (s.end - s.start == 1) {
      out[s.start] = "U-" + s.type;
      continue;
    }
    out[s.start] = "B-" + s.type;
    for (std::size_t i = s.start + 1; i + 1 < s.end; ++i) out[i] = "I-" + s.type;
    out[s.end - 1] = "L-" + s.type;
  }
  return out;
}

std::vector<std::string> repair_bilou(const std::vector<std::string>& labels) {
  return bilou_encode(bilou_decode(labels), labels.size());
}

bool is_valid_bilou(const std::vector<std::string>& labels) {
  std::string open;
  bool inside = false;
  for (const auto& l : labels) {
    char p;
    std::string type;
    try {
      std::tie(p, type) = split_tag(l);
    } catch (const Error&) {
      return false;
    }
    if (inside) {
      if ((p != 'I' && p != 'L') || type != open) return false;
      if (p == 'L') inside = false;
    } else {
      if (p == 'I' || p == 'L') return false;
      if (p == 'B') {
        inside = true;
        open = type;
      }
    }
  }
  return !inside;
}

namespace {

bool is_valid_iob2(const std::vector<std::string>& labels) {
  std::string open;
  for (const auto& l : labels) {
    auto [p, t] = split_tag(l);
    if (p == 'I' && open != t) return false;
    open = p == 'O' ? std::string() : t;
  }
  return true;
}

}  // namespace

LabeledData parse_labeled(const std::string& text, const DomainId& domain, TagScheme scheme) {
  LabeledData data;
  LabeledSentence cur;
  cur.domain = domain;
  auto flush = [&] {
    if (cur.tokens.empty()) return;
    auto fixed = scheme == TagScheme::iob2 ? bilou_encode(iob2_decode(cur.labels), cur.labels.size())
                                           : repair_bilou(cur.labels);
    if (scheme == TagScheme::bilou ? fixed != cur.labels : !is_valid_iob2(cur.labels)) ++data.repaired_sentences;
    cur.labels = std::move(fixed);
    data.sentences.push_back(std::move(cur));
    cur = LabeledSentence{};
    cur.domain = domain;
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_ws(line).empty()) {
      flush();
      continue;
    }
    auto cols = split_ws(line);
    if (cols.size() != 2) fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": expected token<TAB>tag, got " + std::to_string(cols.size()) + " columns");
    try {
      auto [p, t] = split_tag(cols[1]);
      if (scheme == TagScheme::iob2 && (p == 'L' || p == 'U')) fail(ErrorKind::parse, "tag not valid in IOB2: " + cols[1]);
    } catch (const Error& e) {
      fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
    cur.tokens.push_back(cols[0]);
    cur.labels.push_back(cols[1]);
  }
  flush();
  return data;
}

LabeledData read_labeled(const std::string& path, const DomainId& domain, TagScheme scheme) {
  try {
    return parse_labeled(read_file(path), domain, scheme);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) fail(ErrorKind::parse, path + ": " + e.what());
    throw;
  }
}

void write_labeled(const std::string& path, const std::vector<LabeledSentence>& sentences) {
  std::ostringstream out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) out << s.tokens[i] << '\t' << s.labels[i] << '\n';
    out << '\n';
  }
  write_file(path, out.str());
}

}  // namespace dsner
