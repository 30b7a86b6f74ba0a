#include "dsner/features.hpp"

#include <algorithm>
#include <cctype>

#include "dsner/vecfile.hpp"

namespace dsner {

EmbeddingSource parse_embedding_source(const std::string& s) {
  if (s == "none") return EmbeddingSource::none;
  if (s == "domaindist") return EmbeddingSource::domaindist;
  if (s == "domainsense") return EmbeddingSource::domainsense;
  if (s == "file") return EmbeddingSource::file;
  fail(ErrorKind::invalid_argument, "unknown embedding provider: " + s);
}

std::string to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::none: return "none";
    case EmbeddingSource::domaindist: return "domaindist";
    case EmbeddingSource::domainsense: return "domainsense";
    case EmbeddingSource::file: return "file";
  }
  return "none";
}

void FeatureTemplateSet::validate() const {
  if (!(unigrams || bigrams || embeddings || shape || affixes || numpunct))
    fail(ErrorKind::invalid_argument, "no feature family enabled");
  if (embeddings && provider == EmbeddingSource::none)
    fail(ErrorKind::invalid_argument, "embedding features enabled without an embedding provider");
}

nlohmann::json FeatureTemplateSet::to_json() const {
  return {{"unigrams", unigrams}, {"bigrams", bigrams},   {"embeddings", embeddings}, {"shape", shape},
          {"affixes", affixes},   {"numpunct", numpunct}, {"bias", bias},             {"provider", to_string(provider)}};
}

FeatureTemplateSet FeatureTemplateSet::from_json(const nlohmann::json& j) {
  FeatureTemplateSet t;
  t.unigrams = j.at("unigrams");
  t.bigrams = j.at("bigrams");
  t.embeddings = j.at("embeddings");
  t.shape = j.at("shape");
  t.affixes = j.at("affixes");
  t.numpunct = j.at("numpunct");
  t.bias = j.value("bias", true);
  t.provider = parse_embedding_source(j.at("provider"));
  return t;
}

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<std::int32_t> lookup(const Vocabulary& vocab, const std::string& token) {
  if (auto id = vocab.find(token)) return id;
  return vocab.find(lowercase(token));
}

}  // namespace

std::vector<std::optional<std::vector<float>>> DomainDistProvider::embed(const std::vector<std::string>& tokens,
                                                                         const DomainId& domain) const {
  const bool trained = set_->has_domain(domain);
  const std::size_t k = trained ? set_->domain_index(domain) : 0;
  std::vector<std::optional<std::vector<float>>> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto id = lookup(set_->vocab(), t);
    if (!id)
      out.emplace_back(std::nullopt);
    else
      out.emplace_back(trained ? set_->compose(*id, k) : set_->global(*id));
  }
  return out;
}

std::vector<std::optional<std::vector<float>>> DomainSenseProvider::embed(const std::vector<std::string>& tokens,
                                                                          const DomainId&) const {
  std::vector<std::optional<std::int32_t>> ids;
  for (const auto& t : tokens) ids.push_back(lookup(model_->vocab(), t));
  const std::size_t window = model_->hyper().window;
  std::vector<std::optional<std::vector<float>>> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!ids[i]) {
      out.emplace_back(std::nullopt);
      continue;
    }
    std::vector<std::int32_t> ctx;
    const std::size_t lo = i >= window ? i - window : 0;
    for (std::size_t j = lo; j < std::min(tokens.size(), i + window + 1); ++j)
      if (j != i && ids[j]) ctx.push_back(*ids[j]);
    out.emplace_back(expected_sense_vector(*model_, *ids[i], ctx, argmax_));
  }
  return out;
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::string& path) {
  auto tv = read_word2vec_text(path);
  for (std::size_t i = 0; i < tv.words.size(); ++i) index_.emplace(tv.words[i], i);
  vectors_ = std::move(tv.vectors);
}

std::vector<std::optional<std::vector<float>>> FileEmbeddingProvider::embed(const std::vector<std::string>& tokens,
                                                                            const DomainId&) const {
  std::vector<std::optional<std::vector<float>>> out;
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it == index_.end()) it = index_.find(lowercase(t));
    if (it == index_.end()) {
      out.emplace_back(std::nullopt);
      continue;
    }
    auto row = vectors_.row(it->second);
    out.emplace_back(std::vector<float>(row.begin(), row.end()));
  }
  return out;
}

std::vector<std::string> utf8_chars(const std::string& token) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < token.size();) {
    const auto c = static_cast<unsigned char>(token[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    len = std::min(len, token.size() - i);
    out.push_back(token.substr(i, len));
    i += len;
  }
  return out;
}

std::string word_shape(const std::string& token) {
  std::string out;
  for (const auto& ch : utf8_chars(token)) {
    if (ch.size() > 1) {
      out += 'u';  // non-ASCII
      continue;
    }
    const auto c = static_cast<unsigned char>(ch[0]);
    if (std::isupper(c))
      out += 'X';
    else if (std::islower(c))
      out += 'x';
    else if (std::isdigit(c))
      out += 'd';
    else
      out += ch;
  }
  return out;
}

std::string collapsed_shape(const std::string& token) {
  std::string out;
  for (char c : word_shape(token))
    if (out.find(c) == std::string::npos) out += c;
  return out;
}

namespace {

std::string capitalization(const std::string& token) {
  bool any_upper = false, any_lower = false;
  for (unsigned char c : token) {
    any_upper |= std::isupper(c) != 0;
    any_lower |= std::islower(c) != 0;
  }
  if (!any_upper && !any_lower) return "none";
  if (any_upper && !any_lower) return "all";
  if (!any_upper) return "lower";
  if (std::isupper(static_cast<unsigned char>(token[0]))) {
    bool rest_lower = true;
    for (std::size_t i = 1; i < token.size(); ++i) rest_lower &= !std::isupper(static_cast<unsigned char>(token[i]));
    return rest_lower ? "init" : "mixed";
  }
  return "mixed";
}

const std::string kPad = "<PAD>";

}  // namespace

std::vector<std::vector<Feature>> extract_features(const std::vector<std::string>& tokens, const DomainId& domain,
                                                   const FeatureTemplateSet& templates,
                                                   const EmbeddingProvider* provider) {
  if (tokens.empty()) fail(ErrorKind::invalid_argument, "empty sentence");
  templates.validate();
  std::vector<std::optional<std::vector<float>>> emb;
  if (templates.embeddings) {
    if (!provider) fail(ErrorKind::invalid_argument, "embedding provider required but not configured");
    emb = provider->embed(tokens, domain);
  }
  const auto n = static_cast<std::ptrdiff_t>(tokens.size());
  auto tok = [&](std::ptrdiff_t i) -> const std::string& { return i < 0 || i >= n ? kPad : tokens[static_cast<std::size_t>(i)]; };

  std::vector<std::vector<Feature>> out(tokens.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& f = out[static_cast<std::size_t>(i)];
    const auto& w = tokens[static_cast<std::size_t>(i)];
    if (templates.bias) f.push_back({"bias", 1.0});
    if (templates.unigrams)
      for (int o = -2; o <= 2; ++o) f.push_back({"w[" + std::to_string(o) + "]=" + tok(i + o), 1.0});
    if (templates.bigrams) {
      f.push_back({"w[-1]|w[0]=" + tok(i - 1) + " " + w, 1.0});
      f.push_back({"w[0]|w[1]=" + w + " " + tok(i + 1), 1.0});
    }
    if (templates.shape) {
      f.push_back({"shape=" + word_shape(w), 1.0});
      f.push_back({"cshape=" + collapsed_shape(w), 1.0});
      f.push_back({"cap=" + capitalization(w), 1.0});
    }
    if (templates.affixes) {
      const auto chars = utf8_chars(w);
      std::string pre, suf;
      for (std::size_t k = 1; k <= std::min<std::size_t>(4, chars.size()); ++k) {
        pre += chars[k - 1];
        suf = chars[chars.size() - k] + suf;
        f.push_back({"pre" + std::to_string(k) + "=" + pre, 1.0});
        f.push_back({"suf" + std::to_string(k) + "=" + suf, 1.0});
      }
    }
    if (templates.numpunct) {
      const bool has_digit = std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
      const bool all_digit = std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
      const bool all_punct = std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::ispunct(c); });
      if (has_digit) f.push_back({"num=1", 1.0});
      if (all_digit) f.push_back({"num=all", 1.0});
      if (all_punct) f.push_back({"punct=1", 1.0});
    }
    if (templates.embeddings) {
      for (int o = -2; o <= 2; ++o) {
        const auto j = i + o;
        if (j < 0 || j >= n) continue;
        const auto& v = emb[static_cast<std::size_t>(j)];
        const std::string prefix = "e[" + std::to_string(o) + "]_";
        if (!v) {
          f.push_back({"oov[" + std::to_string(o) + "]=1", 1.0});
          continue;
        }
        for (std::size_t k = 0; k < v->size(); ++k) f.push_back({prefix + std::to_string(k), static_cast<double>((*v)[k])});
      }
    }
  }
  return out;
}

}  // namespace dsner
