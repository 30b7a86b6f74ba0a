#include "dsner/domaindist.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "dsner/rng.hpp"
#include "dsner/vecfile.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace dsner {

DomainEmbeddingSet DomainEmbeddingSet::init(Vocabulary vocab, std::vector<DomainId> domains, const DomainDistHyper& hyper) {
  if (domains.empty()) fail(ErrorKind::invalid_argument, "empty domain list");
  if (hyper.dim < 1) fail(ErrorKind::invalid_argument, "dimension must be >= 1");
  for (std::size_t i = 0; i < domains.size(); ++i)
    for (std::size_t j = i + 1; j < domains.size(); ++j)
      if (domains[i] == domains[j]) fail(ErrorKind::invalid_argument, "duplicate domain: " + domains[i].str());

  DomainEmbeddingSet set;
  set.tree_ = build_huffman(vocab);
  set.vocab_ = std::move(vocab);
  set.domains_ = std::move(domains);
  set.hyper_ = hyper;
  const std::size_t n = set.vocab_.size(), d = hyper.dim;
  set.main_ = Matrix<float>(n, d);
  Rng rng(hyper.seed);
  const double r = 0.5 / static_cast<double>(d);
  for (auto& v : set.main_.data()) v = static_cast<float>(rng.uniform(-r, r));
  set.deltas_.assign(set.domains_.size(), Matrix<float>(n, d));
  set.nodes_ = Matrix<float>(n - 1, d);
  return set;
}

std::size_t DomainEmbeddingSet::domain_index(const DomainId& d) const {
  for (std::size_t i = 0; i < domains_.size(); ++i)
    if (domains_[i] == d) return i;
  fail(ErrorKind::unknown_domain, "unknown domain: " + d.str());
}

bool DomainEmbeddingSet::has_domain(const DomainId& d) const {
  return std::find(domains_.begin(), domains_.end(), d) != domains_.end();
}

std::vector<float> DomainEmbeddingSet::compose(std::int32_t w, std::size_t k) const {
  if (w < 0 || static_cast<std::size_t>(w) >= vocab_.size()) fail(ErrorKind::unknown_word, "word id out of range");
  if (k >= deltas_.size()) fail(ErrorKind::unknown_domain, "domain index out of range");
  auto m = main_.row(static_cast<std::size_t>(w));
  auto dk = deltas_[k].row(static_cast<std::size_t>(w));
  std::vector<float> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] + dk[i];
  return out;
}

std::vector<float> DomainEmbeddingSet::compose(const std::string& word, const DomainId& domain) const {
  const auto w = vocab_.id(word);
  return compose(w, domain_index(domain));
}

std::vector<float> DomainEmbeddingSet::global(std::int32_t w) const {
  auto m = main_.row(static_cast<std::size_t>(w));
  return {m.begin(), m.end()};
}

Matrix<float> DomainEmbeddingSet::composed_matrix(std::size_t k) const {
  Matrix<float> out(vocab_.size(), hyper_.dim);
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    auto c = compose(static_cast<std::int32_t>(w), k);
    std::copy(c.begin(), c.end(), out.row(w).begin());
  }
  return out;
}

double domaindist_pair_step(DomainEmbeddingSet& set, std::int32_t center, std::int32_t context, std::size_t k,
                            double lr, std::vector<float>* applied) {
  const auto input = set.compose(center, k);
  std::vector<double> step(input.size(), 0.0);
  const double loss =
      hs_sgd_step(set.tree(), set.node_vectors(), context, std::span<const float>(input), lr, std::span<double>(step));
  auto m = set.delta_main().row(static_cast<std::size_t>(center));
  auto dk = set.delta(k).row(static_cast<std::size_t>(center));
  if (applied) applied->resize(step.size());
  for (std::size_t i = 0; i < step.size(); ++i) {
    const float inc = static_cast<float>(step[i]);
    m[i] += inc;
    dk[i] += inc;
    if (applied) (*applied)[i] = inc;
  }
  return loss;
}

DomainDistReport train_domaindist(DomainEmbeddingSet& set, const std::vector<DomainCorpus>& corpora,
                                  const DomainDistTrainOptions& options) {
  std::vector<std::size_t> domain_of(corpora.size());
  std::uint64_t tokens_per_epoch = 0;
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    if (!set.has_domain(corpora[c].domain))
      fail(ErrorKind::unknown_domain, "corpus domain not in embedding set: " + corpora[c].domain.str());
    domain_of[c] = set.domain_index(corpora[c].domain);
    tokens_per_epoch += corpora[c].token_count();
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> order;
  for (std::size_t c = 0; c < corpora.size(); ++c)
    for (std::size_t s = 0; s < corpora[c].sentences.size(); ++s)
      order.emplace_back(static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(s));

  const auto& vocab = set.vocab();
  const double total_words = static_cast<double>(vocab.total_count());
  std::vector<double> keep_prob(vocab.size(), 1.0);
  if (options.subsample > 0) {
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      const double f = static_cast<double>(vocab.count(static_cast<std::int32_t>(w))) / total_words;
      keep_prob[w] = std::min(1.0, (std::sqrt(f / options.subsample) + 1) * options.subsample / f);
    }
  }

  const std::size_t window = std::max<std::size_t>(1, set.hyper().window);
  const double alpha0 = set.hyper().alpha0;
  const double planned = static_cast<double>(tokens_per_epoch) * static_cast<double>(options.epochs);
  Rng rng(options.seed);
  DomainDistReport report;
  std::uint64_t processed = 0;
  std::vector<std::int32_t> kept;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    std::uint64_t pairs = 0;
    for (auto [c, s] : order) {
      const auto& sent = corpora[c].sentences[s];
      const std::size_t k = domain_of[c];
      kept.clear();
      for (auto w : sent)
        if (keep_prob[static_cast<std::size_t>(w)] >= 1.0 || rng.uniform() < keep_prob[static_cast<std::size_t>(w)])
          kept.push_back(w);
      const double lr = alpha0 * std::max(1.0 - static_cast<double>(processed) / std::max(planned, 1.0), 1e-4);
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::size_t b = 1 + static_cast<std::size_t>(rng.below(window));
        const std::size_t lo = i >= b ? i - b : 0;
        const std::size_t hi = std::min(kept.size() - 1, i + b);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          loss_sum += domaindist_pair_step(set, kept[i], kept[j], k, lr);
          ++pairs;
        }
      }
      processed += sent.size();
    }
    const double mean = pairs ? loss_sum / static_cast<double>(pairs) : 0.0;
    report.epoch_loss.push_back(mean);
    ++report.epochs_run;
    if (options.on_epoch) options.on_epoch(epoch + 1, mean);
  }
  report.tokens_processed = processed;
  return report;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  const double ab = dot(a, b), aa = dot(a, a), bb = dot(b, b);
  if (aa == 0 || bb == 0) fail(ErrorKind::degenerate, "degenerate vector");
  return ab / std::sqrt(aa * bb);
}

double domain_distance(const DomainEmbeddingSet& set, const std::string& word, const DomainId& k1, const DomainId& k2) {
  const auto a = set.compose(word, k1);
  const auto b = set.compose(word, k2);
  if (k1 == k2) {
    cosine(a, a);  // still rejects zero vectors
    return 0.0;
  }
  return std::clamp(1.0 - cosine(a, b), 0.0, 2.0);
}

namespace {

std::vector<Neighbor> rank_neighbors(const DomainEmbeddingSet& set, std::span<const float> query, std::size_t n,
                                     const NeighborOptions& options, std::optional<WordAtDomain> exclude) {
  if (n < 1) fail(ErrorKind::invalid_argument, "n must be >= 1");
  const double qq = dot(query, query);
  if (qq == 0) fail(ErrorKind::degenerate, "degenerate vector");
  std::vector<std::size_t> domains;
  if (options.domains) {
    domains = *options.domains;
  } else {
    for (std::size_t k = 0; k < set.domains().size(); ++k) domains.push_back(k);
  }
  std::vector<std::int32_t> words;
  if (options.candidate_words) {
    words = *options.candidate_words;
  } else {
    for (std::size_t w = 0; w < set.vocab().size(); ++w) words.push_back(static_cast<std::int32_t>(w));
  }
  std::vector<Neighbor> out;
  for (auto k : domains) {
    for (auto w : words) {
      WordAtDomain item{w, k};
      if (exclude && item == *exclude) continue;
      const auto v = set.compose(w, k);
      const double vv = dot(std::span<const float>(v), std::span<const float>(v));
      if (vv == 0) continue;
      out.push_back({item, dot(query, std::span<const float>(v)) / std::sqrt(qq * vv)});
    }
  }
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.item < b.item;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace

std::vector<Neighbor> neighbors(const DomainEmbeddingSet& set, const WordAtDomain& query, std::size_t n,
                                const NeighborOptions& options) {
  const auto q = set.compose(query.word, query.domain);
  return rank_neighbors(set, q, n, options, query);
}

std::vector<Neighbor> neighbors(const DomainEmbeddingSet& set, std::span<const float> query, std::size_t n,
                                const NeighborOptions& options) {
  if (query.size() != set.dim()) fail(ErrorKind::invalid_argument, "query dimension mismatch");
  return rank_neighbors(set, query, n, options, std::nullopt);
}

// ---- persistence ----

namespace {

constexpr int kFormatVersion = 1;

json hyper_json(const DomainDistHyper& h) {
  return {{"dim", h.dim},       {"window", h.window}, {"alpha0", h.alpha0},      {"epochs", h.epochs},
          {"min_count", h.min_count}, {"seed", h.seed},     {"subsample", h.subsample}};
}

DomainDistHyper hyper_from_json(const json& j) {
  DomainDistHyper h;
  h.dim = j.at("dim");
  h.window = j.at("window");
  h.alpha0 = j.at("alpha0");
  h.epochs = j.at("epochs");
  h.min_count = j.at("min_count");
  h.seed = j.at("seed");
  h.subsample = j.value("subsample", 0.0);
  return h;
}

std::vector<std::string> vocab_words(const Vocabulary& v) {
  std::vector<std::string> out;
  for (const auto& e : v.entries()) out.push_back(e.token);
  return out;
}

Matrix<float> read_rows(const std::string& path, const Vocabulary& vocab, std::size_t dim) {
  auto tv = read_word2vec_text(path);
  if (tv.vectors.rows() != vocab.size() || tv.vectors.cols() != dim)
    fail(ErrorKind::parse, path + ": shape does not match vocabulary");
  for (std::size_t i = 0; i < tv.words.size(); ++i)
    if (tv.words[i] != vocab.token(static_cast<std::int32_t>(i))) fail(ErrorKind::parse, path + ": row order differs from vocab.txt");
  return std::move(tv.vectors);
}

}  // namespace

void DomainEmbeddingSet::export_dir(const std::string& dir) const {
  fs::create_directories(fs::path(dir) / "deltas");
  fs::create_directories(fs::path(dir) / "composed");
  json meta = {{"format", "domaindist"},
               {"format_version", kFormatVersion},
               {"dimension", hyper_.dim},
               {"hyper", hyper_json(hyper_)},
               {"vocab_size", vocab_.size()},
               {"vocab_hash", vocab_.hash()}};
  meta["domains"] = json::array();
  for (const auto& d : domains_) meta["domains"].push_back(d.str());
  write_file((fs::path(dir) / "meta.json").string(), meta.dump(2) + "\n");
  vocab_.save((fs::path(dir) / "vocab.txt").string());
  const auto words = vocab_words(vocab_);
  write_word2vec_text((fs::path(dir) / "deltas" / "main.vec").string(), words, main_);
  for (std::size_t k = 0; k < domains_.size(); ++k) {
    write_word2vec_text((fs::path(dir) / "deltas" / (domains_[k].str() + ".vec")).string(), words, deltas_[k]);
    write_word2vec_text((fs::path(dir) / "composed" / (domains_[k].str() + ".vec")).string(), words, composed_matrix(k));
  }
  write_hsm((fs::path(dir) / "hsm.bin").string(), tree_, nodes_);
}

DomainEmbeddingSet DomainEmbeddingSet::import_dir(const std::string& dir) {
  const json meta = json::parse(read_file((fs::path(dir) / "meta.json").string()));
  if (meta.value("format", "") != "domaindist" || meta.value("format_version", 0) != kFormatVersion)
    fail(ErrorKind::parse, dir + ": not a domaindist export (or unsupported version)");
  DomainEmbeddingSet set;
  set.hyper_ = hyper_from_json(meta.at("hyper"));
  set.vocab_ = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  if (set.vocab_.hash() != meta.at("vocab_hash").get<std::uint64_t>()) fail(ErrorKind::parse, dir + ": vocabulary hash mismatch");
  for (const auto& d : meta.at("domains")) set.domains_.emplace_back(d.get<std::string>());
  set.main_ = read_rows((fs::path(dir) / "deltas" / "main.vec").string(), set.vocab_, set.hyper_.dim);
  for (const auto& d : set.domains_)
    set.deltas_.push_back(read_rows((fs::path(dir) / "deltas" / (d.str() + ".vec")).string(), set.vocab_, set.hyper_.dim));
  auto [tree, nodes] = read_hsm((fs::path(dir) / "hsm.bin").string());
  if (tree.vocab_size() != set.vocab_.size() || nodes.cols() != set.hyper_.dim) fail(ErrorKind::parse, dir + ": hsm.bin shape mismatch");
  set.tree_ = std::move(tree);
  set.nodes_ = std::move(nodes);
  return set;
}

}  // namespace dsner
