#include "dsner/domainsense.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "dsner/domaindist.hpp"
#include "dsner/rng.hpp"
#include "dsner/vecfile.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace dsner {

namespace {
// Responsibilities below this are too small to move a vector; skip the M-step work.
constexpr double kMinResponsibility = 1e-4;
}  // namespace

SenseModel SenseModel::init(Vocabulary vocab, const SenseHyper& hyper) {
  if (hyper.senses < 1) fail(ErrorKind::invalid_argument, "number of senses must be >= 1");
  if (hyper.dim < 1) fail(ErrorKind::invalid_argument, "dimension must be >= 1");
  if (hyper.alpha_dp <= 0) fail(ErrorKind::invalid_argument, "alpha_dp must be positive");
  SenseModel m;
  m.tree_ = build_huffman(vocab);
  m.vocab_ = std::move(vocab);
  m.hyper_ = hyper;
  const std::size_t n = m.vocab_.size();
  m.vectors_ = Matrix<float>(n * hyper.senses, hyper.dim);
  Rng rng(hyper.seed);
  const double r = 0.5 / static_cast<double>(hyper.dim);
  for (auto& v : m.vectors_.data()) v = static_cast<float>(rng.uniform(-r, r));
  m.nodes_ = Matrix<float>(n - 1, hyper.dim);
  m.counts_ = Matrix<double>(n, hyper.senses);
  m.active_.assign(n * hyper.senses, 1);
  return m;
}

std::size_t SenseModel::active_count(std::int32_t w) const {
  std::size_t c = 0;
  for (std::size_t s = 0; s < hyper_.senses; ++s) c += active(w, s) ? 1 : 0;
  return c;
}

std::vector<double> SenseModel::prior(std::int32_t w) const {
  const std::size_t S = hyper_.senses;
  std::vector<double> pi(S, 0.0);
  double tail = 0;
  for (std::size_t s = 0; s < S; ++s) tail += counts_(static_cast<std::size_t>(w), s);
  double remaining = 1.0;
  for (std::size_t s = 0; s + 1 < S; ++s) {
    const double n_s = counts_(static_cast<std::size_t>(w), s);
    tail = std::max(tail - n_s, 0.0);
    const double beta = (1.0 + n_s) / (1.0 + hyper_.alpha_dp + n_s + tail);
    pi[s] = beta * remaining;
    remaining -= pi[s];
  }
  pi[S - 1] = remaining;
  return pi;
}

std::size_t SenseModel::prune() {
  std::size_t pruned = 0;
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    const auto id = static_cast<std::int32_t>(w);
    const auto pi = prior(id);
    // keep the strongest sense no matter what
    const std::size_t best = static_cast<std::size_t>(std::max_element(pi.begin(), pi.end()) - pi.begin());
    for (std::size_t s = 0; s < hyper_.senses; ++s) {
      if (s != best && active(id, s) && pi[s] < hyper_.prune_threshold) {
        deactivate(id, s);
        ++pruned;
      }
    }
  }
  return pruned;
}

namespace {

// log Pr(context | sense) for every slot; -inf for inactive slots.
std::vector<double> sense_log_likelihoods(const SenseModel& model, std::int32_t w, std::span<const std::int32_t> context) {
  std::vector<double> ll(model.senses(), -std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < model.senses(); ++s) {
    if (!model.active(w, s)) continue;
    double sum = 0;
    const auto v = model.sense_vector(w, s);
    for (auto c : context) sum += path_log_prob(model.tree(), model.node_vectors(), c, v);
    ll[s] = sum;
  }
  return ll;
}

// Normalizes log weights in place into probabilities; returns log of the normalizer.
double softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (auto& v : z) {
    v = std::isinf(v) && v < 0 ? 0.0 : std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return mx + std::log(sum);
}

std::vector<double> posterior(const SenseModel& model, std::int32_t w, std::span<const std::int32_t> context,
                              double* log_marginal = nullptr) {
  const auto pi = model.prior(w);
  auto z = sense_log_likelihoods(model, w, context);
  for (std::size_t s = 0; s < z.size(); ++s)
    if (model.active(w, s)) z[s] += std::log(std::max(pi[s], std::numeric_limits<double>::min()));
  const double lm = softmax_inplace(z);
  if (log_marginal) *log_marginal = lm;
  return z;
}

}  // namespace

SenseTrainReport train_adagram(SenseModel& model, const std::vector<DomainCorpus>& corpora,
                               std::function<void(std::size_t, double)> on_epoch) {
  const auto& hyper = model.hyper();
  std::vector<const std::vector<std::int32_t>*> order;
  std::uint64_t tokens_per_epoch = 0;
  for (const auto& c : corpora) {
    for (const auto& s : c.sentences) order.push_back(&s);
    tokens_per_epoch += c.token_count();
  }
  const double planned = static_cast<double>(tokens_per_epoch) * static_cast<double>(hyper.epochs);
  const std::size_t window = std::max<std::size_t>(1, hyper.window);
  const std::size_t S = hyper.senses;
  Rng rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);

  SenseTrainReport report;
  std::uint64_t processed = 0;
  std::vector<std::int32_t> context;
  std::vector<double> step(hyper.dim);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0;
    std::uint64_t context_words = 0;
    for (const auto* sent : order) {
      const double lr = hyper.alpha0 * std::max(1.0 - static_cast<double>(processed) / std::max(planned, 1.0), 1e-4);
      for (std::size_t i = 0; i < sent->size(); ++i) {
        const std::int32_t w = (*sent)[i];
        const std::size_t b = 1 + static_cast<std::size_t>(rng.below(window));
        context.clear();
        for (std::size_t j = i >= b ? i - b : 0; j <= std::min(sent->size() - 1, i + b); ++j)
          if (j != i) context.push_back((*sent)[j]);
        if (context.empty()) continue;

        double log_marginal = 0;
        const auto gamma = posterior(model, w, context, &log_marginal);
        loss_sum -= log_marginal;
        context_words += context.size();

        for (std::size_t s = 0; s < S; ++s) {
          if (!model.active(w, s) || gamma[s] < kMinResponsibility) continue;
          auto v = model.sense_vector(w, s);
          for (auto c : context) {
            std::fill(step.begin(), step.end(), 0.0);
            hs_sgd_step(model.tree(), model.node_vectors(), c, std::span<const float>(v), lr * gamma[s],
                        std::span<double>(step));
            for (std::size_t k = 0; k < v.size(); ++k) v[k] += static_cast<float>(step[k]);
          }
        }
        for (std::size_t s = 0; s < S; ++s)
          if (model.active(w, s)) model.add_count(w, s, gamma[s]);
      }
      processed += sent->size();
    }
    model.prune();
    double active_sum = 0;
    for (std::size_t w = 0; w < model.vocab().size(); ++w) active_sum += static_cast<double>(model.active_count(static_cast<std::int32_t>(w)));
    report.mean_active_senses.push_back(active_sum / static_cast<double>(model.vocab().size()));
    const double mean = context_words ? loss_sum / static_cast<double>(context_words) : 0.0;
    report.epoch_loss.push_back(mean);
    ++report.epochs_run;
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  report.tokens_processed = processed;
  return report;
}

std::vector<double> disambiguate(const SenseModel& model, std::int32_t w, std::span<const std::int32_t> context) {
  if (w < 0 || static_cast<std::size_t>(w) >= model.vocab().size()) fail(ErrorKind::unknown_word, "word id out of range");
  return posterior(model, w, context);
}

std::vector<double> disambiguate(const SenseModel& model, const std::string& word, const std::vector<std::string>& context) {
  const auto w = model.vocab().id(word);
  std::vector<std::int32_t> ids;
  for (const auto& c : context)
    if (auto id = model.vocab().find(c)) ids.push_back(*id);
  return disambiguate(model, w, ids);
}

std::vector<std::int32_t> occurrence_context(std::span<const std::int32_t> sentence, std::size_t i, std::size_t window) {
  std::vector<std::int32_t> ctx;
  const std::size_t lo = i >= window ? i - window : 0;
  const std::size_t hi = std::min(sentence.size(), i + window + 1);
  for (std::size_t j = lo; j < hi; ++j)
    if (j != i) ctx.push_back(sentence[j]);
  return ctx;
}

namespace {

void tally_occurrence(const SenseModel& model, std::int32_t w, std::span<const std::int32_t> ctx, SenseAssignment mode,
                      std::vector<double>& counts) {
  if (model.active_count(w) == 1 && mode == SenseAssignment::hard) {
    for (std::size_t s = 0; s < model.senses(); ++s)
      if (model.active(w, s)) counts[s] += 1;
    return;
  }
  const auto post = posterior(model, w, ctx);
  if (mode == SenseAssignment::soft) {
    for (std::size_t s = 0; s < post.size(); ++s) counts[s] += post[s];
  } else {
    counts[static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin())] += 1;
  }
}

}  // namespace

SenseTally tally_senses(const SenseModel& model, const DomainCorpus& corpus, SenseAssignment mode) {
  SenseTally t;
  t.counts.assign(model.vocab().size(), std::vector<double>(model.senses(), 0.0));
  t.occurrences.assign(model.vocab().size(), 0);
  for (const auto& sent : corpus.sentences) {
    for (std::size_t i = 0; i < sent.size(); ++i) {
      const auto w = sent[i];
      const auto ctx = occurrence_context(sent, i, model.hyper().window);
      tally_occurrence(model, w, ctx, mode, t.counts[static_cast<std::size_t>(w)]);
      ++t.occurrences[static_cast<std::size_t>(w)];
    }
  }
  return t;
}

SenseDistribution sense_distribution(const SenseModel& model, const std::string& word, const DomainCorpus& corpus,
                                     SenseAssignment mode) {
  const auto w = model.vocab().id(word);
  SenseDistribution d;
  d.word = word;
  d.domain = corpus.domain;
  d.counts.assign(model.senses(), 0.0);
  for (const auto& sent : corpus.sentences) {
    for (std::size_t i = 0; i < sent.size(); ++i) {
      if (sent[i] != w) continue;
      tally_occurrence(model, w, occurrence_context(sent, i, model.hyper().window), mode, d.counts);
      ++d.n;
    }
  }
  if (d.n == 0) fail(ErrorKind::invalid_argument, "word absent from domain: " + word + " in " + corpus.domain.str());
  d.probs.resize(d.counts.size());
  for (std::size_t s = 0; s < d.counts.size(); ++s) d.probs[s] = d.counts[s] / static_cast<double>(d.n);
  return d;
}

std::vector<SenseNeighbor> sense_neighbors(const SenseModel& model, std::int32_t w, std::size_t s, std::size_t n) {
  if (w < 0 || static_cast<std::size_t>(w) >= model.vocab().size()) fail(ErrorKind::unknown_word, "word id out of range");
  if (s >= model.senses() || !model.active(w, s)) fail(ErrorKind::invalid_argument, "query sense is inactive");
  if (n == 0) return {};
  const auto q = model.sense_vector(w, s);
  std::vector<SenseNeighbor> out;
  for (std::size_t v = 0; v < model.vocab().size(); ++v) {
    for (std::size_t t = 0; t < model.senses(); ++t) {
      const auto id = static_cast<std::int32_t>(v);
      if ((id == w && t == s) || !model.active(id, t)) continue;
      out.push_back({id, t, cosine(q, model.sense_vector(id, t))});
    }
  }
  std::sort(out.begin(), out.end(), [](const SenseNeighbor& a, const SenseNeighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.word != b.word) return a.word < b.word;
    return a.sense < b.sense;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

std::vector<float> expected_sense_vector(const SenseModel& model, std::int32_t w, std::span<const std::int32_t> context,
                                         bool use_argmax) {
  const auto post = disambiguate(model, w, context);
  std::vector<float> out(model.dim(), 0.0f);
  if (use_argmax) {
    const auto best = static_cast<std::size_t>(std::max_element(post.begin(), post.end()) - post.begin());
    const auto v = model.sense_vector(w, best);
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  std::vector<double> acc(model.dim(), 0.0);
  for (std::size_t s = 0; s < post.size(); ++s) {
    if (post[s] == 0) continue;
    const auto v = model.sense_vector(w, s);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += post[s] * v[k];
  }
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k]);
  return out;
}

// ---- persistence ----

void SenseModel::export_dir(const std::string& dir) const {
  const fs::path root(dir), sdir = root / "senses";
  fs::create_directories(sdir);
  json meta = {{"format", "domainsense"},
               {"format_version", 1},
               {"senses", hyper_.senses},
               {"dimension", hyper_.dim},
               {"window", hyper_.window},
               {"min_count", hyper_.min_count},
               {"epochs", hyper_.epochs},
               {"seed", hyper_.seed},
               {"alpha0", hyper_.alpha0},
               {"alpha_dp", hyper_.alpha_dp},
               {"prune_threshold", hyper_.prune_threshold},
               {"vocab_size", vocab_.size()},
               {"vocab_hash", vocab_.hash()}};
  write_file((sdir / "meta.json").string(), meta.dump(2) + "\n");
  vocab_.save((sdir / "vocab.txt").string());

  std::vector<std::string> names;
  for (std::size_t w = 0; w < vocab_.size(); ++w)
    for (std::size_t s = 0; s < hyper_.senses; ++s) names.push_back(vocab_.token(static_cast<std::int32_t>(w)) + "#" + std::to_string(s));
  write_word2vec_text((sdir / "vectors.vec").string(), names, vectors_);

  std::ostringstream priors, counts;
  for (std::size_t w = 0; w < vocab_.size(); ++w) {
    const auto id = static_cast<std::int32_t>(w);
    const auto pi = prior(id);
    for (std::size_t s = 0; s < hyper_.senses; ++s) {
      priors << vocab_.token(id) << '\t' << s << '\t' << pi[s] << '\n';
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%a", counts_(w, s));
      counts << vocab_.token(id) << '\t' << s << '\t' << buf << '\t' << (active(id, s) ? 1 : 0) << '\n';
    }
  }
  write_file((sdir / "priors.tsv").string(), priors.str());
  write_file((sdir / "counts.tsv").string(), counts.str());
  write_hsm((root / "hsm.bin").string(), tree_, nodes_);
}

SenseModel SenseModel::import_dir(const std::string& dir) {
  const fs::path root(dir), sdir = root / "senses";
  const json meta = json::parse(read_file((sdir / "meta.json").string()));
  if (meta.value("format", "") != "domainsense") fail(ErrorKind::parse, dir + ": not a domainsense export");
  SenseModel m;
  m.hyper_.senses = meta.at("senses");
  m.hyper_.dim = meta.at("dimension");
  m.hyper_.window = meta.at("window");
  m.hyper_.min_count = meta.at("min_count");
  m.hyper_.epochs = meta.at("epochs");
  m.hyper_.seed = meta.at("seed");
  m.hyper_.alpha0 = meta.at("alpha0");
  m.hyper_.alpha_dp = meta.at("alpha_dp");
  m.hyper_.prune_threshold = meta.at("prune_threshold");
  m.vocab_ = Vocabulary::load((sdir / "vocab.txt").string());
  if (m.vocab_.hash() != meta.at("vocab_hash").get<std::uint64_t>()) fail(ErrorKind::parse, dir + ": vocabulary hash mismatch");
  auto tv = read_word2vec_text((sdir / "vectors.vec").string());
  if (tv.vectors.rows() != m.vocab_.size() * m.hyper_.senses || tv.vectors.cols() != m.hyper_.dim)
    fail(ErrorKind::parse, dir + ": sense vector shape mismatch");
  m.vectors_ = std::move(tv.vectors);
  m.counts_ = Matrix<double>(m.vocab_.size(), m.hyper_.senses);
  m.active_.assign(m.vocab_.size() * m.hyper_.senses, 1);
  std::istringstream in(read_file((sdir / "counts.tsv").string()));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word, count_hex;
    std::size_t s = 0;
    int act = 1;
    std::getline(ls, word, '\t');
    ls >> s >> count_hex >> act;
    const auto id = m.vocab_.id(word);
    if (s >= m.hyper_.senses) fail(ErrorKind::parse, "counts.tsv: sense index out of range");
    m.counts_(static_cast<std::size_t>(id), s) = std::strtod(count_hex.c_str(), nullptr);
    m.active_[static_cast<std::size_t>(id) * m.hyper_.senses + s] = static_cast<std::uint8_t>(act);
  }
  auto [tree, nodes] = read_hsm((root / "hsm.bin").string());
  if (tree.vocab_size() != m.vocab_.size()) fail(ErrorKind::parse, dir + ": hsm.bin shape mismatch");
  m.tree_ = std::move(tree);
  m.nodes_ = std::move(nodes);
  return m;
}

}  // namespace dsner
