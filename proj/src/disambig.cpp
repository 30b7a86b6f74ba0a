#include "dsner/disambig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dsner {

UnigramTables UnigramTables::build(const Vocabulary& vocab, const std::vector<DomainCorpus>& corpora) {
  UnigramTables t;
  t.vocab_size_ = vocab.size();
  for (const auto& c : corpora) {
    t.domains_.push_back(c.domain);
    std::vector<std::uint64_t> counts(vocab.size(), 0);
    std::uint64_t total = 0;
    for (const auto& s : c.sentences)
      for (auto w : s) {
        ++counts[static_cast<std::size_t>(w)];
        ++total;
      }
    t.counts_.push_back(std::move(counts));
    t.totals_.push_back(total);
  }
  return t;
}

std::size_t UnigramTables::domain_index(const DomainId& d) const {
  for (std::size_t i = 0; i < domains_.size(); ++i)
    if (domains_[i] == d) return i;
  fail(ErrorKind::unknown_domain, "unknown domain: " + d.str());
}

double UnigramTables::log_prob(std::size_t d, std::int32_t w) const {
  return std::log(static_cast<double>(count(d, w) + 1)) - std::log(static_cast<double>(totals_.at(d) + vocab_size_));
}

void UnigramTables::save(const std::string& path, const Vocabulary& vocab) const {
  std::ostringstream out;
  out << "#word";
  for (const auto& d : domains_) out << '\t' << d.str();
  out << '\n';
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    out << vocab.token(static_cast<std::int32_t>(w));
    for (const auto& c : counts_) out << '\t' << c[w];
    out << '\n';
  }
  write_file(path, out.str());
}

UnigramTables UnigramTables::load(const std::string& path, const Vocabulary& vocab) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("#word", 0) != 0) fail(ErrorKind::parse, path + ": missing header");
  UnigramTables t;
  t.vocab_size_ = vocab.size();
  auto header = split_ws(line);
  for (std::size_t i = 1; i < header.size(); ++i) t.domains_.emplace_back(header[i]);
  t.counts_.assign(t.domains_.size(), std::vector<std::uint64_t>(vocab.size(), 0));
  t.totals_.assign(t.domains_.size(), 0);
  while (std::getline(in, line)) {
    auto cols = split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() != t.domains_.size() + 1) fail(ErrorKind::parse, path + ": ragged row");
    const auto w = static_cast<std::size_t>(vocab.id(cols[0]));
    for (std::size_t d = 0; d < t.domains_.size(); ++d) {
      t.counts_[d][w] = std::stoull(cols[d + 1]);
      t.totals_[d] += t.counts_[d][w];
    }
  }
  return t;
}

namespace {

std::size_t first_argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<double> normalize_logs(const std::vector<double>& logs) {
  const double mx = *std::max_element(logs.begin(), logs.end());
  std::vector<double> p(logs.size());
  double sum = 0;
  for (std::size_t i = 0; i < logs.size(); ++i) sum += (p[i] = std::exp(logs[i] - mx));
  for (auto& v : p) v /= sum;
  return p;
}

double log_prior(PriorMode mode, const UnigramTables& tables, std::size_t t, std::size_t k) {
  if (mode == PriorMode::uniform) return -std::log(static_cast<double>(k));
  std::uint64_t all = 0;
  for (std::size_t d = 0; d < tables.domains().size(); ++d) all += tables.total(d);
  return std::log(static_cast<double>(tables.total(t))) - std::log(static_cast<double>(all));
}

struct ResolvedContexts {
  std::vector<std::int32_t> ids;
  std::size_t skipped = 0;
};

ResolvedContexts resolve(const Vocabulary& vocab, const std::vector<std::string>& contexts) {
  ResolvedContexts r;
  for (const auto& c : contexts) {
    if (auto id = vocab.find(c))
      r.ids.push_back(*id);
    else
      ++r.skipped;
  }
  return r;
}

}  // namespace

nlohmann::json DomainPosterior::to_json() const {
  nlohmann::json j;
  j["argmax"] = argmax_domain().str();
  j["used_contexts"] = used_contexts;
  j["skipped_contexts"] = skipped_contexts;
  j["domains"] = nlohmann::json::array();
  for (std::size_t d = 0; d < domains.size(); ++d) {
    nlohmann::json row = {{"domain", domains[d].str()}, {"prob", probs[d]}};
    if (d < terms.size()) {
      row["log_output"] = terms[d].log_output;
      row["log_context"] = terms[d].log_context;
      row["log_prior"] = terms[d].log_prior;
    }
    j["domains"].push_back(row);
  }
  return j;
}

nlohmann::json DomainScores::to_json() const {
  nlohmann::json j;
  j["argmax"] = argmax_domain().str();
  j["used_contexts"] = used_contexts;
  j["skipped_contexts"] = skipped_contexts;
  j["domains"] = nlohmann::json::array();
  for (std::size_t d = 0; d < domains.size(); ++d) j["domains"].push_back({{"domain", domains[d].str()}, {"score", scores[d]}});
  return j;
}

DomainPosterior posterior_domains(const UsageQuery& query, const DomainEmbeddingSet& set, const UnigramTables& tables) {
  const auto& vocab = set.vocab();
  const auto o = vocab.id(query.target);
  const auto ctx = resolve(vocab, query.contexts);
  if (ctx.ids.empty() && !query.contexts.empty()) fail(ErrorKind::invalid_argument, "no usable context");

  DomainPosterior post;
  post.domains = set.domains();
  post.used_contexts = ctx.ids.size();
  post.skipped_contexts = ctx.skipped;
  const std::size_t K = set.domains().size();
  std::vector<double> logs(K);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t t = tables.domain_index(set.domains()[k]);
    DomainLogTerms terms;
    terms.log_prior = log_prior(query.prior, tables, t, K);
    for (auto c : ctx.ids) {
      const auto input = set.compose(c, k);
      terms.log_output += path_log_prob(set.tree(), set.node_vectors(), o, std::span<const float>(input));
      terms.log_context += tables.log_prob(t, c);
    }
    logs[k] = terms.log_prior + terms.log_output + terms.log_context;
    post.terms.push_back(terms);
  }
  post.probs = normalize_logs(logs);
  post.argmax = first_argmax(post.probs);
  return post;
}

DomainPosterior baseline_unigram(const UsageQuery& query, const Vocabulary& vocab, const UnigramTables& tables) {
  const auto ctx = resolve(vocab, query.contexts);
  if (ctx.ids.empty() && !query.contexts.empty()) fail(ErrorKind::invalid_argument, "no usable context");
  auto target = vocab.find(query.target);
  DomainPosterior post;
  post.domains = tables.domains();
  post.used_contexts = ctx.ids.size();
  post.skipped_contexts = ctx.skipped;
  std::vector<double> logs(tables.domains().size());
  for (std::size_t d = 0; d < logs.size(); ++d) {
    DomainLogTerms terms;
    if (target) terms.log_output = tables.log_prob(d, *target);
    for (auto c : ctx.ids) terms.log_context += tables.log_prob(d, c);
    logs[d] = terms.log_output + terms.log_context;
    post.terms.push_back(terms);
  }
  post.probs = normalize_logs(logs);
  post.argmax = first_argmax(post.probs);
  return post;
}

namespace {

template <typename ScoreFn>
DomainScores nn_baseline(const UsageQuery& query, const DomainEmbeddingSet& set, ScoreFn score) {
  const auto& vocab = set.vocab();
  const auto w = vocab.id(query.target);
  const auto ctx = resolve(vocab, query.contexts);
  DomainScores out;
  out.domains = set.domains();
  out.skipped_contexts = ctx.skipped;
  std::size_t used = 0;
  for (std::size_t k = 0; k < set.domains().size(); ++k) {
    const auto target = set.compose(w, k);
    std::vector<std::vector<float>> vecs;
    for (auto c : ctx.ids) {
      auto v = set.compose(c, k);
      if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) continue;
      vecs.push_back(std::move(v));
    }
    used = std::max(used, vecs.size());
    out.scores.push_back(vecs.empty() ? -std::numeric_limits<double>::infinity() : score(target, vecs));
  }
  if (used == 0) fail(ErrorKind::invalid_argument, "no usable context");
  out.used_contexts = used;
  out.argmax = first_argmax(out.scores);
  return out;
}

}  // namespace

DomainScores baseline_dm(const UsageQuery& query, const DomainEmbeddingSet& set) {
  return nn_baseline(query, set, [](const std::vector<float>& t, const std::vector<std::vector<float>>& ctx) {
    double s = 0;
    for (const auto& c : ctx) s += cosine(t, c);
    return s / static_cast<double>(ctx.size());
  });
}

DomainScores baseline_cvm(const UsageQuery& query, const DomainEmbeddingSet& set) {
  return nn_baseline(query, set, [](const std::vector<float>& t, const std::vector<std::vector<float>>& ctx) {
    std::vector<float> mean(t.size(), 0.0f);
    std::vector<double> acc(t.size(), 0.0);
    for (const auto& c : ctx)
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += c[i];
    for (std::size_t i = 0; i < acc.size(); ++i) mean[i] = static_cast<float>(acc[i] / static_cast<double>(ctx.size()));
    return cosine(t, mean);
  });
}

DisambigMethod parse_disambig_method(const std::string& name) {
  if (name == "ddpp") return DisambigMethod::ddpp;
  if (name == "unigram") return DisambigMethod::unigram;
  if (name == "dm") return DisambigMethod::dm;
  if (name == "cvm") return DisambigMethod::cvm;
  fail(ErrorKind::invalid_argument, "unknown disambiguation method: " + name);
}

std::string method_name(DisambigMethod m) {
  switch (m) {
    case DisambigMethod::ddpp: return "ddpp";
    case DisambigMethod::unigram: return "unigram";
    case DisambigMethod::dm: return "dm";
    case DisambigMethod::cvm: return "cvm";
  }
  return "?";
}

DomainId predict_domain(DisambigMethod method, const UsageQuery& query, const DomainEmbeddingSet& set,
                        const UnigramTables& tables) {
  switch (method) {
    case DisambigMethod::ddpp: return posterior_domains(query, set, tables).argmax_domain();
    case DisambigMethod::unigram: return baseline_unigram(query, set.vocab(), tables).argmax_domain();
    case DisambigMethod::dm: return baseline_dm(query, set).argmax_domain();
    case DisambigMethod::cvm: return baseline_cvm(query, set).argmax_domain();
  }
  fail(ErrorKind::invalid_argument, "bad method");
}

DisambigEval eval_disambig(const std::vector<LabeledUsage>& testset, const std::vector<DisambigMethod>& methods,
                           const DomainEmbeddingSet& set, const UnigramTables& tables) {
  if (testset.empty()) fail(ErrorKind::invalid_argument, "empty disambiguation test set");
  DisambigEval ev;
  ev.methods = methods;
  for (auto m : methods) {
    std::vector<bool> ok;
    std::vector<DomainId> pred;
    std::size_t right = 0;
    for (const auto& item : testset) {
      pred.push_back(predict_domain(m, item.query, set, tables));
      ok.push_back(pred.back() == item.gold);
      right += ok.back() ? 1 : 0;
    }
    ev.accuracy.push_back(static_cast<double>(right) / static_cast<double>(testset.size()));
    ev.correct.push_back(std::move(ok));
    ev.predicted.push_back(std::move(pred));
  }
  return ev;
}

nlohmann::json DisambigEval::to_json(const std::vector<LabeledUsage>& testset) const {
  nlohmann::json j;
  for (std::size_t m = 0; m < methods.size(); ++m) j["accuracy"][method_name(methods[m])] = accuracy[m];
  j["items"] = nlohmann::json::array();
  for (std::size_t i = 0; i < testset.size(); ++i) {
    nlohmann::json item = {{"word", testset[i].query.target}, {"context", testset[i].query.contexts}, {"gold", testset[i].gold.str()}};
    for (std::size_t m = 0; m < methods.size(); ++m)
      item["methods"][method_name(methods[m])] = {{"predicted", predicted[m][i].str()}, {"correct", static_cast<bool>(correct[m][i])}};
    j["items"].push_back(item);
  }
  return j;
}

}  // namespace dsner
