#include "dsner/crf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <set>
#include <thread>

#include "dsner/lbfgs.hpp"

namespace dsner {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr char kMagic[8] = {'D', 'S', 'C', 'R', 'F', '0', '0', '1'};
constexpr int kFormatVersion = 1;
// Gradient terms are reduced over this many fixed chunks regardless of thread count.
constexpr std::size_t kChunks = 8;

double log_sum_exp(const double* v, std::size_t n) {
  double m = kNegInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// Forward (alpha) and backward (beta) tables in log space.
struct Lattice {
  Matrix<double> scores, alpha, beta;
  double log_z = 0;
};

Lattice run_lattice(const CrfModel& model, const CrfInput& input, bool need_beta) {
  const std::size_t T = input.length(), L = model.num_labels();
  if (T == 0) fail(ErrorKind::invalid_argument, "empty sentence");
  Lattice lat;
  lat.scores = state_scores(model, input);
  lat.alpha = Matrix<double>(T, L);
  std::vector<double> buf(L);
  for (std::size_t y = 0; y < L; ++y) lat.alpha(0, y) = lat.scores(0, y);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < L; ++y) {
      for (std::size_t p = 0; p < L; ++p) buf[p] = lat.alpha(t - 1, p) + model.trans(p, y);
      lat.alpha(t, y) = log_sum_exp(buf.data(), L) + lat.scores(t, y);
    }
  }
  lat.log_z = log_sum_exp(&lat.alpha(T - 1, 0), L);
  if (need_beta) {
    lat.beta = Matrix<double>(T, L, 0.0);
    for (std::size_t t = T - 1; t-- > 0;) {
      for (std::size_t y = 0; y < L; ++y) {
        for (std::size_t n = 0; n < L; ++n) buf[n] = model.trans(y, n) + lat.scores(t + 1, n) + lat.beta(t + 1, n);
        lat.beta(t, y) = log_sum_exp(buf.data(), L);
      }
    }
  }
  return lat;
}

void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v;
  std::memcpy(&v, in.data() + pos, 8);
  return v;
}

std::vector<std::string> types_in(const std::vector<LabeledSentence>& data) {
  std::set<std::string> types;
  for (const auto& s : data)
    for (const auto& l : s.labels) {
      auto [p, t] = split_tag(l);
      if (p != 'O') types.insert(t);
    }
  return {types.begin(), types.end()};
}

}  // namespace

// ---- labels ----

LabelSet::LabelSet(std::vector<std::string> entity_types) {
  std::sort(entity_types.begin(), entity_types.end());
  entity_types.erase(std::unique(entity_types.begin(), entity_types.end()), entity_types.end());
  types_ = std::move(entity_types);
  labels_.push_back("O");
  for (const auto& t : types_) {
    if (t.empty()) fail(ErrorKind::invalid_argument, "empty entity type");
    for (const char* p : {"B-", "I-", "L-", "U-"}) labels_.push_back(p + t);
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = i;
}

LabelSet LabelSet::from_labels(std::vector<std::string> labels) {
  if (labels.empty()) fail(ErrorKind::invalid_argument, "empty label set");
  LabelSet ls;
  std::set<std::string> types;
  for (const auto& l : labels) {
    auto [p, t] = split_tag(l);
    if (p != 'O') types.insert(t);
    if (!ls.index_.emplace(l, ls.labels_.size()).second) fail(ErrorKind::invalid_argument, "duplicate label: " + l);
    ls.labels_.push_back(l);
  }
  ls.types_.assign(types.begin(), types.end());
  return ls;
}

std::optional<std::size_t> LabelSet::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSet::id(const std::string& label) const {
  auto f = find(label);
  if (!f) fail(ErrorKind::invalid_argument, "label not in label set: " + label);
  return *f;
}

bool LabelSet::allowed(std::size_t from, std::size_t to) const {
  auto [pf, tf] = split_tag(labels_.at(from));
  auto [pt, tt] = split_tag(labels_.at(to));
  const bool open = pf == 'B' || pf == 'I';
  if (open) return (pt == 'I' || pt == 'L') && tf == tt;
  return pt == 'O' || pt == 'B' || pt == 'U';
}

bool LabelSet::allowed_start(std::size_t id) const {
  const char p = split_tag(labels_.at(id)).first;
  return p == 'O' || p == 'B' || p == 'U';
}

bool LabelSet::allowed_end(std::size_t id) const {
  const char p = split_tag(labels_.at(id)).first;
  return p == 'O' || p == 'L' || p == 'U';
}

// ---- model ----

std::optional<std::int32_t> CrfModel::feature_id(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void CrfModel::rebuild_index() {
  index_.clear();
  index_.reserve(feature_keys.size());
  for (std::size_t i = 0; i < feature_keys.size(); ++i) index_[feature_keys[i]] = static_cast<std::int32_t>(i);
}

CrfInput compile(const CrfModel& model, const std::vector<std::vector<Feature>>& features) {
  CrfInput in;
  in.tokens.resize(features.size());
  for (std::size_t t = 0; t < features.size(); ++t) {
    auto& dst = in.tokens[t];
    dst.reserve(features[t].size());
    for (const auto& f : features[t])
      if (auto id = model.feature_id(f.key)) dst.emplace_back(*id, f.value);
  }
  return in;
}

CrfInput compile(const CrfModel& model, const std::vector<std::string>& tokens, const DomainId& domain,
                 const EmbeddingProvider* provider) {
  return compile(model, extract_features(tokens, domain, model.templates, provider));
}

Matrix<double> state_scores(const CrfModel& model, const CrfInput& input) {
  const std::size_t L = model.num_labels();
  Matrix<double> s(input.length(), L, 0.0);
  for (std::size_t t = 0; t < input.length(); ++t) {
    auto row = s.row(t);
    for (auto [f, v] : input.tokens[t]) {
      const double* w = &model.state_weights[static_cast<std::size_t>(f) * L];
      for (std::size_t y = 0; y < L; ++y) row[y] += v * w[y];
    }
  }
  return s;
}

double path_score(const CrfModel& model, const CrfInput& input, const std::vector<std::size_t>& labels) {
  if (labels.size() != input.length()) fail(ErrorKind::invalid_argument, "path length does not match sentence");
  const std::size_t L = model.num_labels();
  double score = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    for (auto [f, v] : input.tokens[t]) score += v * model.state_weights[static_cast<std::size_t>(f) * L + labels[t]];
    if (t > 0) score += model.trans(labels[t - 1], labels[t]);
  }
  return score;
}

double log_partition(const CrfModel& model, const CrfInput& input) { return run_lattice(model, input, false).log_z; }

Marginals forward_backward(const CrfModel& model, const CrfInput& input) {
  const std::size_t T = input.length(), L = model.num_labels();
  Lattice lat = run_lattice(model, input, true);
  Marginals m;
  m.log_z = lat.log_z;
  m.unary = Matrix<double>(T, L);
  m.pair = Matrix<double>(L, L, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = 0; y < L; ++y) m.unary(t, y) = std::exp(lat.alpha(t, y) + lat.beta(t, y) - lat.log_z);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b)
        m.pair(a, b) +=
            std::exp(lat.alpha(t - 1, a) + model.trans(a, b) + lat.scores(t, b) + lat.beta(t, b) - lat.log_z);
  return m;
}

namespace {

// Pr(path | x) for a path with score `score`. Each step's potentials are shifted
// by their maximum and the forward vector is rescaled by a power of two, which
// keeps every operation exact when all potentials are equal.
double path_probability(const CrfModel& model, const Matrix<double>& s, double score) {
  const std::size_t T = s.rows(), L = model.num_labels();
  std::vector<double> alpha(L), next(L);
  double shift = *std::max_element(s.row(0).begin(), s.row(0).end());
  for (std::size_t y = 0; y < L; ++y) alpha[y] = std::exp(s(0, y) - shift);
  long exponent = 0;
  auto rescale = [&](std::vector<double>& v) {
    int e = 0;
    std::frexp(*std::max_element(v.begin(), v.end()), &e);
    for (auto& x : v) x = std::ldexp(x, -e);
    exponent += e;
  };
  rescale(alpha);
  for (std::size_t t = 1; t < T; ++t) {
    double m = kNegInf;
    for (std::size_t p = 0; p < L; ++p)
      for (std::size_t y = 0; y < L; ++y) m = std::max(m, model.trans(p, y) + s(t, y));
    shift += m;
    for (std::size_t y = 0; y < L; ++y) {
      double acc = 0;
      for (std::size_t p = 0; p < L; ++p) acc += alpha[p] * std::exp(model.trans(p, y) + s(t, y) - m);
      next[y] = acc;
    }
    alpha.swap(next);
    rescale(alpha);
  }
  double total = 0;
  for (double a : alpha) total += a;
  const double rel = score - shift;
  if (rel > -700.0) return std::min(1.0, std::ldexp(std::exp(rel) / total, static_cast<int>(-exponent)));
  return std::min(1.0, std::exp(rel - std::log(total) - static_cast<double>(exponent) * std::numbers::ln2));
}

}  // namespace

Prediction viterbi(const CrfModel& model, const CrfInput& input, bool constrain) {
  const std::size_t T = input.length(), L = model.num_labels();
  if (T == 0) fail(ErrorKind::invalid_argument, "empty sentence");
  Matrix<double> s = state_scores(model, input);
  Matrix<double> delta(T, L);
  Matrix<std::uint32_t> back(T, L, 0);
  for (std::size_t y = 0; y < L; ++y)
    delta(0, y) = (constrain && !model.labels.allowed_start(y)) ? kNegInf : s(0, y);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < L; ++y) {
      double best = kNegInf;
      std::uint32_t arg = 0;
      bool any = false;
      for (std::size_t p = 0; p < L; ++p) {
        if (constrain && !model.labels.allowed(p, y)) continue;
        const double v = delta(t - 1, p) + model.trans(p, y);
        if (!any || v > best) {
          best = v;
          arg = static_cast<std::uint32_t>(p);
          any = true;
        }
      }
      delta(t, y) = best + s(t, y);
      back(t, y) = arg;
    }
  }
  std::size_t last = 0;
  double best = kNegInf;
  bool any = false;
  for (std::size_t y = 0; y < L; ++y) {
    if (constrain && !model.labels.allowed_end(y)) continue;
    if (!any || delta(T - 1, y) > best) {
      best = delta(T - 1, y);
      last = y;
      any = true;
    }
  }
  Prediction pred;
  pred.label_ids.resize(T);
  pred.label_ids[T - 1] = last;
  for (std::size_t t = T - 1; t > 0; --t) pred.label_ids[t - 1] = back(t, pred.label_ids[t]);
  pred.labels.reserve(T);
  for (auto id : pred.label_ids) pred.labels.push_back(model.labels.label(id));
  // Recompute from the path so log_score matches path_score bit-for-bit.
  pred.log_score = path_score(model, input, pred.label_ids);
  pred.confidence = path_probability(model, s, pred.log_score);
  return pred;
}

double sequence_confidence(const CrfModel& model, const CrfInput& input, bool length_normalized) {
  const Prediction p = viterbi(model, input);
  if (!length_normalized) return p.confidence;
  return std::exp((p.log_score - log_partition(model, input)) / static_cast<double>(input.length()));
}

// ---- training ----

std::vector<double> pack_weights(const CrfModel& model) {
  std::vector<double> w(model.state_weights);
  w.insert(w.end(), model.transitions.begin(), model.transitions.end());
  return w;
}

void unpack_weights(CrfModel& model, const std::vector<double>& w) {
  const std::size_t ns = model.state_weights.size();
  if (w.size() != ns + model.transitions.size()) fail(ErrorKind::invalid_argument, "weight vector size mismatch");
  std::copy(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(ns), model.state_weights.begin());
  std::copy(w.begin() + static_cast<std::ptrdiff_t>(ns), w.end(), model.transitions.begin());
}

double crf_objective(const CrfModel& model, const std::vector<CompiledExample>& data, std::vector<double>& grad,
                     std::size_t threads) {
  const std::size_t L = model.num_labels();
  const std::size_t ns = model.state_weights.size();
  const std::size_t n = ns + model.transitions.size();
  const std::size_t chunks = std::min(kChunks, std::max<std::size_t>(data.size(), 1));
  std::vector<std::vector<double>> part_grad(chunks, std::vector<double>(n, 0.0));
  std::vector<double> part_nll(chunks, 0.0);

  auto work = [&](std::size_t c) {
    auto& g = part_grad[c];
    double nll = 0;
    const std::size_t lo = data.size() * c / chunks, hi = data.size() * (c + 1) / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& ex = data[i];
      const Marginals m = forward_backward(model, ex.input);
      nll += m.log_z - path_score(model, ex.input, ex.gold);
      for (std::size_t t = 0; t < ex.input.length(); ++t) {
        for (auto [f, v] : ex.input.tokens[t]) {
          double* gf = &g[static_cast<std::size_t>(f) * L];
          for (std::size_t y = 0; y < L; ++y) gf[y] += v * m.unary(t, y);
          gf[ex.gold[t]] -= v;
        }
        if (t > 0) g[ns + ex.gold[t - 1] * L + ex.gold[t]] -= 1.0;
      }
      for (std::size_t a = 0; a < L; ++a)
        for (std::size_t b = 0; b < L; ++b) g[ns + a * L + b] += m.pair(a, b);
    }
    part_nll[c] = nll;
  };

  threads = std::max<std::size_t>(1, std::min(threads, chunks));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < chunks; c += threads) work(c);
      });
    for (auto& th : pool) th.join();
  }

  grad.assign(n, 0.0);
  double value = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    value += part_nll[c];
    for (std::size_t j = 0; j < n; ++j) grad[j] += part_grad[c][j];
  }
  auto reg = [&](double w, std::size_t j) {
    value += model.l2 * w * w;
    grad[j] += 2.0 * model.l2 * w;
  };
  for (std::size_t j = 0; j < ns; ++j) reg(model.state_weights[j], j);
  for (std::size_t j = 0; j < model.transitions.size(); ++j) reg(model.transitions[j], ns + j);
  return value;
}

CrfModel train_crf(const std::vector<LabeledSentence>& data, const FeatureTemplateSet& templates,
                   const EmbeddingProvider* provider, const CrfTrainOptions& options, CrfTrainStats* stats) {
  if (data.empty()) fail(ErrorKind::invalid_argument, "empty training set");
  if (!(options.l2 >= 0) || !std::isfinite(options.l2)) fail(ErrorKind::invalid_argument, "l2 must be finite and >= 0");
  templates.validate();

  CrfModel model;
  model.templates = templates;
  model.l2 = options.l2;
  model.labels = LabelSet(options.entity_types ? *options.entity_types : types_in(data));

  std::vector<std::vector<std::vector<Feature>>> feats;
  feats.reserve(data.size());
  std::set<std::string> keys;
  for (const auto& s : data) {
    if (s.tokens.size() != s.labels.size()) fail(ErrorKind::invalid_argument, "tokens and labels differ in length");
    feats.push_back(extract_features(s.tokens, s.domain, templates, provider));
    for (const auto& tok : feats.back())
      for (const auto& f : tok) keys.insert(f.key);
  }
  model.feature_keys.assign(keys.begin(), keys.end());
  model.rebuild_index();
  const std::size_t L = model.num_labels();
  model.state_weights.assign(model.num_features() * L, 0.0);
  model.transitions.assign(L * L, 0.0);
  if (options.warm_start) {
    const CrfModel& prev = *options.warm_start;
    std::vector<std::optional<std::size_t>> map_label(L);
    for (std::size_t y = 0; y < L; ++y) map_label[y] = prev.labels.find(model.labels.label(y));
    for (std::size_t f = 0; f < model.num_features(); ++f) {
      const auto pf = prev.feature_id(model.feature_keys[f]);
      if (!pf) continue;
      for (std::size_t y = 0; y < L; ++y)
        if (map_label[y])
          model.state_weights[f * L + y] = prev.state_weights[static_cast<std::size_t>(*pf) * prev.num_labels() + *map_label[y]];
    }
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b)
        if (map_label[a] && map_label[b]) model.trans(a, b) = prev.trans(*map_label[a], *map_label[b]);
  }

  std::vector<CompiledExample> compiled;
  compiled.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CompiledExample ex;
    ex.input = compile(model, feats[i]);
    ex.gold.reserve(data[i].labels.size());
    for (const auto& l : data[i].labels) ex.gold.push_back(model.labels.id(l));
    compiled.push_back(std::move(ex));
  }
  feats.clear();

  model.metadata = nlohmann::json::object();
  model.metadata["train_hash"] = hash_sentences(data);
  model.metadata["train_sentences"] = data.size();
  model.metadata["embedding_source"] = to_string(templates.provider);
  model.metadata["embedding_dim"] = provider ? provider->dim() : 0;

  std::vector<double> w = pack_weights(model);
  auto objective = [&](const std::vector<double>& x, std::vector<double>& g) {
    unpack_weights(model, x);
    // Non-finite trial points are rejected by the line search; a non-finite start aborts there.
    return crf_objective(model, compiled, g, options.threads);
  };
  LbfgsOptions lo;
  lo.max_iter = options.max_iter;
  lo.tol = options.tol;
  const LbfgsResult res = lbfgs_minimize(objective, w, lo, options.on_iter);
  unpack_weights(model, w);
  for (double x : w)
    if (!std::isfinite(x)) fail(ErrorKind::numeric, "non-finite CRF weight after training");

  model.metadata["iterations"] = res.iterations;
  model.metadata["stop_reason"] = res.stop_reason;
  if (stats) {
    stats->iterations = res.iterations;
    stats->objective = res.value;
    stats->initial_objective = res.history.empty() ? res.value : res.history.front();
    stats->stop_reason = res.stop_reason;
    stats->history = res.history;
  }
  return model;
}

// ---- persistence ----

std::string CrfModel::serialize() const {
  nlohmann::json h;
  h["format"] = "dsner-crf";
  h["version"] = kFormatVersion;
  h["entity_types"] = labels.entity_types();
  h["labels"] = labels.labels();
  h["templates"] = templates.to_json();
  h["metadata"] = metadata;
  h["l2"] = l2;
  h["num_features"] = feature_keys.size();
  h["num_labels"] = labels.size();
  h["feature_keys"] = feature_keys;
  const std::string header = h.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, header.size());
  out += header;
  const std::size_t nbytes = (state_weights.size() + transitions.size()) * sizeof(double);
  const std::size_t at = out.size();
  out.resize(at + nbytes);
  std::memcpy(out.data() + at, state_weights.data(), state_weights.size() * sizeof(double));
  std::memcpy(out.data() + at + state_weights.size() * sizeof(double), transitions.data(),
              transitions.size() * sizeof(double));
  put_u64(out, fnv1a(out));
  return out;
}

CrfModel CrfModel::deserialize(const std::string& bytes, const std::string& origin) {
  auto bad = [&](const std::string& why) { fail(ErrorKind::parse, origin + ": " + why); };
  if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    bad("not a CRF model file");
  const std::uint64_t stored = get_u64(bytes, bytes.size() - 8);
  if (fnv1a(std::string_view(bytes).substr(0, bytes.size() - 8)) != stored) bad("checksum mismatch");
  const std::uint64_t hlen = get_u64(bytes, sizeof kMagic);
  const std::size_t hstart = sizeof kMagic + 8;
  if (hlen > bytes.size() - hstart - 8) bad("truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(hstart, hlen));
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("bad header: ") + e.what());
  }
  CrfModel m;
  try {
    if (h.at("version").get<int>() != kFormatVersion) bad("unsupported version");
    m.labels = LabelSet::from_labels(h.at("labels").get<std::vector<std::string>>());
    m.templates = FeatureTemplateSet::from_json(h.at("templates"));
    m.metadata = h.at("metadata");
    m.l2 = h.at("l2").get<double>();
    m.feature_keys = h.at("feature_keys").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("bad header: ") + e.what());
  }
  const std::size_t L = m.labels.size();
  m.state_weights.resize(m.feature_keys.size() * L);
  m.transitions.resize(L * L);
  const std::size_t wstart = hstart + hlen;
  const std::size_t nbytes = (m.state_weights.size() + m.transitions.size()) * sizeof(double);
  if (bytes.size() != wstart + nbytes + 8) bad("weight block size mismatch");
  std::memcpy(m.state_weights.data(), bytes.data() + wstart, m.state_weights.size() * sizeof(double));
  std::memcpy(m.transitions.data(), bytes.data() + wstart + m.state_weights.size() * sizeof(double),
              m.transitions.size() * sizeof(double));
  m.rebuild_index();
  return m;
}

void CrfModel::save(const std::string& path) const { write_file(path, serialize()); }

CrfModel CrfModel::load(const std::string& path) { return deserialize(read_file(path), path); }

// ---- evaluation ----

nlohmann::json EvalReport::to_json() const {
  auto row = [](const TypeScores& s) {
    return nlohmann::json{{"gold", s.gold},         {"predicted", s.predicted}, {"correct", s.correct},
                          {"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1}};
  };
  nlohmann::json j;
  j["micro"] = row(micro);
  j["per_type"] = nlohmann::json::object();
  for (const auto& [t, s] : per_type) j["per_type"][t] = row(s);
  return j;
}

EvalReport score_entities(const std::vector<std::vector<std::string>>& gold,
                          const std::vector<std::vector<std::string>>& predicted) {
  if (gold.size() != predicted.size()) fail(ErrorKind::invalid_argument, "gold and predicted sentence counts differ");
  EvalReport r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size()) fail(ErrorKind::invalid_argument, "sentence length mismatch");
    const auto g = bilou_decode(gold[i]);
    const auto p = bilou_decode(predicted[i]);
    const std::set<EntitySpan> gs(g.begin(), g.end());
    for (const auto& s : g) ++r.per_type[s.type].gold;
    for (const auto& s : p) {
      auto& row = r.per_type[s.type];
      ++row.predicted;
      if (gs.count(s)) ++row.correct;
    }
  }
  auto finish = [](TypeScores& s) {
    s.precision = s.predicted ? static_cast<double>(s.correct) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.gold ? static_cast<double>(s.correct) / static_cast<double>(s.gold) : 0.0;
    s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  };
  for (auto& [t, s] : r.per_type) {
    r.micro.gold += s.gold;
    r.micro.predicted += s.predicted;
    r.micro.correct += s.correct;
    finish(s);
  }
  finish(r.micro);
  return r;
}

std::vector<Prediction> tag(const CrfModel& model, const std::vector<std::vector<std::string>>& sentences,
                            const DomainId& domain, const EmbeddingProvider* provider, const TagOptions& options) {
  std::vector<Prediction> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(viterbi(model, compile(model, s, domain, provider), options.constrain));
  return out;
}

EvalReport evaluate(const CrfModel& model, const std::vector<LabeledSentence>& test, const EmbeddingProvider* provider,
                    const TagOptions& options) {
  std::vector<std::vector<std::string>> gold, pred;
  gold.reserve(test.size());
  pred.reserve(test.size());
  for (const auto& s : test) {
    const Prediction p = viterbi(model, compile(model, s.tokens, s.domain, provider), options.constrain);
    gold.push_back(s.labels);
    pred.push_back(repair_bilou(p.labels));
  }
  return score_entities(gold, pred);
}

std::uint64_t hash_sentences(const std::vector<LabeledSentence>& data) {
  std::uint64_t h = fnv1a("sentences");
  for (const auto& s : data) {
    h = fnv1a(s.domain.name, h);
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      h = fnv1a(s.tokens[i], h);
      h = fnv1a("\t", h);
      h = fnv1a(i < s.labels.size() ? s.labels[i] : "", h);
      h = fnv1a("\n", h);
    }
    h = fnv1a("\n", h);
  }
  return h;
}

}  // namespace dsner
