#include "dsner/synthbench.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "dsner/rng.hpp"

namespace dsner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& v) { return v[rng.below(v.size())]; }

std::size_t sentence_tokens(const std::vector<Sentence>& s) {
  std::size_t n = 0;
  for (const auto& x : s) n += x.size();
  return n;
}

std::string join_lines(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ' ';
      out += s[i];
    }
    out += '\n';
  }
  return out;
}

struct TwoDomainBuilder {
  const TwoDomainConfig& cfg;
  const TwoDomainTruth& t;
  Rng& rng;

  Sentence topic(int d) {
    const auto& cluster = d == 0 ? t.cluster_a : t.cluster_b;
    Sentence s;
    for (int i = 0; i < 8; ++i) s.push_back(pick(rng, cluster));
    return s;
  }

  Sentence pivot(int d, std::size_t p) {
    const auto& cluster = d == 0 ? t.cluster_a : t.cluster_b;
    const auto& assoc = d == 0 ? t.assoc_a[p] : t.assoc_b[p];
    Sentence s;
    for (const auto& a : assoc) s.push_back(a);
    for (int i = 0; i < 3; ++i) s.push_back(pick(rng, cluster));
    rng.shuffle(s);
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size() + 1)), t.pivots[p]);
    return s;
  }

  // Returns the sentence and the position of the ambiguous word.
  std::pair<Sentence, std::size_t> ambiguous(std::size_t j, std::size_t sense) {
    const auto& ctx = sense == 0 ? t.sense_contexts_x[j] : t.sense_contexts_y[j];
    Sentence s;
    for (int i = 0; i < 6; ++i) s.push_back(pick(rng, ctx));
    const std::size_t pos = 1 + rng.below(5);
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(pos), t.ambiguous[j]);
    return {s, pos};
  }

  Sentence filler() {
    Sentence s;
    for (int i = 0; i < 7; ++i) s.push_back(pick(rng, t.fillers));
    return s;
  }

  Sentence balance(const std::string& w) {
    Sentence s;
    for (int i = 0; i < 5; ++i) s.push_back(pick(rng, t.neutral));
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size() + 1)), w);
    return s;
  }
};

}  // namespace

json TwoDomainTruth::to_json() const {
  json j;
  j["config"] = {{"seed", config.seed},
                 {"tokens", config.tokens},
                 {"pivots", config.pivots},
                 {"cluster_size", config.cluster_size},
                 {"assoc_per_pivot", config.assoc_per_pivot},
                 {"fillers", config.fillers},
                 {"neutral", config.neutral},
                 {"sense_context_size", config.sense_context_size},
                 {"mixtures", config.mixtures},
                 {"heldout_per_word", config.heldout_per_word},
                 {"domain_a", config.domain_a},
                 {"domain_b", config.domain_b}};
  j["cluster_a"] = cluster_a;
  j["cluster_b"] = cluster_b;
  j["pivots"] = pivots;
  j["assoc_a"] = assoc_a;
  j["assoc_b"] = assoc_b;
  j["ambiguous"] = ambiguous;
  j["sense_contexts_x"] = sense_contexts_x;
  j["sense_contexts_y"] = sense_contexts_y;
  j["fillers"] = fillers;
  j["neutral"] = neutral;
  j["domain_tokens"] = domain_tokens;
  j["realized_mixtures"] = realized_mixtures;
  j["ambiguous_counts"] = ambiguous_counts;
  j["heldout"] = json::array();
  for (const auto& h : heldout)
    j["heldout"].push_back(
        {{"word", h.word}, {"sense", h.sense}, {"domain", h.domain}, {"tokens", h.tokens}, {"position", h.position}});
  j["phrases"] = json::array();
  for (const auto& p : phrases)
    j["phrases"].push_back({{"target", p.target}, {"contexts", p.contexts}, {"gold", p.gold}, {"balanced", p.balanced}});
  return j;
}

TwoDomainTruth TwoDomainTruth::from_json(const json& j) {
  try {
    TwoDomainTruth t;
    const auto& c = j.at("config");
    t.config.seed = c.at("seed");
    t.config.tokens = c.at("tokens");
    t.config.pivots = c.at("pivots");
    t.config.cluster_size = c.at("cluster_size");
    t.config.assoc_per_pivot = c.at("assoc_per_pivot");
    t.config.fillers = c.at("fillers");
    t.config.neutral = c.at("neutral");
    t.config.sense_context_size = c.at("sense_context_size");
    t.config.mixtures = c.at("mixtures").get<std::vector<std::pair<double, double>>>();
    t.config.heldout_per_word = c.at("heldout_per_word");
    t.config.domain_a = c.at("domain_a");
    t.config.domain_b = c.at("domain_b");
    j.at("cluster_a").get_to(t.cluster_a);
    j.at("cluster_b").get_to(t.cluster_b);
    j.at("pivots").get_to(t.pivots);
    j.at("assoc_a").get_to(t.assoc_a);
    j.at("assoc_b").get_to(t.assoc_b);
    j.at("ambiguous").get_to(t.ambiguous);
    j.at("sense_contexts_x").get_to(t.sense_contexts_x);
    j.at("sense_contexts_y").get_to(t.sense_contexts_y);
    j.at("fillers").get_to(t.fillers);
    j.at("neutral").get_to(t.neutral);
    j.at("domain_tokens").get_to(t.domain_tokens);
    j.at("realized_mixtures").get_to(t.realized_mixtures);
    j.at("ambiguous_counts").get_to(t.ambiguous_counts);
    for (const auto& h : j.at("heldout"))
      t.heldout.push_back({h.at("word"), h.at("sense"), h.at("domain"), h.at("tokens"), h.at("position")});
    for (const auto& p : j.at("phrases"))
      t.phrases.push_back({p.at("target"), p.at("contexts"), p.at("gold"), p.at("balanced")});
    return t;
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("truth.json: ") + e.what());
  }
}

TwoDomainCorpus gen_two_domain_corpus(const TwoDomainConfig& cfg) {
  if (cfg.pivots == 0 || cfg.cluster_size < 3 || cfg.fillers == 0 || cfg.neutral == 0 || cfg.assoc_per_pivot == 0 ||
      cfg.sense_context_size == 0 || cfg.tokens == 0)
    fail(ErrorKind::invalid_argument, "synthetic corpus config has an empty word group");
  if (cfg.domain_a == cfg.domain_b) fail(ErrorKind::invalid_argument, "domain names must differ");
  for (const auto& [a, b] : cfg.mixtures)
    if (!(a >= 0 && a <= 1 && b >= 0 && b <= 1)) fail(ErrorKind::invalid_argument, "mixture outside [0,1]");

  TwoDomainCorpus out;
  TwoDomainTruth& t = out.truth;
  t.config = cfg;
  t.cluster_a = numbered("sa", cfg.cluster_size);
  t.cluster_b = numbered("fb", cfg.cluster_size);
  t.pivots = numbered("pivot", cfg.pivots);
  for (std::size_t p = 0; p < cfg.pivots; ++p) {
    t.assoc_a.push_back(numbered("assoc" + std::to_string(p) + "a", cfg.assoc_per_pivot));
    t.assoc_b.push_back(numbered("assoc" + std::to_string(p) + "b", cfg.assoc_per_pivot));
  }
  for (std::size_t j = 0; j < cfg.mixtures.size(); ++j) {
    t.ambiguous.push_back("amb" + std::to_string(j));
    t.sense_contexts_x.push_back(numbered("amb" + std::to_string(j) + "x", cfg.sense_context_size));
    t.sense_contexts_y.push_back(numbered("amb" + std::to_string(j) + "y", cfg.sense_context_size));
  }
  t.fillers = numbered("filler", cfg.fillers);
  t.neutral = numbered("neutral", cfg.neutral);

  Rng rng(cfg.seed);
  TwoDomainBuilder b{cfg, t, rng};
  out.domains = {DomainId(cfg.domain_a), DomainId(cfg.domain_b)};
  out.sentences.resize(2);
  const std::size_t budget = cfg.tokens / 2;
  const std::size_t n_amb = cfg.mixtures.size();
  const std::vector<double> weights{0.2, 0.25, n_amb ? 0.3 : 0.0, 0.25};
  t.ambiguous_counts.assign(n_amb, {0, 0});
  std::vector<std::pair<double, double>> sense0(n_amb, {0, 0});
  std::map<std::string, std::uint64_t> assoc_count[2];

  for (int d = 0; d < 2; ++d) {
    auto& sents = out.sentences[d];
    std::size_t used = 0;
    while (used < budget) {
      Sentence s;
      switch (rng.categorical(weights)) {
        case 0:
          s = b.topic(d);
          break;
        case 1: {
          const std::size_t p = rng.below(cfg.pivots);
          s = b.pivot(d, p);
          for (const auto& a : (d == 0 ? t.assoc_a[p] : t.assoc_b[p])) ++assoc_count[d][a];
          break;
        }
        case 2: {
          const std::size_t j = rng.below(n_amb);
          const double mix = d == 0 ? cfg.mixtures[j].first : cfg.mixtures[j].second;
          const std::size_t sense = rng.uniform() < mix ? 0 : 1;
          s = b.ambiguous(j, sense).first;
          auto& cnt = d == 0 ? t.ambiguous_counts[j].first : t.ambiguous_counts[j].second;
          auto& s0 = d == 0 ? sense0[j].first : sense0[j].second;
          ++cnt;
          if (sense == 0) ++s0;
          break;
        }
        default:
          s = b.filler();
      }
      used += s.size();
      sents.push_back(std::move(s));
    }
  }

  // Associated words of one domain's pivots are repeated in the other domain
  // with neutral company so their unigram counts match across domains.
  for (int d = 0; d < 2; ++d) {
    const int other = 1 - d;
    for (const auto& [w, n] : assoc_count[d])
      for (std::uint64_t i = 0; i < n; ++i) out.sentences[other].push_back(b.balance(w));
  }
  for (int d = 0; d < 2; ++d) rng.shuffle(out.sentences[d]);

  for (std::size_t j = 0; j < n_amb; ++j) {
    const auto [ca, cb] = t.ambiguous_counts[j];
    t.realized_mixtures.push_back({ca ? sense0[j].first / static_cast<double>(ca) : 0.0,
                                   cb ? sense0[j].second / static_cast<double>(cb) : 0.0});
  }
  for (int d = 0; d < 2; ++d) t.domain_tokens.push_back(sentence_tokens(out.sentences[d]));

  // Held-out occurrences with known senses, balanced across senses and domains.
  for (std::size_t j = 0; j < n_amb; ++j)
    for (std::size_t i = 0; i < cfg.heldout_per_word; ++i) {
      const std::size_t sense = i % 2;
      const int d = static_cast<int>((i / 2) % 2);
      auto [s, pos] = b.ambiguous(j, sense);
      t.heldout.push_back({t.ambiguous[j], sense, out.domains[d].name, std::move(s), pos});
    }

  // Disambiguation phrases: one distinctive and one balanced query per pivot and domain.
  for (std::size_t p = 0; p < cfg.pivots; ++p)
    for (int d = 0; d < 2; ++d) {
      const auto& cluster = d == 0 ? t.cluster_a : t.cluster_b;
      std::vector<std::string> ctx{cluster[(2 * p) % cluster.size()], cluster[(2 * p + 1) % cluster.size()]};
      t.phrases.push_back({t.pivots[p], ctx, out.domains[d].name, false});
      t.phrases.push_back({t.pivots[p], d == 0 ? t.assoc_a[p] : t.assoc_b[p], out.domains[d].name, true});
    }
  return out;
}

void write_two_domain_corpus(const TwoDomainCorpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  CorpusManifest manifest;
  for (std::size_t d = 0; d < corpus.domains.size(); ++d) {
    const std::string file = corpus.domains[d].name + ".txt";
    write_file((fs::path(dir) / file).string(), join_lines(corpus.sentences[d]));
    manifest.entries.push_back({corpus.domains[d], file});
  }
  save_manifest(manifest, (fs::path(dir) / "manifest.tsv").string());
  write_file((fs::path(dir) / "truth.json").string(), corpus.truth.to_json().dump(1) + "\n");
}

// ---- NER benchmark ----

namespace {

struct Slot {
  bool is_slot = false;
  std::string text;  // literal token or type ("PER", "ORG", "LOC", "ANY", "NUM", "DAY")
};

using Template = std::vector<Slot>;

Template parse_template(const std::string& s) {
  Template t;
  for (const auto& tok : split_ws(s)) {
    if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}')
      t.push_back({true, tok.substr(1, tok.size() - 2)});
    else
      t.push_back({false, tok});
  }
  return t;
}

std::vector<Template> parse_templates(const std::vector<std::string>& lines) {
  std::vector<Template> out;
  for (const auto& l : lines) out.push_back(parse_template(l));
  return out;
}

// Contexts that appear in both domains.
const std::vector<std::string> kSharedTemplates = {
    "{PER} said on {DAY} that {ORG} will open an office in {LOC} .",
    "{ORG} , based in {LOC} , hired {PER} last year .",
    "{PER} of {ORG} spoke to reporters in {LOC} .",
    "officials in {LOC} met {PER} on {DAY} .",
    "{PER} joined {ORG} in {LOC} .",
    "a spokesman for {ORG} declined to comment .",
};
// Contexts that say nothing about the entity type.
const std::vector<std::string> kOpaqueTemplates = {
    "{ANY} declined to comment .",
    "{ANY} was mentioned in the report on {DAY} .",
    "the report named {ANY} and {ANY} .",
    "{ANY} made headlines again .",
};
const std::vector<std::string> kSourceTemplates = {
    "{PER} won the {LOC} open on {DAY} .",
    "police in {LOC} arrested {PER} on {DAY} .",
    "{PER} visited {LOC} with {PER} .",
    "fans of {ORG} celebrated in {LOC} .",
    "{PER} scored twice as {ORG} beat {ORG} .",
    "the mayor of {LOC} thanked {PER} .",
};
const std::vector<std::string> kTargetTemplates = {
    "shares of {ORG} rose {NUM} percent .",
    "{ORG} upgraded {ORG} to buy .",
    "{PER} , chief executive of {ORG} , sold {NUM} shares .",
    "{ORG} reported earnings above estimates in {LOC} .",
    "analysts expect {ORG} to outperform {ORG} .",
    "{ORG} listed its bonds in {LOC} .",
    "investor {PER} raised a stake in {ORG} .",
    "traders in {LOC} sold {ORG} stock .",
};

// Unlabeled contexts that reveal the type.
const std::map<std::string, std::vector<std::string>> kNewsContexts = {
    {"PER", {"coach {N} praised the team", "{N} scored in the final", "mr {N} said he was happy", "the striker {N} signed"}},
    {"ORG", {"the club {N} signed a striker", "{N} sponsors the league", "{N} fans travelled far", "supporters of {N} sang"}},
    {"LOC", {"the match in {N} was sold out", "fans travelled to {N}", "the stadium in {N} reopened", "{N} hosted the cup"}},
};
const std::map<std::string, std::vector<std::string>> kFinanceContexts = {
    {"PER", {"ceo {N} resigned", "investor {N} bought shares", "mr {N} said he was confident", "chairman {N} retired"}},
    {"ORG", {"{N} stock fell sharply", "{N} quarterly earnings beat", "shares in {N} climbed", "the bank {N} raised rates"}},
    {"LOC", {"markets in {N} closed higher", "the exchange in {N} opened", "bond yields in {N} rose", "{N} trading was thin"}},
};

const std::vector<std::string> kDays = {"monday", "tuesday", "wednesday", "thursday", "friday"};
const std::vector<std::string> kOrgSuffix = {"Group", "Holdings", "Corp", "Partners"};
const std::vector<std::string> kSyllables = {"ka", "lo", "mi", "ra", "ven", "tor", "sel", "dar", "bri", "no",
                                              "zu", "fen", "gal", "mar", "qui", "ros", "tan", "vel", "xo", "yel",
                                              "pen", "dro", "sha", "ith", "um", "bex", "cor", "las", "wen", "ost"};

std::string pseudo_name(Rng& rng) {
  std::string s;
  const std::size_t n = 2 + rng.below(2);
  for (std::size_t i = 0; i < n; ++i) s += kSyllables[rng.below(kSyllables.size())];
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Name pools per type, split into shared, source-only, target (train and test)
// and target-test-only parts.
struct Lexicon {
  std::map<std::string, std::vector<std::string>> shared, source_only, target, test_only;
  std::vector<std::string> first_names;
  std::vector<std::string> crossover;  // persons in the source domain, organizations in the target domain

  std::vector<std::string> names(const std::string& type, bool target_side, bool test) const {
    std::vector<std::string> out = shared.at(type);
    const auto& own = target_side ? target.at(type) : source_only.at(type);
    out.insert(out.end(), own.begin(), own.end());
    if (target_side && test) out.insert(out.end(), test_only.at(type).begin(), test_only.at(type).end());
    return out;
  }
};

Lexicon make_lexicon(Rng& rng) {
  std::set<std::string> used;
  auto fresh = [&] {
    for (;;) {
      std::string n = pseudo_name(rng);
      if (used.insert(n).second) return n;
    }
  };
  Lexicon lex;
  const std::map<std::string, std::size_t> per_part = {{"PER", 12}, {"ORG", 12}, {"LOC", 8}};
  for (const auto& [type, n] : per_part)
    for (auto* part : {&lex.shared, &lex.source_only, &lex.target, &lex.test_only})
      for (std::size_t i = 0; i < n; ++i) (*part)[type].push_back(fresh());
  for (int i = 0; i < 12; ++i) lex.first_names.push_back(fresh());
  for (int i = 0; i < 6; ++i) lex.crossover.push_back(fresh());
  return lex;
}

struct NerBuilder {
  const Lexicon& lex;
  Rng& rng;
  bool target;
  bool test;
  DomainId domain;

  std::vector<std::string> mention(const std::string& type) {
    if (!lex.crossover.empty() && rng.uniform() < 0.1 && type == (target ? "ORG" : "PER"))
      return {lex.crossover[rng.below(lex.crossover.size())]};
    const auto pool = lex.names(type, target, test);
    std::vector<std::string> m{pool[rng.below(pool.size())]};
    if (type == "PER" && rng.uniform() < 0.3) m.insert(m.begin(), lex.first_names[rng.below(lex.first_names.size())]);
    if (type == "ORG" && rng.uniform() < 0.25) m.push_back(kOrgSuffix[rng.below(kOrgSuffix.size())]);
    return m;
  }

  LabeledSentence fill(const Template& t) {
    static const std::vector<std::string> kTypes = {"PER", "ORG", "LOC"};
    LabeledSentence s;
    s.domain = domain;
    std::vector<EntitySpan> spans;
    for (const auto& slot : t) {
      if (!slot.is_slot) {
        s.tokens.push_back(slot.text);
      } else if (slot.text == "DAY") {
        s.tokens.push_back(kDays[rng.below(kDays.size())]);
      } else if (slot.text == "NUM") {
        s.tokens.push_back(std::to_string(1 + rng.below(99)));
      } else {
        const std::string type = slot.text == "ANY" ? kTypes[rng.below(kTypes.size())] : slot.text;
        const auto m = mention(type);
        spans.push_back({s.tokens.size(), s.tokens.size() + m.size(), type});
        s.tokens.insert(s.tokens.end(), m.begin(), m.end());
      }
    }
    s.labels = bilou_encode(spans, s.tokens.size());
    if (!is_valid_bilou(s.labels)) fail(ErrorKind::state, "generated an invalid BILOU sequence");
    return s;
  }
};

std::vector<LabeledSentence> gen_labeled(NerBuilder& b, std::size_t n, const std::vector<std::pair<double, const std::vector<Template>*>>& mix) {
  std::vector<double> w;
  for (const auto& m : mix) w.push_back(m.first);
  std::vector<LabeledSentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& group = *mix[b.rng.categorical(w)].second;
    out.push_back(b.fill(group[b.rng.below(group.size())]));
  }
  return out;
}

std::vector<Sentence> gen_unlabeled(Rng& rng, const Lexicon& lex, bool target, std::size_t n) {
  const auto& ctx = target ? kFinanceContexts : kNewsContexts;
  // Every name this domain knows, tagged with its type.
  std::vector<std::pair<std::string, std::string>> names;
  for (const std::string type : {"PER", "ORG", "LOC"}) {
    for (const auto& nm : lex.shared.at(type)) names.push_back({nm, type});
    for (const auto& nm : (target ? lex.target : lex.source_only).at(type)) names.push_back({nm, type});
    if (target)
      for (const auto& nm : lex.test_only.at(type)) names.push_back({nm, type});
  }
  for (const auto& nm : lex.crossover) names.push_back({nm, target ? "ORG" : "PER"});
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [name, type] = names[rng.below(names.size())];
    const auto& options = ctx.at(type);
    Sentence s;
    for (const auto& tok : split_ws(options[rng.below(options.size())])) s.push_back(tok == "{N}" ? name : tok);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

NerDataset gen_ner_dataset(const NerDatasetConfig& cfg) {
  if (cfg.source == 0) fail(ErrorKind::invalid_argument, "source set must be non-empty");
  if (cfg.source_domain == cfg.target_domain) fail(ErrorKind::invalid_argument, "domain names must differ");
  Rng rng(cfg.seed);
  const Lexicon lex = make_lexicon(rng);
  const auto shared = parse_templates(kSharedTemplates);
  const auto opaque = parse_templates(kOpaqueTemplates);
  const auto source_t = parse_templates(kSourceTemplates);
  const auto target_t = parse_templates(kTargetTemplates);

  NerDataset data;
  data.config = cfg;
  const DomainId src(cfg.source_domain), tgt(cfg.target_domain);
  NerBuilder sb{lex, rng, false, false, src};
  data.source = gen_labeled(sb, cfg.source, {{0.45, &shared}, {0.15, &opaque}, {0.4, &source_t}});
  NerBuilder tb{lex, rng, true, false, tgt};
  data.target_train = gen_labeled(tb, cfg.target_train, {{0.55, &shared}, {0.15, &opaque}, {0.3, &target_t}});
  NerBuilder eb{lex, rng, true, true, tgt};
  data.target_test = gen_labeled(eb, cfg.target_test, {{0.3, &shared}, {0.2, &opaque}, {0.5, &target_t}});

  data.unlabeled_domains = {src, tgt};
  data.unlabeled.push_back(gen_unlabeled(rng, lex, false, cfg.unlabeled));
  data.unlabeled.push_back(gen_unlabeled(rng, lex, true, cfg.unlabeled));

  json lexicon;
  for (const auto& [part, m] : {std::pair<std::string, const std::map<std::string, std::vector<std::string>>*>{"shared", &lex.shared},
                                {"source_only", &lex.source_only},
                                {"target", &lex.target},
                                {"test_only", &lex.test_only}})
    lexicon[part] = *m;
  lexicon["first_names"] = lex.first_names;
  lexicon["crossover"] = lex.crossover;
  data.truth = {{"config",
                 {{"seed", cfg.seed},
                  {"source", cfg.source},
                  {"target_train", cfg.target_train},
                  {"target_test", cfg.target_test},
                  {"unlabeled", cfg.unlabeled},
                  {"source_domain", cfg.source_domain},
                  {"target_domain", cfg.target_domain}}},
                {"lexicon", lexicon},
                {"entity_types", {"LOC", "ORG", "PER"}}};
  return data;
}

void write_ner_dataset(const NerDataset& data, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "unlabeled");
  write_labeled((root / "source.conll").string(), data.source);
  write_labeled((root / "target_train.conll").string(), data.target_train);
  write_labeled((root / "target_test.conll").string(), data.target_test);
  CorpusManifest manifest;
  for (std::size_t d = 0; d < data.unlabeled_domains.size(); ++d) {
    const std::string file = data.unlabeled_domains[d].name + ".txt";
    write_file((root / "unlabeled" / file).string(), join_lines(data.unlabeled[d]));
    manifest.entries.push_back({data.unlabeled_domains[d], file});
  }
  save_manifest(manifest, (root / "unlabeled" / "manifest.tsv").string());
  write_file((root / "truth.json").string(), data.truth.dump(1) + "\n");
}

}  // namespace dsner
