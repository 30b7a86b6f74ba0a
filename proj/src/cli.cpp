#include "dsner/cli.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "dsner/adapt.hpp"
#include "dsner/crf.hpp"
#include "dsner/disambig.hpp"
#include "dsner/divergence.hpp"
#include "dsner/domaindist.hpp"
#include "dsner/domainsense.hpp"
#include "dsner/features.hpp"
#include "dsner/service.hpp"
#include "dsner/synthbench.hpp"
#include "json.hpp"

namespace dsner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out;
  bool json = false;
};

void add_common(CLI::App* app, Common& c, const std::string& out_help, const std::string& out_default = "") {
  c.out = out_default;
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
  app->add_option("--threads", c.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  auto* o = app->add_option("--out", c.out, out_help);
  if (!out_default.empty()) o->capture_default_str();
  app->add_flag("--json", c.json, "print the JSON result instead of the text summary");
}

void emit(const Common& c, std::ostream& out, const json& j, const std::string& text) {
  if (c.json)
    out << j.dump(2) << "\n";
  else
    out << text;
}

std::string need_out(const Common& c, const std::string& what) {
  if (c.out.empty()) fail(ErrorKind::invalid_argument, "--out is required for " + what);
  return c.out;
}

TagScheme parse_scheme(const std::string& s) {
  if (s == "bilou") return TagScheme::bilou;
  if (s == "iob2") return TagScheme::iob2;
  fail(ErrorKind::invalid_argument, "unknown tag scheme: " + s);
}

std::vector<LabeledSentence> load_labeled(const std::string& path, const std::string& domain, const std::string& scheme,
                                          std::ostream* warn = nullptr) {
  auto data = read_labeled(path, DomainId(domain), parse_scheme(scheme));
  if (warn && data.repaired_sentences)
    *warn << "note: " << data.repaired_sentences << " sentence(s) in " << path << " had invalid tag sequences and were repaired\n";
  return std::move(data.sentences);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---- features and embedding providers ----

struct FeatureOpts {
  std::string families = "unigrams,bigrams,shape,affixes,numpunct,bias";
  std::string embeddings = "none";
  std::string embedding_path;
};

void add_feature_opts(CLI::App* app, FeatureOpts& f) {
  app->add_option("--features", f.families, "comma list of unigrams,bigrams,shape,affixes,numpunct,bias")
      ->capture_default_str();
  app->add_option("--embeddings", f.embeddings, "embedding features: none|domaindist|domainsense|file")
      ->capture_default_str();
  app->add_option("--embedding-path", f.embedding_path, "embedding export directory (or vector file for 'file')");
}

FeatureTemplateSet make_templates(const FeatureOpts& f) {
  FeatureTemplateSet t;
  t.unigrams = t.bigrams = t.shape = t.affixes = t.numpunct = t.bias = false;
  for (const auto& name : split_list(f.families)) {
    if (name == "unigrams") t.unigrams = true;
    else if (name == "bigrams") t.bigrams = true;
    else if (name == "shape") t.shape = true;
    else if (name == "affixes") t.affixes = true;
    else if (name == "numpunct") t.numpunct = true;
    else if (name == "bias") t.bias = true;
    else fail(ErrorKind::invalid_argument, "unknown feature family: " + name);
  }
  t.provider = parse_embedding_source(f.embeddings);
  t.embeddings = t.provider != EmbeddingSource::none;
  t.validate();
  return t;
}

std::unique_ptr<EmbeddingProvider> load_provider(EmbeddingSource src, const std::string& path) {
  if (src == EmbeddingSource::none) return nullptr;
  if (path.empty()) fail(ErrorKind::invalid_argument, "--embedding-path is required for " + to_string(src) + " embeddings");
  switch (src) {
    case EmbeddingSource::domaindist:
      return std::make_unique<DomainDistProvider>(std::make_shared<const DomainEmbeddingSet>(DomainEmbeddingSet::import_dir(path)));
    case EmbeddingSource::domainsense:
      return std::make_unique<DomainSenseProvider>(std::make_shared<const SenseModel>(SenseModel::import_dir(path)));
    case EmbeddingSource::file:
      return std::make_unique<FileEmbeddingProvider>(path);
    default:
      return nullptr;
  }
}

std::unique_ptr<EmbeddingProvider> provider_for_model(const CrfModel& m, const std::string& path) {
  auto p = load_provider(m.templates.embeddings ? m.templates.provider : EmbeddingSource::none, path);
  if (p) {
    const auto want = m.metadata.value("embedding_dim", std::size_t{0});
    if (want && want != p->dim())
      fail(ErrorKind::invalid_argument, "embedding dimension " + std::to_string(p->dim()) + " does not match the model's " +
                                            std::to_string(want));
  }
  return p;
}

struct CrfOpts {
  double l2 = 1.0;
  std::size_t max_iter = 200;
  double tol = 1e-5;
  bool constrain = false;
};

void add_crf_opts(CLI::App* app, CrfOpts& c) {
  app->add_option("--l2", c.l2, "L2 regularization strength")->capture_default_str();
  app->add_option("--max-iter", c.max_iter, "L-BFGS iteration limit")->capture_default_str();
  app->add_option("--tol", c.tol, "gradient-norm tolerance")->capture_default_str();
  app->add_flag("--constrain", c.constrain, "mask BILOU-invalid transitions when decoding");
}

CrfTrainOptions crf_options(const CrfOpts& c, std::size_t threads) {
  CrfTrainOptions o;
  o.l2 = c.l2;
  o.max_iter = c.max_iter;
  o.tol = c.tol;
  o.threads = threads;
  return o;
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "type\tP\tR\tF1\tgold\tpred\n";
  for (const auto& [type, s] : r.per_type)
    os << type << "\t" << s.precision << "\t" << s.recall << "\t" << s.f1 << "\t" << s.gold << "\t" << s.predicted << "\n";
  os << "micro\t" << r.micro.precision << "\t" << r.micro.recall << "\t" << r.micro.f1 << "\t" << r.micro.gold << "\t"
     << r.micro.predicted << "\n";
  return os.str();
}

// ---- active-learning run configuration (shared by `active run` and `serve`) ----

struct ActiveOpts {
  std::string source, source_domain = "source";
  std::string pool, eval, target_domain = "target";
  std::string scheme = "bilou";
  std::size_t budget = 200, k = 50;
  std::string strategy = "least_confidence";
  bool normalized = false, warm_start = false;
};

void add_active_opts(CLI::App* app, ActiveOpts& a, bool required) {
  auto* s = app->add_option("--source", a.source, "labeled source-domain training file");
  auto* p = app->add_option("--pool", a.pool, "target-domain pool file (gold labels, if present, drive the simulated oracle)");
  auto* e = app->add_option("--eval", a.eval, "labeled target-domain evaluation file");
  if (required) {
    s->required();
    p->required();
    e->required();
  }
  app->add_option("--source-domain", a.source_domain, "domain of the source file")->capture_default_str();
  app->add_option("--target-domain", a.target_domain, "domain of the pool and evaluation files")->capture_default_str();
  app->add_option("--scheme", a.scheme, "tag scheme of the labeled files: bilou|iob2")->capture_default_str();
  app->add_option("--budget,-B", a.budget, "total sentences to acquire")->capture_default_str();
  app->add_option("--k", a.k, "sentences per round")->capture_default_str();
  app->add_option("--strategy", a.strategy, "least_confidence|random")->capture_default_str();
  app->add_flag("--normalized", a.normalized, "length-normalized confidence");
  app->add_flag("--warm-start", a.warm_start, "initialize each retrain from the previous model");
}

json active_run_config(const ActiveOpts& a, const FeatureOpts& f, const CrfOpts& c, const Common& common) {
  auto abs = [](const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); };
  return {{"source", abs(a.source)},
          {"source_domain", a.source_domain},
          {"pool", abs(a.pool)},
          {"eval", abs(a.eval)},
          {"target_domain", a.target_domain},
          {"scheme", a.scheme},
          {"budget", a.budget},
          {"k", a.k},
          {"strategy", a.strategy},
          {"length_normalized", a.normalized},
          {"warm_start", a.warm_start},
          {"features", f.families},
          {"embeddings", f.embeddings},
          {"embedding_path", abs(f.embedding_path)},
          {"l2", c.l2},
          {"max_iter", c.max_iter},
          {"tol", c.tol},
          {"constrain", c.constrain},
          {"seed", common.seed},
          {"threads", common.threads}};
}

struct ActiveSetup {
  ActiveConfig config;
  std::vector<PoolItem> pool;
  std::unique_ptr<EmbeddingProvider> provider;
};

ActiveSetup load_active_setup(const json& rc, bool keep_gold, std::ostream& err) {
  try {
    ActiveSetup s;
    const std::string pool = rc.at("pool"), eval = rc.at("eval");
    if (fs::equivalent(pool, eval)) fail(ErrorKind::invalid_argument, "the pool and the evaluation set must be different files");
    FeatureOpts f{rc.at("features"), rc.at("embeddings"), rc.at("embedding_path")};
    s.config.templates = make_templates(f);
    s.provider = load_provider(s.config.templates.provider, f.embedding_path);
    s.config.provider = s.provider.get();
    s.config.source = load_labeled(rc.at("source"), rc.at("source_domain"), rc.at("scheme"), &err);
    s.config.eval = load_labeled(eval, rc.at("target_domain"), rc.at("scheme"), &err);
    s.pool = make_pool(load_labeled(pool, rc.at("target_domain"), rc.at("scheme"), &err), keep_gold);
    s.config.budget = rc.at("budget");
    s.config.k = rc.at("k");
    s.config.strategy = parse_selection_strategy(rc.at("strategy"));
    s.config.length_normalized = rc.at("length_normalized");
    s.config.warm_start = rc.at("warm_start");
    s.config.seed = rc.at("seed");
    s.config.crf.l2 = rc.at("l2");
    s.config.crf.max_iter = rc.at("max_iter");
    s.config.crf.tol = rc.at("tol");
    s.config.crf.threads = rc.at("threads");
    s.config.tag.constrain = rc.at("constrain");
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("run config: ") + e.what());
  }
}

// ---- commands ----

struct Cli {
  std::ostream& out;
  std::ostream& err;

  int vocab_build(const Common& c, const std::string& manifest, std::uint64_t min_count) {
    const std::string path = c.out.empty() ? "vocab.txt" : c.out;
    const auto v = build_vocab(load_manifest(manifest), min_count);
    v.save(path);
    json j{{"vocab_size", v.size()}, {"min_count", min_count}, {"total_tokens", v.total_count()}, {"hash", v.hash()}, {"path", path}};
    emit(c, out, j, "vocabulary: " + std::to_string(v.size()) + " words (min count " + std::to_string(min_count) + ") -> " + path + "\n");
    return 0;
  }

  int embed_domaindist(const Common& c, const std::string& manifest_path, const std::string& vocab_path,
                       const DomainDistHyper& h0) {
    const std::string dir = need_out(c, "embed domaindist");
    const auto manifest = load_manifest(manifest_path);
    const Vocabulary vocab = vocab_path.empty() ? build_vocab(manifest, h0.min_count) : Vocabulary::load(vocab_path);
    DomainDistHyper h = h0;
    h.seed = c.seed;
    auto corpora = encode_corpus(manifest, vocab);
    auto set = DomainEmbeddingSet::init(vocab, manifest.domains(), h);
    DomainDistTrainOptions o;
    o.epochs = h.epochs;
    o.seed = c.seed;
    o.subsample = h.subsample;
    o.on_epoch = [&](std::size_t e, double loss) {
      if (!c.json) out << "epoch " << e << " loss " << loss << "\n" << std::flush;
    };
    const auto rep = train_domaindist(set, corpora, o);
    set.export_dir(dir);
    UnigramTables::build(vocab, corpora).save((fs::path(dir) / "unigrams.tsv").string(), vocab);
    std::vector<std::string> domains;
    for (const auto& d : set.domains()) domains.push_back(d.name);
    json j{{"out", dir}, {"vocab_size", vocab.size()}, {"domains", domains}, {"epochs", rep.epochs_run},
           {"epoch_loss", rep.epoch_loss}, {"tokens_processed", rep.tokens_processed}};
    emit(c, out, j, "wrote " + dir + " (" + std::to_string(vocab.size()) + " words, " + std::to_string(domains.size()) + " domains)\n");
    return 0;
  }

  int embed_domainsense(const Common& c, const std::string& manifest_path, const std::string& vocab_path,
                        const SenseHyper& h0) {
    const std::string dir = need_out(c, "embed domainsense");
    const auto manifest = load_manifest(manifest_path);
    const Vocabulary vocab = vocab_path.empty() ? build_vocab(manifest, h0.min_count) : Vocabulary::load(vocab_path);
    SenseHyper h = h0;
    h.seed = c.seed;
    auto corpora = encode_corpus(manifest, vocab);
    auto model = SenseModel::init(vocab, h);
    const auto rep = train_adagram(model, corpora, [&](std::size_t e, double loss) {
      if (!c.json) out << "epoch " << e << " loss " << loss << "\n" << std::flush;
    });
    model.export_dir(dir);
    json j{{"out", dir}, {"vocab_size", vocab.size()}, {"epochs", rep.epochs_run}, {"epoch_loss", rep.epoch_loss},
           {"mean_active_senses", rep.mean_active_senses}};
    emit(c, out, j, "wrote " + dir + " (" + std::to_string(vocab.size()) + " words, mean active senses " +
                        std::to_string(rep.mean_active_senses.empty() ? 0.0 : rep.mean_active_senses.back()) + ")\n");
    return 0;
  }

  int jsd_cmd(const Common& c, const std::string& senses_dir, const std::string& manifest_path, std::string da,
              std::string db, std::uint64_t min_count, bool soft, bool bits, std::size_t top) {
    const auto model = SenseModel::import_dir(senses_dir);
    const auto manifest = load_manifest(manifest_path);
    const auto corpora = encode_corpus(manifest, model.vocab());
    if (corpora.size() < 2) fail(ErrorKind::invalid_argument, "jsd report needs a manifest with at least two domains");
    if (da.empty()) da = corpora[0].domain.name;
    if (db.empty()) db = corpora[1].domain.name;
    auto find = [&](const std::string& name) -> const DomainCorpus& {
      for (const auto& dc : corpora)
        if (dc.domain.name == name) return dc;
      fail(ErrorKind::unknown_domain, "domain not in manifest: " + name);
    };
    JsdReportOptions o;
    o.min_report_count = min_count;
    o.mode = soft ? SenseAssignment::soft : SenseAssignment::hard;
    const auto rows = jsd_report(model, find(da), find(db), o);
    const std::string jsonl = jsd_report_jsonl(rows, bits);
    if (!c.out.empty()) write_file(c.out, jsonl);
    if (c.json) {
      out << jsonl;
      return 0;
    }
    std::ostringstream os;
    os << rows.size() << " words with count >= " << min_count << " in both " << da << " and " << db << "\n";
    os << "rank\tword\tjsd\tstddev\tn_a\tn_b\n";
    for (std::size_t i = 0; i < rows.size() && i < top; ++i)
      os << i + 1 << "\t" << rows[i].word << "\t" << rows[i].jsd * (bits ? 1.0 / std::log(2.0) : 1.0) << "\t"
         << rows[i].stddev * (bits ? 1.0 / std::log(2.0) : 1.0) << "\t" << rows[i].n_a << "\t" << rows[i].n_b << "\n";
    out << os.str();
    return 0;
  }

  int disambig_cmd(const Common& c, const std::string& emb_dir, std::string unigram_path, const std::string& manifest,
                   const std::string& method, const std::string& word, const std::string& context,
                   const std::string& prior, const std::string& testset) {
    const auto set = DomainEmbeddingSet::import_dir(emb_dir);
    if (unigram_path.empty() && manifest.empty()) unigram_path = (fs::path(emb_dir) / "unigrams.tsv").string();
    const UnigramTables tables = manifest.empty()
                                     ? UnigramTables::load(unigram_path, set.vocab())
                                     : UnigramTables::build(set.vocab(), encode_corpus(load_manifest(manifest), set.vocab()));
    if (!testset.empty()) {
      std::vector<LabeledUsage> items;
      std::istringstream in(read_file(testset));
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        UsageQuery q;
        q.target = j.at("word");
        q.contexts = j.at("context").is_array() ? j.at("context").get<std::vector<std::string>>() : split_ws(j.at("context").get<std::string>());
        items.push_back({q, DomainId(j.at("gold").get<std::string>())});
      }
      const auto ev = eval_disambig(items, {DisambigMethod::ddpp, DisambigMethod::unigram, DisambigMethod::dm, DisambigMethod::cvm},
                                    set, tables);
      const json j = ev.to_json(items);
      if (!c.out.empty()) write_file(c.out, j.dump(2) + "\n");
      std::ostringstream os;
      os << items.size() << " labeled usages\n";
      for (std::size_t m = 0; m < ev.methods.size(); ++m) os << method_name(ev.methods[m]) << "\taccuracy " << ev.accuracy[m] << "\n";
      emit(c, out, j, os.str());
      return 0;
    }
    if (word.empty()) fail(ErrorKind::invalid_argument, "--word (or --testset) is required");
    UsageQuery q;
    q.target = word;
    q.contexts = split_ws(context);
    if (prior == "corpus_size") q.prior = PriorMode::corpus_size;
    else if (prior != "uniform") fail(ErrorKind::invalid_argument, "unknown prior: " + prior);
    const auto m = parse_disambig_method(method);
    json j;
    std::string argmax;
    if (m == DisambigMethod::ddpp || m == DisambigMethod::unigram) {
      const auto p = m == DisambigMethod::ddpp ? posterior_domains(q, set, tables) : baseline_unigram(q, set.vocab(), tables);
      j = p.to_json();
      argmax = p.argmax_domain().name;
    } else {
      const auto s = m == DisambigMethod::dm ? baseline_dm(q, set) : baseline_cvm(q, set);
      j = s.to_json();
      argmax = s.argmax_domain().name;
    }
    j["method"] = method_name(m);
    j["word"] = word;
    j["context"] = q.contexts;
    if (!c.out.empty()) write_file(c.out, j.dump(2) + "\n");
    std::ostringstream os;
    os << method_name(m) << ": " << word << " -> " << argmax << "\n";
    for (const auto& d : j.at("domains")) os << "  " << d.dump() << "\n";
    emit(c, out, j, os.str());
    return 0;
  }

  int ner_train(const Common& c, const std::vector<std::string>& train, std::vector<std::string> domains,
                const std::string& scheme, const FeatureOpts& f, const CrfOpts& co, const std::string& types) {
    const std::string path = c.out.empty() ? "model.crf" : c.out;
    if (domains.empty()) domains = {"default"};
    if (domains.size() != 1 && domains.size() != train.size())
      fail(ErrorKind::invalid_argument, "give one --domain, or one per --train file");
    std::vector<LabeledSentence> data;
    for (std::size_t i = 0; i < train.size(); ++i) {
      auto part = load_labeled(train[i], domains.size() == 1 ? domains[0] : domains[i], scheme, &err);
      data.insert(data.end(), part.begin(), part.end());
    }
    const auto templates = make_templates(f);
    const auto provider = load_provider(templates.provider, f.embedding_path);
    auto opts = crf_options(co, c.threads);
    if (!types.empty()) opts.entity_types = split_list(types);
    opts.on_iter = [&](std::size_t it, double v) {
      if (!c.json && (it % 10 == 0 || it == 1)) out << "iter " << it << " objective " << v << "\n" << std::flush;
    };
    CrfTrainStats stats;
    const auto model = train_crf(data, templates, provider.get(), opts, &stats);
    model.save(path);
    json j{{"model", path}, {"sentences", data.size()}, {"features", model.num_features()}, {"labels", model.labels.labels()},
           {"iterations", stats.iterations}, {"objective", stats.objective}, {"stop_reason", stats.stop_reason}};
    emit(c, out, j, "trained on " + std::to_string(data.size()) + " sentences, " + std::to_string(model.num_features()) +
                        " features, " + std::to_string(stats.iterations) + " iterations (" + stats.stop_reason + ") -> " + path + "\n");
    return 0;
  }

  int ner_eval(const Common& c, const std::string& model_path, const std::string& test, const std::string& domain,
               const std::string& scheme, const std::string& emb_path, bool constrain) {
    const auto model = CrfModel::load(model_path);
    const auto provider = provider_for_model(model, emb_path);
    const auto data = load_labeled(test, domain, scheme, &err);
    TagOptions to;
    to.constrain = constrain;
    const auto rep = evaluate(model, data, provider.get(), to);
    const json j = rep.to_json();
    if (!c.out.empty()) write_file(c.out, j.dump(2) + "\n");
    emit(c, out, j, report_text(rep));
    return 0;
  }

  int ner_tag(const Common& c, const std::string& model_path, const std::string& input, const std::string& domain,
              const std::string& emb_path, bool constrain, bool normalized) {
    const auto model = CrfModel::load(model_path);
    const auto provider = provider_for_model(model, emb_path);
    const auto sentences = read_sentences(input);
    TagOptions to;
    to.constrain = constrain;
    const auto preds = tag(model, sentences, DomainId(domain), provider.get(), to);
    std::string jsonl, text;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto labels = repair_bilou(preds[i].labels);
      const auto in = compile(model, sentences[i], DomainId(domain), provider.get());
      const double conf = normalized ? sequence_confidence(model, in, true) : preds[i].confidence;
      json row{{"tokens", sentences[i]}, {"labels", labels}, {"confidence", conf}};
      row["entities"] = json::array();
      for (const auto& sp : bilou_decode(labels)) {
        std::string surface;
        for (std::size_t t = sp.start; t < sp.end; ++t) surface += (t > sp.start ? " " : "") + sentences[i][t];
        row["entities"].push_back({{"start", sp.start}, {"end", sp.end}, {"type", sp.type}, {"text", surface}});
      }
      jsonl += row.dump() + "\n";
      for (std::size_t t = 0; t < labels.size(); ++t) text += sentences[i][t] + "/" + labels[t] + (t + 1 < labels.size() ? " " : "\n");
    }
    if (!c.out.empty()) write_file(c.out, jsonl);
    out << (c.json ? jsonl : text);
    return 0;
  }

  AdaptConfig adapt_config(const Common& c, const std::string& source, const std::string& sdom, const std::string& ttrain,
                           const std::string& ttest, const std::string& tdom, const std::string& scheme,
                           const FeatureOpts& f, const CrfOpts& co, std::unique_ptr<EmbeddingProvider>& holder) {
    AdaptConfig cfg;
    if (!source.empty()) cfg.source = load_labeled(source, sdom, scheme, &err);
    if (!ttrain.empty()) cfg.target_train = load_labeled(ttrain, tdom, scheme, &err);
    cfg.target_test = load_labeled(ttest, tdom, scheme, &err);
    cfg.templates = make_templates(f);
    holder = load_provider(cfg.templates.provider, f.embedding_path);
    cfg.provider = holder.get();
    cfg.crf = crf_options(co, c.threads);
    cfg.tag.constrain = co.constrain;
    cfg.seed = c.seed;
    return cfg;
  }

  int adapt_run(const Common& c, AdaptConfig cfg, double fraction) {
    const std::string dir = need_out(c, "adapt run");
    cfg.train_fraction = fraction;
    const auto res = train_domain_emb_ner(cfg);
    fs::create_directories(dir);
    res.model.save((fs::path(dir) / "model.crf").string());
    json j = res.to_json();
    j["fraction"] = fraction;
    j["seed"] = cfg.seed;
    j["source_sentences"] = cfg.source.size();
    write_file((fs::path(dir) / "report.json").string(), j.dump(2) + "\n");
    emit(c, out, j, "source " + std::to_string(cfg.source.size()) + " + target " + std::to_string(res.target_ids.size()) +
                        " sentences\n" + report_text(res.report));
    return 0;
  }

  int adapt_sweep(const Common& c, const AdaptConfig& cfg, const std::vector<double>& fractions,
                  std::vector<std::uint64_t> seeds) {
    if (seeds.empty()) seeds = {c.seed};
    const auto rep = proportion_sweep(cfg, fractions, seeds, [&](const SweepCell& cell) {
      if (!c.json) out << "fraction " << cell.fraction << " seed " << cell.seed << " F1 " << cell.report.micro.f1 << "\n" << std::flush;
    });
    const json j = rep.to_json();
    if (!c.out.empty()) write_file(c.out, j.dump(2) + "\n");
    std::ostringstream os;
    os << "fraction\tmean_f1\tstddev\n";
    for (const auto& s : rep.summary) os << s.fraction << "\t" << s.mean_f1 << "\t" << s.stddev_f1 << "\n";
    os << "monotone: " << (rep.monotone ? "yes" : "no") << "\n";
    emit(c, out, j, os.str());
    return 0;
  }

  int active_run(const Common& c, const json& rc) {
    const std::string dir = need_out(c, "active run");
    auto setup = load_active_setup(rc, true, err);
    write_run_config(dir, rc);
    ActiveSession session(setup.config, std::move(setup.pool));
    session.start();
    write_history(dir, session);
    if (!c.json) out << "round 0: F1 " << session.initial_report().micro.f1 << " (source only)\n" << std::flush;
    while (!session.done()) {
      const auto batch = session.select();
      std::vector<std::vector<std::string>> labels;
      for (const auto& cand : batch) {
        const auto it = std::find_if(session.pool().begin(), session.pool().end(), [&](const PoolItem& p) { return p.id == cand.id; });
        if (it->gold.empty()) fail(ErrorKind::invalid_argument, "simulated oracle: pool item " + std::to_string(cand.id) + " has no gold labels");
        labels.push_back(it->gold);
      }
      const auto& r = session.complete(labels);
      write_round(dir, session);
      write_history(dir, session);
      if (!c.json) out << "round " << r.index << ": labeled " << r.labeled << ", F1 " << r.report.micro.f1 << "\n" << std::flush;
    }
    session.model().save((fs::path(dir) / "model.crf").string());
    if (c.json) out << session.history_json().dump(2) << "\n";
    return 0;
  }

  int serve(const Common& c, const std::string& state, const std::string& host, int port, const std::string& static_dir,
            json rc) {
    const auto cfg_path = fs::path(state) / "config.json";
    if (fs::exists(cfg_path)) {
      rc = json::parse(read_file(cfg_path.string()));
    } else {
      if (rc.at("source").get<std::string>().empty() || rc.at("pool").get<std::string>().empty() ||
          rc.at("eval").get<std::string>().empty())
        fail(ErrorKind::invalid_argument, "a new state directory needs --source, --pool and --eval");
      write_run_config(state, rc);
    }
    auto setup = load_active_setup(rc, false, err);
    AnnotationService service(setup.config, std::move(setup.pool), state, rc);
    HttpFrontend http(service, static_dir);
    const int bound = http.bind(host, port);
    err << "serving " << state << " on http://" << host << ":" << bound << " (replayed " << service.replayed_events()
        << " journal events)\n";
    (void)c;
    http.run();
    return 0;
  }

  int synth(const Common& c, const std::string& kind, const TwoDomainConfig& tc, const NerDatasetConfig& nc) {
    const std::string dir = need_out(c, "synth generate");
    json j;
    if (kind == "two-domain") {
      TwoDomainConfig cfg = tc;
      cfg.seed = c.seed;
      const auto corpus = gen_two_domain_corpus(cfg);
      write_two_domain_corpus(corpus, dir);
      std::string phrases;
      for (const auto& p : corpus.truth.phrases)
        phrases += json{{"word", p.target}, {"context", p.contexts}, {"gold", p.gold}, {"balanced", p.balanced}}.dump() + "\n";
      write_file((fs::path(dir) / "phrases.jsonl").string(), phrases);
      j = {{"out", dir}, {"kind", kind}, {"domain_tokens", corpus.truth.domain_tokens}, {"pivots", corpus.truth.pivots},
           {"ambiguous", corpus.truth.ambiguous}, {"fillers", corpus.truth.fillers}};
    } else if (kind == "ner") {
      NerDatasetConfig cfg = nc;
      cfg.seed = c.seed;
      const auto data = gen_ner_dataset(cfg);
      write_ner_dataset(data, dir);
      j = {{"out", dir}, {"kind", kind}, {"source", data.source.size()}, {"target_train", data.target_train.size()},
           {"target_test", data.target_test.size()}, {"unlabeled_per_domain", cfg.unlabeled}};
    } else {
      fail(ErrorKind::invalid_argument, "unknown corpus kind: " + kind + " (two-domain|ner)");
    }
    emit(c, out, j, "wrote " + kind + " benchmark to " + dir + "\n");
    return 0;
  }
};

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain-specific embeddings, sense divergence, and NER adaptation toolkit", "dsner"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  // vocab build
  auto* vocab = app.add_subcommand("vocab", "vocabulary tools")->require_subcommand(1);
  auto* vocab_build = vocab->add_subcommand("build", "count tokens over a corpus manifest");
  Common vb_c;
  std::string vb_manifest;
  std::uint64_t vb_min = 5;
  add_common(vocab_build, vb_c, "vocabulary file", "vocab.txt");
  vocab_build->add_option("--manifest", vb_manifest, "corpus manifest (domain<TAB>path per line)")->required();
  vocab_build->add_option("--min-count", vb_min, "minimum token count")->capture_default_str();

  // embed domaindist / domainsense
  auto* embed = app.add_subcommand("embed", "train embeddings")->require_subcommand(1);
  auto* dd = embed->add_subcommand("domaindist", "domain-specific skip-gram embeddings");
  Common dd_c;
  std::string dd_manifest, dd_vocab;
  DomainDistHyper dd_h;
  add_common(dd, dd_c, "export directory");
  dd->add_option("--manifest", dd_manifest, "corpus manifest")->required();
  dd->add_option("--vocab", dd_vocab, "existing vocabulary file (default: built from the manifest)");
  dd->add_option("--dim", dd_h.dim, "embedding dimension")->capture_default_str();
  dd->add_option("--window", dd_h.window, "maximum context window")->capture_default_str();
  dd->add_option("--alpha", dd_h.alpha0, "initial learning rate")->capture_default_str();
  dd->add_option("--epochs", dd_h.epochs, "passes over the corpus")->capture_default_str();
  dd->add_option("--min-count", dd_h.min_count, "minimum token count")->capture_default_str();
  dd->add_option("--subsample", dd_h.subsample, "frequent-word subsampling threshold (0 disables)")->capture_default_str();

  auto* ds = embed->add_subcommand("domainsense", "adaptive skip-gram sense embeddings");
  Common ds_c;
  std::string ds_manifest, ds_vocab;
  SenseHyper ds_h;
  add_common(ds, ds_c, "export directory");
  ds->add_option("--manifest", ds_manifest, "corpus manifest")->required();
  ds->add_option("--vocab", ds_vocab, "existing vocabulary file (default: built from the manifest)");
  ds->add_option("--senses", ds_h.senses, "maximum senses per word")->capture_default_str();
  ds->add_option("--dim", ds_h.dim, "embedding dimension")->capture_default_str();
  ds->add_option("--window", ds_h.window, "maximum context window")->capture_default_str();
  ds->add_option("--alpha", ds_h.alpha0, "initial learning rate")->capture_default_str();
  ds->add_option("--alpha-dp", ds_h.alpha_dp, "stick-breaking concentration")->capture_default_str();
  ds->add_option("--epochs", ds_h.epochs, "passes over the corpus")->capture_default_str();
  ds->add_option("--min-count", ds_h.min_count, "minimum token count")->capture_default_str();
  ds->add_option("--prune", ds_h.prune_threshold, "prior below which a sense is pruned")->capture_default_str();

  // jsd report
  auto* jsd = app.add_subcommand("jsd", "sense-distribution divergence")->require_subcommand(1);
  auto* jsd_rep = jsd->add_subcommand("report", "rank words by Jensen-Shannon divergence between two domains");
  Common jr_c;
  std::string jr_senses, jr_manifest, jr_a, jr_b;
  std::uint64_t jr_min = 1000;
  bool jr_soft = false, jr_bits = false;
  std::size_t jr_top = 20;
  add_common(jsd_rep, jr_c, "JSON-lines report file");
  jsd_rep->add_option("--senses", jr_senses, "domainsense export directory")->required();
  jsd_rep->add_option("--manifest", jr_manifest, "corpus manifest")->required();
  jsd_rep->add_option("--domain-a", jr_a, "first domain (default: first in manifest)");
  jsd_rep->add_option("--domain-b", jr_b, "second domain (default: second in manifest)");
  jsd_rep->add_option("--min-count", jr_min, "minimum occurrences in both domains")->capture_default_str();
  jsd_rep->add_flag("--soft", jr_soft, "soft (posterior) sense counts instead of argmax");
  jsd_rep->add_flag("--bits", jr_bits, "report divergences in bits");
  jsd_rep->add_option("--top", jr_top, "rows in the text summary")->capture_default_str();

  // disambig
  auto* dis = app.add_subcommand("disambig", "infer the domain of a word usage");
  Common di_c;
  std::string di_emb, di_uni, di_manifest, di_method = "ddpp", di_word, di_context, di_prior = "uniform", di_testset;
  add_common(dis, di_c, "JSON result file");
  dis->add_option("--embeddings", di_emb, "domaindist export directory")->required();
  dis->add_option("--unigrams", di_uni, "unigram table (default: <embeddings>/unigrams.tsv)");
  dis->add_option("--manifest", di_manifest, "rebuild unigram tables from this manifest");
  dis->add_option("--method", di_method, "ddpp|unigram|dm|cvm")->capture_default_str();
  dis->add_option("--word", di_word, "target word");
  dis->add_option("--context", di_context, "space-separated context words");
  dis->add_option("--prior", di_prior, "uniform|corpus_size")->capture_default_str();
  dis->add_option("--testset", di_testset, "JSON-lines usages {word, context, gold}; evaluates every method");

  // ner train / eval / tag
  auto* ner = app.add_subcommand("ner", "CRF named-entity tagger")->require_subcommand(1);
  auto* ner_train = ner->add_subcommand("train", "train a CRF model");
  Common nt_c;
  std::vector<std::string> nt_train, nt_domains;
  std::string nt_scheme = "bilou", nt_types;
  FeatureOpts nt_f;
  CrfOpts nt_co;
  add_common(ner_train, nt_c, "model file", "model.crf");
  ner_train->add_option("--train", nt_train, "labeled CoNLL file (repeatable)")->required();
  ner_train->add_option("--domain", nt_domains, "domain of each training file (one, or one per file)");
  ner_train->add_option("--scheme", nt_scheme, "bilou|iob2")->capture_default_str();
  ner_train->add_option("--types", nt_types, "comma list of entity types (default: those in the data)");
  add_feature_opts(ner_train, nt_f);
  add_crf_opts(ner_train, nt_co);

  auto* ner_eval = ner->add_subcommand("eval", "entity-level precision, recall and F1");
  Common ne_c;
  std::string ne_model, ne_test, ne_domain = "default", ne_scheme = "bilou", ne_emb;
  bool ne_constrain = false;
  add_common(ner_eval, ne_c, "JSON report file");
  ner_eval->add_option("--model", ne_model, "model file")->required();
  ner_eval->add_option("--test", ne_test, "labeled CoNLL file")->required();
  ner_eval->add_option("--domain", ne_domain, "domain of the test file")->capture_default_str();
  ner_eval->add_option("--scheme", ne_scheme, "bilou|iob2")->capture_default_str();
  ner_eval->add_option("--embedding-path", ne_emb, "embeddings the model was trained with");
  ner_eval->add_flag("--constrain", ne_constrain, "mask BILOU-invalid transitions when decoding");

  auto* ner_tag = ner->add_subcommand("tag", "tag raw text (one whitespace-tokenized sentence per line)");
  Common ng_c;
  std::string ng_model, ng_input, ng_domain = "default", ng_emb;
  bool ng_constrain = false, ng_norm = false;
  add_common(ner_tag, ng_c, "JSON-lines output file");
  ner_tag->add_option("--model", ng_model, "model file")->required();
  ner_tag->add_option("--input", ng_input, "raw text file")->required();
  ner_tag->add_option("--domain", ng_domain, "domain hint for embeddings")->capture_default_str();
  ner_tag->add_option("--embedding-path", ng_emb, "embeddings the model was trained with");
  ner_tag->add_flag("--constrain", ng_constrain, "mask BILOU-invalid transitions when decoding");
  ner_tag->add_flag("--normalized", ng_norm, "report length-normalized confidence");

  // adapt run / sweep
  auto* adapt = app.add_subcommand("adapt", "supervised domain adaptation")->require_subcommand(1);
  struct AdaptOpts {
    Common c;
    std::string source, sdom = "source", ttrain, ttest, tdom = "target", scheme = "bilou";
    FeatureOpts f;
    CrfOpts co;
  };
  auto add_adapt = [](CLI::App* a, AdaptOpts& o, const std::string& out_help) {
    add_common(a, o.c, out_help);
    a->add_option("--source", o.source, "labeled source-domain file");
    a->add_option("--source-domain", o.sdom, "source domain name")->capture_default_str();
    a->add_option("--target-train", o.ttrain, "labeled target-domain training file");
    a->add_option("--target-test", o.ttest, "labeled target-domain test file")->required();
    a->add_option("--target-domain", o.tdom, "target domain name")->capture_default_str();
    a->add_option("--scheme", o.scheme, "bilou|iob2")->capture_default_str();
    add_feature_opts(a, o.f);
    add_crf_opts(a, o.co);
  };
  auto* adapt_run = adapt->add_subcommand("run", "train on source plus a fraction of the target data");
  AdaptOpts ar;
  double ar_fraction = 1.0;
  add_adapt(adapt_run, ar, "run directory");
  adapt_run->add_option("--fraction", ar_fraction, "share of the target training set used")->capture_default_str();
  auto* adapt_sweep = adapt->add_subcommand("sweep", "grid over target fractions and seeds");
  AdaptOpts as;
  std::vector<double> as_fractions{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<std::uint64_t> as_seeds;
  add_adapt(adapt_sweep, as, "JSON sweep report");
  adapt_sweep->add_option("--fractions", as_fractions, "comma list of fractions")->delimiter(',')->capture_default_str();
  adapt_sweep->add_option("--seeds", as_seeds, "comma list of seeds (default: --seed)")->delimiter(',');

  // active run
  auto* active = app.add_subcommand("active", "active learning")->require_subcommand(1);
  auto* active_run = active->add_subcommand("run", "least-confidence loop with the pool's gold labels as oracle");
  Common ac_c;
  ActiveOpts ac_a;
  FeatureOpts ac_f;
  CrfOpts ac_co;
  add_common(active_run, ac_c, "run directory");
  add_active_opts(active_run, ac_a, true);
  add_feature_opts(active_run, ac_f);
  add_crf_opts(active_run, ac_co);

  // serve
  auto* serve = app.add_subcommand("serve", "annotation service for interactive active learning");
  Common sv_c;
  std::string sv_state, sv_host = "127.0.0.1", sv_static;
  int sv_port = 8080;
  ActiveOpts sv_a;
  FeatureOpts sv_f;
  CrfOpts sv_co;
  add_common(serve, sv_c, "unused; the state directory holds all output");
  serve->add_option("--state", sv_state, "state directory (config.json, journal, rounds)")->required();
  serve->add_option("--host", sv_host, "listen address")->capture_default_str();
  serve->add_option("--port", sv_port, "listen port")->envname("DSNER_PORT")->capture_default_str();
  serve->add_option("--static", sv_static, "directory with the built UI bundle");
  add_active_opts(serve, sv_a, false);
  add_feature_opts(serve, sv_f);
  add_crf_opts(serve, sv_co);

  // synth generate
  auto* synth = app.add_subcommand("synth", "synthetic benchmarks")->require_subcommand(1);
  auto* synth_gen = synth->add_subcommand("generate", "write a synthetic corpus or NER dataset");
  Common sg_c;
  std::string sg_kind = "two-domain";
  TwoDomainConfig sg_t;
  NerDatasetConfig sg_n;
  add_common(synth_gen, sg_c, "output directory");
  synth_gen->add_option("--kind", sg_kind, "two-domain|ner")->capture_default_str();
  synth_gen->add_option("--tokens", sg_t.tokens, "two-domain: approximate token count")->capture_default_str();
  synth_gen->add_option("--pivots", sg_t.pivots, "two-domain: pivot words")->capture_default_str();
  synth_gen->add_option("--fillers", sg_t.fillers, "two-domain: filler words")->capture_default_str();
  synth_gen->add_option("--cluster-size", sg_t.cluster_size, "two-domain: words per topic cluster")->capture_default_str();
  synth_gen->add_option("--source-size", sg_n.source, "ner: source sentences")->capture_default_str();
  synth_gen->add_option("--target-train-size", sg_n.target_train, "ner: target training sentences")->capture_default_str();
  synth_gen->add_option("--target-test-size", sg_n.target_test, "ner: target test sentences")->capture_default_str();
  synth_gen->add_option("--unlabeled-size", sg_n.unlabeled, "ner: unlabeled sentences per domain")->capture_default_str();

  std::vector<std::string> storage{"dsner"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Cli cli{out, err};
  try {
    if (*vocab_build) return cli.vocab_build(vb_c, vb_manifest, vb_min);
    if (*dd) return cli.embed_domaindist(dd_c, dd_manifest, dd_vocab, dd_h);
    if (*ds) return cli.embed_domainsense(ds_c, ds_manifest, ds_vocab, ds_h);
    if (*jsd_rep) return cli.jsd_cmd(jr_c, jr_senses, jr_manifest, jr_a, jr_b, jr_min, jr_soft, jr_bits, jr_top);
    if (*dis) return cli.disambig_cmd(di_c, di_emb, di_uni, di_manifest, di_method, di_word, di_context, di_prior, di_testset);
    if (*ner_train) return cli.ner_train(nt_c, nt_train, nt_domains, nt_scheme, nt_f, nt_co, nt_types);
    if (*ner_eval) return cli.ner_eval(ne_c, ne_model, ne_test, ne_domain, ne_scheme, ne_emb, ne_constrain);
    if (*ner_tag) return cli.ner_tag(ng_c, ng_model, ng_input, ng_domain, ng_emb, ng_constrain, ng_norm);
    if (*adapt_run) {
      std::unique_ptr<EmbeddingProvider> holder;
      auto cfg = cli.adapt_config(ar.c, ar.source, ar.sdom, ar.ttrain, ar.ttest, ar.tdom, ar.scheme, ar.f, ar.co, holder);
      return cli.adapt_run(ar.c, std::move(cfg), ar_fraction);
    }
    if (*adapt_sweep) {
      std::unique_ptr<EmbeddingProvider> holder;
      auto cfg = cli.adapt_config(as.c, as.source, as.sdom, as.ttrain, as.ttest, as.tdom, as.scheme, as.f, as.co, holder);
      return cli.adapt_sweep(as.c, cfg, as_fractions, as_seeds);
    }
    if (*active_run) return cli.active_run(ac_c, active_run_config(ac_a, ac_f, ac_co, ac_c));
    if (*serve) return cli.serve(sv_c, sv_state, sv_host, sv_port, sv_static, active_run_config(sv_a, sv_f, sv_co, sv_c));
    if (*synth_gen) return cli.synth(sg_c, sg_kind, sg_t, sg_n);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace dsner
