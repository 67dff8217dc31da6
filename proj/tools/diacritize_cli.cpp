#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diacritize/diacritize.hpp"

namespace fs = std::filesystem;
using namespace diacritize;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;

const char* const kSplits[] = {"train", "valid", "test"};

struct Globals {
  std::optional<uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<int> precision;
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg;
  for (const auto& f : g.config_files) cfg.load_file(f);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.set("seed", std::to_string(*g.seed));
  if (g.profile) cfg.set("profile", *g.profile);
  if (g.precision) cfg.set("precision", std::to_string(*g.precision));
  return cfg;
}

void make_out_dir(const std::string& dir, const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
  std::ofstream out(fs::path(dir) / "run_config.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write run_config.txt in '" + dir + "'");
  out << cfg.serialize();
}

std::string prefix(const std::string& dir, const std::string& split) { return (fs::path(dir) / split).string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << text;
}

// ---------------------------------------------------------------------------

int cmd_prepare(const RunConfig& cfg, const std::string& input, const std::string& out) {
  const auto set = cfg.diacritics();
  const std::string selector = cfg.get("selector");
  auto sentences = extract_sentences(input, selector.empty() ? std::nullopt : std::optional(selector));
  for (auto& s : sentences) s = normalize_sentence(s);
  const auto built = build_pairs(sentences, set);
  const CorpusSplit split = split_corpus(built.pairs, cfg.seed());
  const ChunkSize n = ChunkSize::parse(cfg.get("chunk_size"));
  make_out_dir(out, cfg);

  Manifest manifest;
  manifest.set("input", fs::path(input).filename().string());
  manifest.set("input_sha256", sha256_file(input));
  manifest.set("selector", selector);
  manifest.set("seed", std::to_string(cfg.seed()));
  manifest.set("ratios", "0.70,0.15,0.15");
  manifest.set("prng", Rng::kAlgorithm);
  manifest.set("diacritics", set.describe());
  manifest.set("normalization", "NFC");
  manifest.set("chunk_size", n.str());
  manifest.set("sentences", std::to_string(sentences.size()));
  manifest.set("dropped_empty", std::to_string(built.dropped_empty));

  const std::vector<SentencePair>* parts[] = {&split.train, &split.valid, &split.test};
  for (int i = 0; i < 3; ++i) {
    const std::string p = prefix(out, kSplits[i]);
    write_sentences(*parts[i], p);
    const auto chunked = chunk_pairs(*parts[i], n, &std::cerr);
    write_dataset(chunked.chunks, p);
    manifest.set(std::string(kSplits[i]) + "_sentences", std::to_string(parts[i]->size()));
    manifest.set(std::string(kSplits[i]) + "_chunks", std::to_string(chunked.chunks.size()));
    manifest.set(std::string(kSplits[i]) + "_skipped", std::to_string(chunked.skipped_ids.size()));
    manifest.set(std::string(kSplits[i]) + "_sentences_sha256", sha256_file(p + ".sent.tgt"));
  }
  manifest.write(prefix(out, "manifest.txt"));
  std::cout << "sentences\t" << built.pairs.size() << "\n"
            << "dropped_empty\t" << built.dropped_empty << "\n"
            << "train\t" << split.train.size() << "\nvalid\t" << split.valid.size() << "\ntest\t"
            << split.test.size() << "\n";
  return kExitOk;
}

std::vector<SentencePair> load_all_sentences(const RunConfig& cfg, const std::string& corpus) {
  if (fs::is_directory(corpus)) {
    std::vector<SentencePair> all;
    for (const char* s : kSplits) {
      auto part = read_sentences(prefix(corpus, s));
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  const std::string selector = cfg.get("selector");
  auto sentences = extract_sentences(corpus, selector.empty() ? std::nullopt : std::optional(selector));
  for (auto& s : sentences) s = normalize_sentence(s);
  return build_pairs(sentences, cfg.diacritics()).pairs;
}

int cmd_stats(const RunConfig& cfg, const std::string& corpus) {
  const auto pairs = load_all_sentences(cfg, corpus);
  const auto lex = build_lexicon(pairs);
  const auto types = histogram(lex, HistogramMode::kType);
  const auto tokens = histogram(lex, HistogramMode::kToken);
  std::cout << types.to_csv();
  std::size_t words = 0;
  for (const auto& p : pairs) words += split_words(p.tgt).size();
  std::cerr << "sentences " << pairs.size() << ", words " << words << ", mean length "
            << (pairs.empty() ? 0.0 : static_cast<double>(words) / static_cast<double>(pairs.size())) << "\n"
            << "types " << lex.type_count() << ", single-form types " << format_percent(types.share(1) / 100.0)
            << "%, single-form tokens " << format_percent(tokens.share(1) / 100.0) << "%, max forms "
            << types.max_k << "\n";
  return kExitOk;
}

template <typename T>
int train_impl(const RunConfig& cfg, const std::string& data, const std::string& out) {
  const Manifest manifest = Manifest::read(prefix(data, "manifest.txt"));
  model::ModelConfig mc = cfg.model_config();
  const auto prepared_size = manifest.get("chunk_size");
  if (!prepared_size) throw FormatError("manifest in " + data + " has no chunk_size");
  mc.chunk_size = ChunkSize::parse(*prepared_size);
  const auto tc = cfg.train_config();
  const auto train_chunks = read_dataset(prefix(data, "train"));
  const auto valid_chunks = read_dataset(prefix(data, "valid"));
  if (train_chunks.empty()) throw InputError("no training chunks in " + data);
  make_out_dir(out, cfg);

  model::CheckpointInfo info;
  info.profile = trainer::to_string(tc.profile);
  info.precision = tc.precision;
  info.manifest_sha256 = sha256_file(prefix(data, "manifest.txt"));
  const std::string last_path = prefix(out, "last.ckpt");
  const std::string best_path = prefix(out, "model.ckpt");

  trainer::TrainHooks<T> hooks;
  hooks.progress = &std::cerr;
  hooks.checkpoint = [&](const model::Model<T>& m, std::size_t step) {
    auto i = info;
    i.steps = step;
    model::write_checkpoint(m, i, last_path);
  };
  hooks.best = [&](const model::Model<T>& m, std::size_t step) {
    auto i = info;
    i.steps = step;
    model::write_checkpoint(m, i, best_path);
  };
  auto result = trainer::train<T>(trainer::init_model<T>(mc, train_chunks, cfg.seed()), train_chunks,
                                  valid_chunks, tc, hooks);
  if (valid_chunks.empty()) {
    auto i = info;
    i.steps = tc.steps;
    model::write_checkpoint(result.best, i, best_path);
  }
  write_text(prefix(out, "train_log.tsv"), result.log.loss_tsv());
  write_text(prefix(out, "valid_log.tsv"), result.log.validation_tsv());
  std::cout << "steps\t" << tc.steps << "\nfinal_loss\t" << result.log.losses.back() << "\nbest_step\t"
            << result.best_step << "\nseconds\t" << result.log.wall_seconds << "\n";
  return kExitOk;
}

template <typename T>
int sweep_impl(const RunConfig& cfg, const std::string& data, const std::string& out) {
  CorpusSplit split;
  split.seed = cfg.seed();
  split.train = read_sentences(prefix(data, "train"));
  split.valid = read_sentences(prefix(data, "valid"));
  split.test = read_sentences(prefix(data, "test"));
  make_out_dir(out, cfg);
  trainer::SweepOptions opts;
  opts.sizes = cfg.sweep_sizes();
  opts.baseline = cfg.get_bool("baseline");
  opts.diacritics = cfg.diacritics();
  opts.progress = &std::cerr;
  const auto report = trainer::sweep<T>(split, cfg.model_config(), cfg.train_config(), opts);
  write_text(prefix(out, "sweep.csv"), report.to_csv());
  write_text(prefix(out, "sweep.txt"), report.to_text());
  std::cout << report.to_csv();
  std::cerr << report.to_text();
  for (const auto& c : report.cells) {
    if (!c.ok) return kExitFailure;
  }
  return kExitOk;
}

template <typename T>
int predict_impl(const std::string& ckpt, std::istream& in, const DiacriticSet& set, std::optional<std::size_t> beam,
                 bool diagnostics) {
  auto m = model::read_checkpoint<T>(ckpt);
  if (beam) {
    if (*beam == 0) throw InputError("--beam must be at least 1");
    m.config.beam_width = *beam;
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!unicode::is_valid_utf8(line)) throw InputError("line " + std::to_string(lineno) + ": invalid UTF-8");
    const auto pred = model::predict_sentence(m, line, set);
    std::cout << pred.text << '\n';
    if (diagnostics) {
      for (std::size_t i = 0; i < pred.chunks.size(); ++i) {
        const auto& c = pred.chunks[i];
        if (c.word_count_mismatch || c.capped) {
          std::cerr << "line " << lineno << " chunk " << i << ":" << (c.word_count_mismatch ? " word-count mismatch" : "")
                    << (c.capped ? " length cap reached" : "") << "\n";
        }
      }
    }
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& ref, const std::string& hyp) {
  const auto refs = read_lines(ref);
  const auto hyps = read_lines(hyp);
  const auto report = corpus_wer(refs, hyps);
  std::cout << format_percent(report.micro) << "\n";
  std::cerr << "sentences " << report.sentence_count() << ", S " << report.totals.substitutions << ", D "
            << report.totals.deletions << ", I " << report.totals.insertions << ", C " << report.totals.correct
            << ", macro " << format_percent(report.macro) << "\n";
  return kExitOk;
}

int cmd_synth(const RunConfig& cfg, std::size_t count, std::size_t min_words, std::size_t max_words) {
  toy::ToyShape shape;
  shape.min_words = min_words;
  shape.max_words = max_words;
  if (min_words == 0 || max_words < min_words) throw InputError("invalid word range");
  for (const auto& s : toy::corpus(count, cfg.seed(), shape)) std::cout << s << '\n';
  return kExitOk;
}

template <typename F>
int dispatch_precision(int precision, F&& f) {
  if (precision == 32) return f(float{});
  return f(double{});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arabic diacritic restoration: corpus preparation, training, prediction and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--profile", g.profile, "training profile")->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--precision", g.precision, "floating-point width")->check(CLI::IsMember({32, 64}));
  app.add_option("--config", g.config_files, "key = value configuration file (repeatable)");
  app.add_option("--set", g.overrides, "configuration override key=value (repeatable)");

  std::string input, out, data, model_path, ref, hyp;
  std::optional<std::string> selector, chunk_size;
  std::optional<std::size_t> beam;
  bool diagnostics = false;
  std::size_t count = 100, min_words = 1, max_words = 3;

  auto* prepare = app.add_subcommand("prepare", "build the parallel corpus, split and chunk it");
  prepare->add_option("input", input, "XML or plaintext file")->required();
  prepare->add_option("--selector", selector, "XML element path of one sentence");
  prepare->add_option("--chunk-size", chunk_size, "1..10 or sentence");
  prepare->add_option("--out", out, "output directory")->required();

  auto* stats = app.add_subcommand("stats", "ambiguity histogram (CSV on stdout)");
  stats->add_option("corpus", input, "prepared directory or raw corpus file")->required();
  stats->add_option("--selector", selector, "XML element path of one sentence");

  auto* train = app.add_subcommand("train", "train one model on a prepared corpus");
  train->add_option("data", data, "prepared directory")->required();
  train->add_option("--out", out, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "train one model per chunk size and report test WER");
  sweep->add_option("data", data, "prepared directory")->required();
  sweep->add_option("--out", out, "output directory")->required();

  auto* predict = app.add_subcommand("predict", "diacritize sentences, one per line");
  predict->add_option("--model", model_path, "checkpoint")->required();
  predict->add_option("input", input, "input file (default stdin)");
  predict->add_option("--beam", beam, "beam width (default from the checkpoint)");
  predict->add_flag("--diagnostics", diagnostics, "report chunk word-count mismatches on stderr");

  auto* evaluate = app.add_subcommand("evaluate", "corpus WER of hypothesis lines against reference lines");
  evaluate->add_option("ref", ref, "reference file")->required();
  evaluate->add_option("hyp", hyp, "hypothesis file")->required();

  auto* synth = app.add_subcommand("synth", "print a synthetic diacritized corpus");
  synth->add_option("--count", count, "sentences");
  synth->add_option("--min-words", min_words, "");
  synth->add_option("--max-words", max_words, "");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    RunConfig cfg = resolve(g);
    if (selector) cfg.set("selector", *selector);
    if (chunk_size) cfg.set("chunk_size", *chunk_size);

    if (*prepare) return cmd_prepare(cfg, input, out);
    if (*stats) return cmd_stats(cfg, input);
    if (*train) {
      return dispatch_precision(cfg.precision(), [&](auto t) { return train_impl<decltype(t)>(cfg, data, out); });
    }
    if (*sweep) {
      return dispatch_precision(cfg.precision(), [&](auto t) { return sweep_impl<decltype(t)>(cfg, data, out); });
    }
    if (*predict) {
      model::CheckpointInfo info;
      model::read_checkpoint<double>(model_path, &info);
      const int precision = g.precision ? *g.precision : info.precision;
      std::ifstream file;
      if (!input.empty()) {
        file.open(input, std::ios::binary);
        if (!file) throw InputError("cannot open '" + input + "'");
      }
      std::istream& in = input.empty() ? std::cin : file;
      return dispatch_precision(precision, [&](auto t) {
        return predict_impl<decltype(t)>(model_path, in, cfg.diacritics(), beam, diagnostics);
      });
    }
    if (*evaluate) return cmd_evaluate(ref, hyp);
    if (*synth) return cmd_synth(cfg, count, min_words, max_words);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
