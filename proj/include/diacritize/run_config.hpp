#pragma once

// Operator configuration: `key = value` lines with `#` comments, merged with
// command-line overrides. Unknown keys are errors.

#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "diacritize/corpus.hpp"
#include "diacritize/error.hpp"
#include "diacritize/model/config.hpp"
#include "diacritize/trainer.hpp"

namespace diacritize {

class RunConfig {
public:
  struct Key {
    const char* name;
    const char* fallback;  // empty = derived from the profile
    const char* help;
  };

  static const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        {"seed", "1", "split, initialization, batching and dropout seed"},
        {"profile", "desk", "paper | desk"},
        {"precision", "64", "32 | 64"},
        {"selector", "", "XML element path holding one sentence; empty for plaintext"},
        {"diacritics", "default", "default | extended"},
        {"chunk_size", "5", "1..10 | sentence"},
        {"steps", "", "optimizer updates (paper 100000, desk 2000)"},
        {"batch_size", "64", "chunks per update"},
        {"optimizer", "", "sgd | adam"},
        {"lr", "", "learning rate"},
        {"decay", "", "learning-rate decay factor"},
        {"decay_start", "", "first decayed step, 0 = never"},
        {"decay_every", "", "steps between decays"},
        {"clip", "5.0", "gradient norm limit"},
        {"validate_every", "0", "0 = after the last step only"},
        {"checkpoint_every", "0", "0 = after the last step only"},
        {"embed_dim", "64", ""},
        {"hidden_dim", "128", ""},
        {"enc_layers", "2", ""},
        {"dec_layers", "2", ""},
        {"dropout", "0.3", ""},
        {"input_feed", "true", ""},
        {"max_decode_factor", "3.0", "output length cap relative to input"},
        {"beam_width", "1", "1 = greedy"},
        {"sweep_sizes", "1,2,3,4,5,6,7,8,9,10,sentence", "chunk sizes trained by sweep"},
        {"baseline", "true", "include the lexicon baseline column in sweep reports"},
    };
    return k;
  }

  static bool known(const std::string& key) {
    for (const auto& k : keys()) {
      if (key == k.name) return true;
    }
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw InputError("unknown configuration key '" + key + "'");
    values_[key] = value;
    check(key);
  }

  bool is_set(const std::string& key) const { return values_.count(key) > 0; }

  /// Parses `key = value` lines; later files or calls override earlier ones.
  void load(const std::string& text, const std::string& origin = "config") {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw InputError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = trim(body.substr(0, eq));
      try {
        set(key, trim(body.substr(eq + 1)));
      } catch (const InputError& e) {
        throw InputError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) { load(read_file(path), path); }

  /// Resolved value, including profile-derived defaults.
  std::string get(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    for (const auto& k : keys()) {
      if (key != k.name) continue;
      if (*k.fallback || key == "selector") return k.fallback;
      return profile_default(key);
    }
    throw InputError("unknown configuration key '" + key + "'");
  }

  std::size_t get_size(const std::string& key) const { return parse_size(key, get(key)); }
  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  bool get_bool(const std::string& key) const { return parse_bool(key, get(key)); }

  uint64_t seed() const { return get_size("seed"); }
  int precision() const { return static_cast<int>(get_size("precision")); }
  trainer::Profile profile() const { return trainer::parse_profile(get("profile")); }

  DiacriticSet diacritics() const {
    return DiacriticSet(get("diacritics") == "extended");
  }

  model::ModelConfig model_config() const {
    model::ModelConfig c;
    c.embed_dim = get_size("embed_dim");
    c.hidden_dim = get_size("hidden_dim");
    c.enc_layers = get_size("enc_layers");
    c.dec_layers = get_size("dec_layers");
    c.dropout = get_double("dropout");
    c.input_feed = get_bool("input_feed");
    c.max_decode_factor = get_double("max_decode_factor");
    c.beam_width = get_size("beam_width");
    c.chunk_size = ChunkSize::parse(get("chunk_size"));
    c.validate();
    return c;
  }

  trainer::TrainConfig train_config() const {
    trainer::TrainConfig c = trainer::TrainConfig::for_profile(profile(), get_size("steps"));
    c.batch_size = get_size("batch_size");
    c.optimizer = neural::parse_optimizer(get("optimizer"));
    c.lr = get_double("lr");
    c.decay = get_double("decay");
    c.decay_start = get_size("decay_start");
    c.decay_every = get_size("decay_every");
    c.clip = get_double("clip");
    c.validate_every = get_size("validate_every");
    c.checkpoint_every = get_size("checkpoint_every");
    c.seed = seed();
    c.precision = precision();
    c.validate();
    return c;
  }

  std::vector<ChunkSize> sweep_sizes() const {
    std::vector<ChunkSize> out;
    std::string item;
    std::istringstream in(get("sweep_sizes"));
    while (std::getline(in, item, ',')) out.push_back(ChunkSize::parse(trim(item)));
    if (out.empty()) throw InputError("sweep_sizes is empty");
    return out;
  }

  /// Every key with its resolved value, in declaration order.
  std::string serialize() const {
    std::string out;
    for (const auto& k : keys()) out += std::string(k.name) + " = " + get(k.name) + "\n";
    return out;
  }

private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::size_t parse_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
      throw InputError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
  }

  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw InputError(key + ": expected a number, got '" + v + "'");
  }

  static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InputError(key + ": expected true or false, got '" + v + "'");
  }

  std::string profile_default(const std::string& key) const {
    const auto p = trainer::parse_profile(get("profile"));
    const std::size_t steps = is_set("steps") ? get_size("steps") : (p == trainer::Profile::kPaper ? 100000 : 2000);
    const auto c = trainer::TrainConfig::for_profile(p, steps);
    std::ostringstream out;
    out.precision(17);
    if (key == "steps") out << c.steps;
    else if (key == "optimizer") out << neural::to_string(c.optimizer);
    else if (key == "lr") out << c.lr;
    else if (key == "decay") out << c.decay;
    else if (key == "decay_start") out << c.decay_start;
    else if (key == "decay_every") out << c.decay_every;
    return out.str();
  }

  /// Early validation so bad values are reported where they were given.
  void check(const std::string& key) const {
    const std::string v = values_.at(key);
    if (key == "profile") {
      trainer::parse_profile(v);
    } else if (key == "precision") {
      if (v != "32" && v != "64") throw InputError("precision: expected 32 or 64, got '" + v + "'");
    } else if (key == "diacritics") {
      if (v != "default" && v != "extended") {
        throw InputError("diacritics: expected default or extended, got '" + v + "'");
      }
    } else if (key == "chunk_size") {
      ChunkSize::parse(v);
    } else if (key == "optimizer") {
      neural::parse_optimizer(v);
    } else if (key == "input_feed" || key == "baseline") {
      parse_bool(key, v);
    } else if (key == "lr" || key == "decay" || key == "clip" || key == "dropout" ||
               key == "max_decode_factor") {
      parse_double(key, v);
    } else if (key == "selector" || key == "sweep_sizes") {
    } else {
      parse_size(key, v);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace diacritize
