#pragma once

// Checkpoint container:
//
//   diacritize-checkpoint 1\n
//   <one-line JSON header: config, vocab, parameter names and shapes, metadata>\n
//   <every parameter value as little-endian IEEE-754 binary64, in header order>
//
// Values are always stored in 64 bits; 32-bit models widen on write.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "diacritize/checksum.hpp"
#include "diacritize/error.hpp"
#include "diacritize/model/seq2seq.hpp"

namespace diacritize::model {

inline constexpr const char* kCheckpointMagic = "diacritize-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  std::string profile = "desk";
  int precision = 64;
  std::string manifest_sha256;  // of the prepared corpus the model was trained on
  std::size_t steps = 0;

  friend bool operator==(const CheckpointInfo&, const CheckpointInfo&) = default;
};

namespace detail {

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"enc_layers", c.enc_layers},
          {"dec_layers", c.dec_layers},
          {"dropout", c.dropout},
          {"input_feed", c.input_feed},
          {"max_decode_factor", c.max_decode_factor},
          {"beam_width", c.beam_width},
          {"chunk_size", c.chunk_size.str()},
          {"attention", ModelConfig::kAttention}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.enc_layers = j.at("enc_layers").get<std::size_t>();
  c.dec_layers = j.at("dec_layers").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.input_feed = j.at("input_feed").get<bool>();
  c.max_decode_factor = j.at("max_decode_factor").get<double>();
  c.beam_width = j.at("beam_width").get<std::size_t>();
  c.chunk_size = ChunkSize::parse(j.at("chunk_size").get<std::string>());
  if (j.at("attention").get<std::string>() != ModelConfig::kAttention) {
    throw FormatError("checkpoint: unsupported attention kind");
  }
  c.validate();
  return c;
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

inline double get_f64(const unsigned char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

template <typename T>
std::string serialize_checkpoint(const Model<T>& m, const CheckpointInfo& info) {
  nlohmann::json header;
  header["config"] = detail::config_to_json(m.config);
  header["vocab"] = m.vocab.tokens();
  header["profile"] = info.profile;
  header["precision"] = info.precision;
  header["manifest_sha256"] = info.manifest_sha256;
  header["steps"] = info.steps;
  nlohmann::json params = nlohmann::json::array();
  for (const auto* p : m.params.list()) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  header["params"] = params;

  std::string out = std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion) + "\n";
  out += header.dump();
  out += '\n';
  for (const auto* p : m.params.list()) {
    for (T v : p->value.values()) detail::put_f64(out, static_cast<double>(v));
  }
  return out;
}

template <typename T>
void write_checkpoint(const Model<T>& m, const CheckpointInfo& info, const std::string& path) {
  const std::string bytes = serialize_checkpoint(m, info);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
Model<T> parse_checkpoint(const std::string& bytes, CheckpointInfo* info = nullptr) {
  const auto nl1 = bytes.find('\n');
  if (nl1 == std::string::npos) throw FormatError("checkpoint: missing magic line");
  std::istringstream magic(bytes.substr(0, nl1));
  std::string word;
  int version = 0;
  if (!(magic >> word >> version) || word != kCheckpointMagic) {
    throw FormatError("checkpoint: bad magic");
  }
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto nl2 = bytes.find('\n', nl1 + 1);
  if (nl2 == std::string::npos) throw FormatError("checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(nl1 + 1, nl2 - nl1 - 1));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  Model<T> m;
  try {
    m.config = detail::config_from_json(header.at("config"));
    auto tokens = header.at("vocab").get<std::vector<std::string>>();
    if (tokens.size() < CharVocab::kReserved) throw FormatError("checkpoint: vocabulary too small");
    m.vocab = CharVocab(std::vector<std::string>(tokens.begin() + CharVocab::kReserved, tokens.end()));
    if (m.vocab.tokens() != tokens) throw FormatError("checkpoint: vocabulary not in canonical order");
    if (info) {
      info->profile = header.at("profile").get<std::string>();
      info->precision = header.at("precision").get<int>();
      info->manifest_sha256 = header.at("manifest_sha256").get<std::string>();
      info->steps = header.at("steps").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  m.params = ModelParams<T>(m.config, m.vocab.size());

  const auto& specs = header.at("params");
  auto list = m.params.list();
  if (specs.size() != list.size()) throw FormatError("checkpoint: parameter count mismatch");
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data()) + nl2 + 1;
  std::size_t remaining = bytes.size() - nl2 - 1;
  for (std::size_t i = 0; i < list.size(); ++i) {
    auto& p = *list[i];
    if (specs[i].at("name").get<std::string>() != p.name ||
        specs[i].at("rows").get<std::size_t>() != p.value.rows() ||
        specs[i].at("cols").get<std::size_t>() != p.value.cols()) {
      throw FormatError("checkpoint: parameter '" + p.name + "' does not match the configuration");
    }
    if (remaining < 8 * p.value.size()) throw FormatError("checkpoint: truncated values");
    for (auto& v : p.value.values()) {
      v = static_cast<T>(detail::get_f64(data));
      data += 8;
    }
    remaining -= 8 * p.value.size();
  }
  if (remaining != 0) throw FormatError("checkpoint: trailing bytes");
  if (!m.params.all_finite()) throw FormatError("checkpoint: non-finite parameter values");
  return m;
}

template <typename T>
Model<T> read_checkpoint(const std::string& path, CheckpointInfo* info = nullptr) {
  return parse_checkpoint<T>(read_file(path), info);
}

}  // namespace diacritize::model
