#pragma once

#include <string>

#include "diacritize/corpus.hpp"
#include "diacritize/error.hpp"

namespace diacritize::model {

struct ModelConfig {
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  double dropout = 0.3;
  bool input_feed = true;
  double max_decode_factor = 3.0;
  std::size_t beam_width = 1;
  ChunkSize chunk_size = ChunkSize::words(5);

  /// Only the bilinear ("general") score is implemented.
  static constexpr const char* kAttention = "general";

  void validate() const {
    if (embed_dim == 0 || hidden_dim == 0) throw InputError("model dimensions must be positive");
    if (enc_layers == 0 || dec_layers == 0) throw InputError("layer counts must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("dropout must be in [0, 1)");
    if (!(max_decode_factor > 0.0)) throw InputError("max_decode_factor must be positive");
    if (beam_width == 0) throw InputError("beam_width must be at least 1");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace diacritize::model
