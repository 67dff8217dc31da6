// Trains a small model on a synthetic corpus and diacritizes a few held-out sentences.
#include <iostream>

#include "diacritize/diacritize.hpp"

using namespace diacritize;

int main() {
  const toy::ToyShape shape{2, 4, 2, 3};
  const auto train_sents = toy::corpus(60, 3, shape);
  const auto held_sents = toy::corpus(5, 4, shape, train_sents);
  const auto train_pairs = build_pairs(train_sents).pairs;

  model::ModelConfig mc;
  mc.embed_dim = 32;
  mc.hidden_dim = 64;
  mc.dropout = 0.0;
  mc.chunk_size = ChunkSize::words(1);
  const auto chunks = chunk_pairs(train_pairs, mc.chunk_size).chunks;

  auto tc = trainer::TrainConfig::desk(1500);
  tc.batch_size = 16;
  tc.lr = 3e-3;
  auto result = trainer::train<double>(trainer::init_model<double>(mc, chunks, 1), chunks, {}, tc);
  std::cout << "final training loss " << result.log.losses.back() << "\n\n";

  for (const auto& gold : held_sents) {
    const auto pred = model::predict_sentence(result.last, gold);
    std::cout << "input  " << make_source(gold, DiacriticSet()) << "\n"
              << "output " << pred.text << "\n"
              << "gold   " << gold << "\n"
              << "WER    " << format_percent(wer(align_sentences(gold, pred.text))) << "%\n\n";
  }
}
