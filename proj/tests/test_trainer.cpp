#include <gtest/gtest.h>

#include <set>

#include "diacritize/model/checkpoint.hpp"
#include "diacritize/toy.hpp"
#include "diacritize/trainer.hpp"

using namespace diacritize;
using namespace diacritize::trainer;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  c.dropout = 0.0;
  c.chunk_size = ChunkSize::words(1);
  return c;
}

std::vector<ChunkPair> toy_chunks(std::size_t sentences, uint64_t seed, ChunkSize n = ChunkSize::words(1)) {
  return chunk_pairs(build_pairs(toy::corpus(sentences, seed, {1, 3, 2, 3})).pairs, n).chunks;
}

}  // namespace

TEST(TrainConfig, Profiles) {
  const auto d = TrainConfig::desk(300);
  EXPECT_EQ(d.optimizer, OptimizerKind::kAdam);
  EXPECT_EQ(d.lr, 1e-3);
  EXPECT_EQ(d.lr_at(300), 1e-3);
  const auto p = TrainConfig::paper(1000);
  EXPECT_EQ(p.optimizer, OptimizerKind::kSgd);
  EXPECT_EQ(p.lr_at(1), 1.0);
  EXPECT_EQ(p.lr_at(499), 1.0);
  EXPECT_EQ(p.lr_at(500), 0.5);
  EXPECT_EQ(p.lr_at(599), 0.5);
  EXPECT_EQ(p.lr_at(600), 0.25);
  EXPECT_EQ(p.lr_at(1000), 1.0 / 64);
  EXPECT_EQ(parse_profile("paper"), Profile::kPaper);
  EXPECT_THROW(parse_profile("laptop"), InputError);
}

TEST(TrainConfig, Validation) {
  auto c = TrainConfig::desk();
  c.steps = 0;
  EXPECT_THROW(c.validate(), InputError);
  c = TrainConfig::desk();
  c.precision = 16;
  EXPECT_THROW(c.validate(), InputError);
  c = TrainConfig::desk();
  c.decay = 1.5;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Batches, TenItemsBatchFour) {
  BatchStream s(std::vector<std::size_t>(10, 3), 4, 1);
  const auto e = s.epoch();
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].size(), 4u);
  EXPECT_EQ(e[1].size(), 4u);
  EXPECT_EQ(e[2].size(), 2u);
  std::set<std::size_t> seen;
  for (const auto& b : e) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Batches, EveryEpochIsAPermutation) {
  Rng rng(1);
  std::vector<std::size_t> lengths(103);
  for (auto& l : lengths) l = 1 + rng.uniform_index(20);
  BatchStream s(lengths, 8, 5);
  for (int epoch = 0; epoch < 5; ++epoch) {
    std::vector<int> count(lengths.size(), 0);
    for (int b = 0; b < 13; ++b) {
      const auto& batch = s.next();
      if (b < 12) {
        EXPECT_EQ(batch.size(), 8u);
      } else {
        EXPECT_EQ(batch.size(), 7u);
      }
      for (auto i : batch) ++count[i];
    }
    for (int c : count) ASSERT_EQ(c, 1);
  }
  EXPECT_EQ(s.epochs_started(), 5u);
}

TEST(Batches, DeterministicBySeedAndSorted) {
  const auto chunks = toy_chunks(80, 2);
  EXPECT_EQ(make_batches(chunks, 8, 3, 40), make_batches(chunks, 8, 3, 40));
  EXPECT_NE(make_batches(chunks, 8, 3, 40), make_batches(chunks, 8, 4, 40));
  // inside a window, batches come out in length order
  std::vector<std::size_t> lengths(64);
  for (std::size_t i = 0; i < 64; ++i) lengths[i] = 64 - i;
  BatchStream s(lengths, 4, 1, 16);
  std::size_t prev = 0;
  for (int b = 0; b < 16; ++b) {
    for (auto i : s.next()) {
      EXPECT_GE(lengths[i], prev);
      prev = lengths[i];
    }
  }
}

TEST(Batches, EmptyDatasetRejected) {
  EXPECT_THROW(BatchStream({}, 4, 1), InputError);
  EXPECT_THROW(BatchStream({1}, 0, 1), InputError);
}

TEST(Train, OneStepChangesParameters) {
  const auto chunks = toy_chunks(20, 3);
  auto m = init_model<double>(tiny_config(), chunks, 1);
  auto cfg = TrainConfig::desk(1);
  cfg.batch_size = 4;
  const auto r = train<double>(m, chunks, {}, cfg);
  ASSERT_EQ(r.log.losses.size(), 1u);
  const auto before = m.params.list();
  auto after_model = r.last;
  const auto after = after_model.params.list();
  std::size_t changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t k = 0; k < before[i]->value.size(); ++k) changed += before[i]->value[k] != after[i]->value[k];
  }
  EXPECT_GT(changed, 0u);
  EXPECT_EQ(r.best_step, 1u);
}

TEST(Train, ExactStepCountAndLossDrops) {
  const auto chunks = toy_chunks(30, 4);
  auto cfg = TrainConfig::desk(400);
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  const auto r = train<double>(init_model<double>(tiny_config(), chunks, 1), chunks, {}, cfg);
  ASSERT_EQ(r.log.losses.size(), 400u);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += r.log.losses[i];
    last += r.log.losses[390 + i];
  }
  EXPECT_LT(last, first * 0.6);
  EXPECT_NE(r.log.loss_tsv().find("400\t"), std::string::npos);
}

TEST(Train, DeterministicWithDropout) {
  const auto chunks = toy_chunks(20, 5);
  auto mc = tiny_config();
  mc.dropout = 0.3;
  auto cfg = TrainConfig::desk(20);
  cfg.batch_size = 4;
  cfg.seed = 9;
  const auto a = train<double>(init_model<double>(mc, chunks, 9), chunks, {}, cfg);
  const auto b = train<double>(init_model<double>(mc, chunks, 9), chunks, {}, cfg);
  EXPECT_EQ(a.log.losses, b.log.losses);
  EXPECT_EQ(model::serialize_checkpoint(a.last, {}), model::serialize_checkpoint(b.last, {}));
  cfg.seed = 10;
  const auto c = train<double>(init_model<double>(mc, chunks, 9), chunks, {}, cfg);
  EXPECT_NE(a.log.losses, c.log.losses);
}

TEST(Train, GradientIsClippedBeforeUpdate) {
  // SGD with lr 1 moves parameters by exactly the clipped gradient
  const auto chunks = toy_chunks(10, 6);
  auto m = init_model<double>(tiny_config(), chunks, 1);
  Rng big(2);
  m.params.init_uniform(big, 3.0);
  auto cfg = TrainConfig::desk(1);
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.lr = 1.0;
  cfg.batch_size = 16;
  cfg.clip = 5.0;
  const auto r = train<double>(m, chunks, {}, cfg);
  auto after = r.last;
  const auto a = m.params.list(), b = after.params.list();
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i]->value.size(); ++k) {
      const double d = a[i]->value[k] - b[i]->value[k];
      sq += d * d;
    }
  }
  EXPECT_LE(std::sqrt(sq), 5.0 + 1e-12);
}

TEST(Train, ValidationAndHooks) {
  const auto chunks = toy_chunks(30, 7);
  const auto valid = toy_chunks(5, 70);
  auto cfg = TrainConfig::desk(30);
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  cfg.validate_every = 10;
  cfg.checkpoint_every = 15;
  std::vector<std::size_t> checkpoints, bests;
  TrainHooks<double> hooks;
  hooks.checkpoint = [&](const Model<double>&, std::size_t s) { checkpoints.push_back(s); };
  hooks.best = [&](const Model<double>&, std::size_t s) { bests.push_back(s); };
  const auto r = train<double>(init_model<double>(tiny_config(), chunks, 1), chunks, valid, cfg, hooks);
  ASSERT_EQ(r.log.validations.size(), 3u);
  EXPECT_EQ(r.log.validations[0].step, 10u);
  EXPECT_EQ(r.log.validations[2].step, 30u);
  EXPECT_EQ(checkpoints, (std::vector<std::size_t>{15, 30}));
  ASSERT_FALSE(bests.empty());
  EXPECT_EQ(bests.back(), r.best_step);
  double best = 1e300;
  for (const auto& v : r.log.validations) best = std::min(best, v.loss);
  auto best_model = r.best;
  EXPECT_NEAR(validate(best_model, valid).loss, best, 1e-12);
}

TEST(Train, ValidateRejectsEmptySet) {
  const auto chunks = toy_chunks(5, 8);
  auto m = init_model<double>(tiny_config(), chunks, 1);
  EXPECT_THROW(validate(m, {}), InputError);
}

TEST(Train, NonFiniteLossAborts) {
  const auto chunks = toy_chunks(5, 9);
  auto m = init_model<double>(tiny_config(), chunks, 1);
  m.params.out_b.value[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train<double>(m, chunks, {}, TrainConfig::desk(1)), NumericError);
}

TEST(Train, FloatPrecisionRuns) {
  const auto chunks = toy_chunks(10, 10);
  auto cfg = TrainConfig::desk(5);
  cfg.batch_size = 4;
  const auto r = train<float>(init_model<float>(tiny_config(), chunks, 1), chunks, {}, cfg);
  EXPECT_EQ(r.log.losses.size(), 5u);
  EXPECT_TRUE(std::isfinite(r.log.losses.back()));
}

TEST(Sweep, ColumnsAndCsvShape) {
  const auto pairs = build_pairs(toy::corpus(40, 11, {1, 4, 2, 3})).pairs;
  const auto split = split_corpus(pairs, 1);
  auto tc = TrainConfig::desk(3);
  tc.batch_size = 4;
  SweepOptions o;
  o.sizes = {ChunkSize::words(1), ChunkSize::sentence()};
  o.baseline = false;
  const auto r = sweep<double>(split, tiny_config(), tc, o);
  ASSERT_EQ(r.cells.size(), 3u);
  EXPECT_EQ(r.cells[0].column, "no-prediction");
  EXPECT_EQ(r.cells[1].column, "1");
  EXPECT_EQ(r.cells[2].column, "sentence");
  const auto csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,no-prediction,1,sentence");
  EXPECT_NE(csv.find("\nwer_micro,100.00,"), std::string::npos);
  EXPECT_NE(csv.find("\nwer_macro,"), std::string::npos);
  EXPECT_NE(r.to_text().find("WER (micro)"), std::string::npos);

  o.baseline = true;
  o.sizes = {ChunkSize::words(2)};
  const auto with_base = sweep<double>(split, tiny_config(), tc, o);
  ASSERT_EQ(with_base.cells.size(), 3u);
  EXPECT_EQ(with_base.cells[1].column, "baseline");
  EXPECT_TRUE(with_base.find("2")->ok);
}

TEST(Sweep, FailingCellIsReportedAndSweepContinues) {
  const auto pairs = build_pairs(toy::corpus(40, 12, {1, 4, 2, 3})).pairs;
  const auto split = split_corpus(pairs, 1);
  auto tc = TrainConfig::desk(2);
  tc.batch_size = 4;
  auto bad = tiny_config();
  bad.max_decode_factor = -1.0;  // rejected when each cell validates its config
  SweepOptions o;
  o.sizes = {ChunkSize::words(1), ChunkSize::words(3)};
  const auto r = sweep<double>(split, bad, tc, o);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_FALSE(r.cells[2].ok);
  EXPECT_FALSE(r.cells[3].ok);
  EXPECT_FALSE(r.cells[2].error.empty());
  EXPECT_NE(r.to_text().find("failed"), std::string::npos);
  EXPECT_NE(r.to_csv().find("wer_micro,100.00,"), std::string::npos);
}
