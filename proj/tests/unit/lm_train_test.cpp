#include <gtest/gtest.h>

#include <sstream>

#include "othello/lm/train.hpp"

namespace othello::lm {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

ModelConfig small() {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.dim = 16;
  cfg.seed = 8;
  return cfg;
}

const Dataset& dataset() {
  static const Dataset ds = build_dataset(synthesize_games(40, 1), 40, 0.25, 2);
  return ds;
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.learning_rate = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
  cfg = {};
  cfg.steps = -1;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
  cfg = {};
  cfg.beta2 = 1.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
}

TEST(Train, ZeroStepsLeavesModelUnchanged) {
  Model<float> m(small());
  const std::vector<float> before(m.parameters().begin(), m.parameters().end());
  TrainConfig cfg;
  cfg.steps = 0;
  const TrainResult r = train(m, dataset(), cfg);
  EXPECT_EQ(r.steps_run, 0);
  EXPECT_TRUE(r.curve.empty());
  EXPECT_TRUE(std::equal(before.begin(), before.end(), m.parameters().begin()));
}

TEST(Train, EmptyTrainingSplit) {
  Model<float> m(small());
  Dataset empty;
  TrainConfig cfg;
  cfg.steps = 1;
  EXPECT_EQ(code_of([&] { train(m, empty, cfg); }), ErrorCode::kEmptyInput);
}

TEST(Train, NonFiniteIsReported) {
  Model<float> m(small());
  m.parameters()[0] = std::numeric_limits<float>::quiet_NaN();
  Dataset ds = dataset();
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = static_cast<int>(ds.train.size());
  EXPECT_EQ(code_of([&] { train(m, ds, cfg); }), ErrorCode::kNonFinite);
}

TEST(Train, Deterministic) {
  TrainConfig cfg;
  cfg.steps = 15;
  cfg.batch_size = 4;
  cfg.eval_every = 5;
  cfg.learning_rate = 1e-3;
  cfg.seed = 4;
  Model<float> a(small()), b(small());
  const TrainResult ra = train(a, dataset(), cfg);
  const TrainResult rb = train(b, dataset(), cfg);
  ASSERT_EQ(ra.curve.size(), 15u);
  for (std::size_t i = 0; i < ra.curve.size(); ++i) {
    EXPECT_EQ(ra.curve[i].train_loss, rb.curve[i].train_loss);
    EXPECT_EQ(ra.curve[i].val_loss, rb.curve[i].val_loss);
  }
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_TRUE(ra.curve[4].val_loss.has_value());
  EXPECT_FALSE(ra.curve[3].val_loss.has_value());
}

TEST(Train, RecordEveryAveragesTheWindow) {
  TrainConfig cfg;
  cfg.steps = 23;
  cfg.batch_size = 4;
  cfg.eval_every = 0;
  cfg.seed = 2;
  Model<float> a(small()), b(small());
  const TrainResult every = train(a, dataset(), cfg);
  cfg.record_every = 10;
  const TrainResult windowed = train(b, dataset(), cfg);
  ASSERT_EQ(windowed.curve.size(), 3u);
  EXPECT_EQ(windowed.curve[0].step, 10);
  EXPECT_EQ(windowed.curve[2].step, 23);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) first += every.curve[i].train_loss;
  for (int i = 20; i < 23; ++i) last += every.curve[i].train_loss;
  EXPECT_NEAR(windowed.curve[0].train_loss, first / 10, 1e-12);
  EXPECT_NEAR(windowed.curve[2].train_loss, last / 3, 1e-12);
  cfg.record_every = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kInvalidConfig);
}

TEST(Train, LossDecreases) {
  Model<float> m(small());
  TrainConfig cfg;
  cfg.steps = 150;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-3;
  cfg.eval_every = 0;
  const double before = evaluate_loss(m, dataset().sequences);
  EXPECT_NEAR(before, std::log(67.0), 0.2);
  int callbacks = 0;
  train(m, dataset(), cfg, [&](const LossPoint&) { ++callbacks; });
  EXPECT_EQ(callbacks, 150);
  const double after = evaluate_loss(m, dataset().sequences);
  EXPECT_LT(after, before - 1.0);
}

TEST(Train, EarlyStoppingRestoresBest) {
  Model<float> m(small());
  TrainConfig cfg;
  cfg.steps = 400;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-2;
  cfg.eval_every = 10;
  cfg.early_stop_patience = 2;
  const TrainResult r = train(m, dataset(), cfg);
  ASSERT_TRUE(r.best_val_loss.has_value());
  if (r.steps_run < cfg.steps) {
    std::vector<TokenSequence> val;
    for (std::size_t i : dataset().validation) val.push_back(dataset().sequences[i]);
    EXPECT_NEAR(evaluate_loss(m, val), *r.best_val_loss, 1e-9);
  }
}

TEST(Train, LossCurveRoundTrip) {
  const std::vector<LossPoint> curve{{1, 4.2, std::nullopt}, {2, 3.9, 4.0}};
  std::stringstream ss;
  write_loss_curve(ss, curve);
  EXPECT_EQ(ss.str(),
            "{\"step\":1,\"train_loss\":4.2}\n{\"step\":2,\"train_loss\":3.9,\"val_loss\":4.0}\n");
  const auto back = read_loss_curve(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].val_loss, 4.0);
  EXPECT_FALSE(back[0].val_loss.has_value());
  std::istringstream bad("{\"step\":1}\n");
  EXPECT_EQ(code_of([&] { read_loss_curve(bad); }), ErrorCode::kMalformed);
}

}  // namespace
}  // namespace othello::lm
