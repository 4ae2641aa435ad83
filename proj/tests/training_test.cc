// Copyright (c) 2026 The ukat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ukat/training.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.h"
#include "ukat/error.h"
#include "ukat/synthetic.h"

namespace ukat {
namespace {

using ::ukat::testing::RandomSpectrogram;
using ::ukat::testing::SmallVocab;
using ::ukat::testing::TempDir;

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kState;
}

// Textbook form, only trustworthy away from saturation.
double NaiveBce(double z, double y) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
}

TEST(BceTest, ZeroLogitsGiveLnTwo) {
  const std::vector<double> z(12, 0.0);
  for (double y : {0.0, 0.3, 0.5, 1.0}) {
    const std::vector<double> t(12, y);
    EXPECT_NEAR(BceLoss(z, t).loss, std::log(2.0), 1e-15);
  }
  const auto r = BceLoss(z, std::vector<double>(12, 0.5));
  for (double g : r.grad) EXPECT_EQ(g, 0.0);
}

TEST(BceTest, MatchesNaiveFormAndFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> zd(-8.0, 8.0), yd(0.0, 1.0);
  std::vector<double> z(1000), y(1000);
  for (int i = 0; i < 1000; ++i) {
    z[i] = zd(rng);
    y[i] = yd(rng);
  }
  const auto r = BceLoss(z, y);
  double naive = 0.0;
  for (int i = 0; i < 1000; ++i) naive += NaiveBce(z[i], y[i]);
  EXPECT_NEAR(r.loss, naive / 1000.0, 1e-9);
  const double h = 1e-5;
  for (int i = 0; i < 1000; i += 37) {
    auto zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const double numeric = (BceLoss(zp, y).loss - BceLoss(zm, y).loss) / (2 * h);
    EXPECT_LT(std::abs(numeric - r.grad[i]) / std::max(std::abs(r.grad[i]), 1e-12), 1e-6);
  }
}

TEST(BceTest, StableAtSaturation) {
  const std::vector<double> z{800.0, -800.0};
  const auto r = BceLoss(z, std::vector<double>{1.0, 0.0});
  EXPECT_EQ(r.loss, 0.0);
  const auto wrong = BceLoss(z, std::vector<double>{0.0, 1.0});
  EXPECT_NEAR(wrong.loss, 800.0, 1e-9);
}

TEST(BceTest, Errors) {
  const std::vector<double> z{0.0, std::nan("")};
  EXPECT_EQ(KindOf([&] { BceLoss(z, std::vector<double>{0.0, 0.0}); }), ErrorKind::kNumeric);
  const std::vector<double> ok{0.0, 1.0};
  EXPECT_EQ(KindOf([&] { BceLoss(ok, std::vector<double>{0.0, 1.5}); }), ErrorKind::kArgument);
  EXPECT_EQ(KindOf([&] { BceLoss(ok, std::vector<double>{0.0}); }), ErrorKind::kShape);
}

TEST(AdamTest, FirstStepHandValue) {
  std::vector<std::vector<double>> p{{1.0}};
  const std::vector<std::vector<double>> g{{0.5}};
  AdamState s;
  AdamStep(p, g, {true}, s, {});
  EXPECT_NEAR(p[0][0], 1.0 - 0.001 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0][0], 0.999, 1e-9);
  EXPECT_EQ(s.step, 1);
}

TEST(AdamTest, ZeroGradientFromFreshStateIsFixedPoint) {
  std::vector<std::vector<float>> p{{1.0f, -2.0f}, {3.0f}};
  const auto before = p;
  AdamState s;
  AdamStep(p, {{0.0f, 0.0f}, {0.0f}}, {true, true}, s, {});
  EXPECT_EQ(p, before);
}

TEST(AdamTest, FrozenTensorsAndDeterminism) {
  std::vector<std::vector<double>> a{{1.0}, {2.0}}, b = a;
  const std::vector<std::vector<double>> g{{0.3}, {0.7}};
  AdamState sa, sb;
  for (int i = 0; i < 3; ++i) {
    AdamStep(a, g, {true, false}, sa, {});
    AdamStep(b, g, {true, false}, sb, {});
  }
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[1][0], 2.0);
}

TEST(AdamTest, NonFiniteGradientLeavesStateUntouched) {
  std::vector<std::vector<double>> p{{1.0}, {2.0}};
  AdamState s;
  AdamStep(p, {{0.1}, {0.1}}, {true, true}, s, {});
  const auto p0 = p;
  const auto m0 = s.m;
  EXPECT_EQ(KindOf([&] { AdamStep(p, {{0.1}, {INFINITY}}, {true, true}, s, {}); }),
            ErrorKind::kNumeric);
  EXPECT_EQ(p, p0);
  EXPECT_EQ(s.m, m0);
  EXPECT_EQ(s.step, 1);
}

Waveform Ramp(std::size_t n) {
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(static_cast<float>(i));
  return w;
}

TEST(CropTest, ExactLengthIsIdentity) {
  Rng rng(1);
  const Waveform w = Ramp(16000);
  EXPECT_EQ(RandomCrop(w, 1.0, rng).samples, w.samples);
}

TEST(CropTest, ShortInputIsRightPadded) {
  Rng rng(1);
  const Waveform out = RandomCrop(Ramp(8000), 1.0, rng);
  ASSERT_EQ(out.size(), 16000u);
  for (int i = 0; i < 8000; ++i) ASSERT_EQ(out.samples[i], static_cast<float>(i));
  for (int i = 8000; i < 16000; ++i) ASSERT_EQ(out.samples[i], 0.0f);
}

TEST(CropTest, StartsAreUniformVerbatimSlices) {
  Rng rng(2024);
  const Waveform w = Ramp(160000);
  std::vector<int> hist(16, 0);
  std::size_t lo = 160000, hi = 0;
  for (int draw = 0; draw < 10000; ++draw) {
    const Waveform c = RandomCrop(w, 1.0, rng);
    ASSERT_EQ(c.size(), 16000u);
    const auto start = static_cast<std::size_t>(c.samples[0]);
    for (std::size_t j = 0; j < 16000; j += 997) ASSERT_EQ(c.samples[j], w.samples[start + j]);
    ASSERT_EQ(c.samples.back(), w.samples[start + 15999]);
    lo = std::min(lo, start);
    hi = std::max(hi, start);
    ++hist[start * 16 / 144001];
  }
  EXPECT_LE(hi, 144000u);
  double chi2 = 0.0;
  for (int h : hist) chi2 += (h - 625.0) * (h - 625.0) / 625.0;
  EXPECT_LT(chi2, 30.578);  // chi-square, 15 dof, alpha 0.01
  EXPECT_LT(lo, 1000u);
  EXPECT_GT(hi, 143000u);
}

TEST(CropTest, FitToDurationPadsKeywordsToTenSeconds) {
  const Waveform out = FitToDuration(Ramp(16000), 10.0);
  ASSERT_EQ(out.size(), 160000u);
  EXPECT_EQ(out.samples[15999], 15999.0f);
  EXPECT_EQ(out.samples[16000], 0.0f);
  EXPECT_EQ(FitToDuration(Ramp(200000), 10.0).size(), 160000u);
}

TEST(PadBatchTest, LengthsAndLogFloorRows) {
  std::mt19937_64 rng(3);
  std::vector<LogMelSpectrogram> items{RandomSpectrogram(97, 64, rng), RandomSpectrogram(50, 64, rng)};
  const float floor = static_cast<float>(std::log(1e-10));
  const auto b = PadBatch(items, floor);
  EXPECT_EQ(b.frames, 97);
  EXPECT_EQ(b.lengths, (std::vector<int>{97, 50}));
  for (int t = 50; t < 97; ++t)
    for (int m = 0; m < 64; ++m) ASSERT_EQ(b.values[(97 + t) * 64 + m], floor);
  const auto back = UnpadBatch(b);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].values, items[0].values);
  EXPECT_EQ(back[1].values, items[1].values);
  EXPECT_EQ(back[1].frames, 50);
}

TEST(PadBatchTest, EqualLengthsNeedNoPadding) {
  std::mt19937_64 rng(3);
  std::vector<LogMelSpectrogram> items{RandomSpectrogram(20, 8, rng), RandomSpectrogram(20, 8, rng)};
  const auto b = PadBatch(items, -1.0f);
  EXPECT_EQ(b.lengths, (std::vector<int>{20, 20}));
  EXPECT_EQ(b.values.size(), 2u * 20 * 8);
  EXPECT_EQ(KindOf([] { PadBatch({}, 0.0f); }), ErrorKind::kArgument);
}

TEST(RankTest, TopFourByScoreThenEpoch) {
  const double maps[] = {0.2, 0.5, 0.3, 0.6, 0.4, 0.55};
  std::vector<CheckpointScore> s;
  for (int i = 0; i < 6; ++i) s.push_back({i + 1, maps[i]});
  const auto r = RankCheckpoints(s, 4);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].epoch, 4);
  EXPECT_EQ(r[1].epoch, 6);
  EXPECT_EQ(r[2].epoch, 2);
  EXPECT_EQ(r[3].epoch, 5);
  const std::vector<CheckpointScore> tied{{3, 0.5}, {1, 0.5}, {2, 0.5}};
  EXPECT_EQ(RankCheckpoints(tied, 2)[0].epoch, 1);
  EXPECT_EQ(RankCheckpoints(tied, 2)[1].epoch, 2);
}

TEST(TrainConfigTest, ParseAndFormatRoundTrip) {
  const TrainConfig c = ParseTrainConfig(
      "# ablation\n"
      "crop_seconds = 1.5\n"
      "batch_size = 16   # small\n"
      "random_crop = off\n"
      "psl = false\n"
      "lr_schedule = \"cosine\"\n"
      "seed = 77\n");
  EXPECT_EQ(c.crop_seconds, 1.5);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_FALSE(c.random_crop);
  EXPECT_FALSE(c.psl);
  EXPECT_TRUE(c.speech_on_target);
  EXPECT_EQ(c.lr_schedule, "cosine");
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.max_epochs, 500);
  const TrainConfig again = ParseTrainConfig(FormatTrainConfig(c));
  EXPECT_EQ(FormatTrainConfig(again), FormatTrainConfig(c));
}

TEST(TrainConfigTest, Defaults) {
  const TrainConfig c;
  EXPECT_EQ(c.crop_seconds, 1.0);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.top_k, 4);
  EXPECT_EQ(c.lr_schedule, "constant");
}

TEST(TrainConfigTest, Errors) {
  EXPECT_EQ(KindOf([] { ParseTrainConfig("crop = 1\n"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { ParseTrainConfig("batch_size = 0\n"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { ParseTrainConfig("learning_rate = -1\n"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([] { ParseTrainConfig("psl = maybe\n"); }), ErrorKind::kConfig);
  try {
    ParseTrainConfig("seed = 1\n\nbogus = 2\n");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

Waveform Noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(static_cast<float>(g(rng)));
  return w;
}

TEST(PslTest, ConstantTeacherGivesOneHalf) {
  const auto v = SmallVocab();
  Model teacher = BuildModel(ArchitectureConfig::Tiny(v.size()), v, 1);
  for (auto& w : teacher.tensor("classifier.weight").data) w = 0.0f;
  PslTeacher t(teacher, v);
  const auto y = GeneratePsl(t, Noise(16000, 1));
  EXPECT_EQ(y, (SoftLabelVector{0.5f, 0.5f, 0.5f, 0.0f, 0.0f}));
}

TEST(PslTest, TeacherEqualsDirectForward) {
  const auto v = SmallVocab();
  Model m = BuildModel(ArchitectureConfig::Tiny(v.size()), v, 4);
  ::ukat::testing::PerturbBatchNorm(&m, 4);
  PslTeacher t(m, v);
  const Waveform crop = Noise(16000, 2);
  const auto y = t.Generate(crop);

  Network<float> net(m);
  const auto feats = ExtractLogMel(crop, m.frontend);
  const auto& z = net.Forward({1, feats.frames, feats.n_mels, feats.values, {feats.frames}}, Mode::kEval);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(y[k], Sigmoid(z[k]));
  EXPECT_EQ(y[3], 0.0f);
  EXPECT_EQ(y[4], 0.0f);
}

TEST(PslTest, TeacherGathersByName) {
  const auto student = SmallVocab();
  const auto tv = LabelVocabulary::Merge({"Music", "Speech", "Dog", "Car"}, {});
  Model m = BuildModel(ArchitectureConfig::Tiny(tv.size()), tv, 5);
  PslTeacher t(m, student);
  Predictor direct(m);
  const Waveform crop = Noise(12000, 3);
  const auto p = direct.Predict(crop);
  const auto y = t.Generate(crop);
  EXPECT_EQ(y[0], p[1]);
  EXPECT_EQ(y[1], p[2]);
  EXPECT_EQ(y[2], p[0]);

  const auto missing = LabelVocabulary::Merge({"Speech"}, {});
  EXPECT_EQ(KindOf([&] { PslTeacher(BuildModel(ArchitectureConfig::Tiny(1), missing, 0), student); }),
            ErrorKind::kConfig);
}

TEST(PredictorTest, ResamplesAndBatchesConsistently) {
  const auto v = SmallVocab();
  Model m = BuildModel(ArchitectureConfig::Tiny(v.size()), v, 6);
  ::ukat::testing::PerturbBatchNorm(&m, 6);
  Predictor p(m);
  const Waveform a = Noise(16000, 7), b = Noise(9000, 8);
  const auto pa = p.Predict(a);
  const auto pb = p.Predict(b);
  std::vector<LogMelSpectrogram> items{p.extractor().Extract(a), p.extractor().Extract(b)};
  const auto both = p.PredictBatch(items);
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(both[k], pa[k], 1e-6);
    EXPECT_NEAR(both[5 + k], pb[k], 1e-6);
  }
  Waveform hi = Resample(a, 32000);
  EXPECT_EQ(p.Predict(hi).size(), 5u);
  for (float s : pa) {
    EXPECT_GE(s, 0.0f);
    EXPECT_LE(s, 1.0f);
  }
}

// A tiny synthetic corpus shared by the Train() tests.
class TrainFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("train");
    SyntheticSpec spec;
    spec.num_keywords = 2;
    spec.num_events = 3;
    spec.train_per_class = 4;
    spec.valid_per_class = 2;
    spec.eval_per_class = 1;
    spec.negative_streams = 1;
    spec.at_seconds = 2.0;
    spec.negative_seconds = 2.0;
    spec.seed = 3;
    ds_ = new SyntheticDataset(GenerateSyntheticDataset(spec, (*dir_) / "ds"));
  }
  static void TearDownTestSuite() {
    delete ds_;
    delete dir_;
  }

  static TrainData Data() {
    return {ParseManifest(ds_->train_kws), ParseManifest(ds_->train_at), ParseManifest(ds_->valid)};
  }
  static Model Initial() {
    return BuildModel(ArchitectureConfig::Tiny(ds_->vocab.size()), ds_->vocab, 11);
  }
  static TrainConfig Config() {
    TrainConfig c;
    c.max_epochs = 3;
    c.batch_size = 8;
    c.top_k = 2;
    c.seed = 5;
    c.learning_rate = 0.01;
    return c;
  }

  static TempDir* dir_;
  static SyntheticDataset* ds_;
};

TempDir* TrainFixture::dir_ = nullptr;
SyntheticDataset* TrainFixture::ds_ = nullptr;

TEST_F(TrainFixture, SeededRunsAreBitIdentical) {
  AudioStore a1(16000), a2(16000);
  const auto r1 = Train(Config(), Initial(), Data(), a1);
  const auto r2 = Train(Config(), Initial(), Data(), a2);
  EXPECT_EQ(SerializeModel(r1.final_model), SerializeModel(r2.final_model));
  ASSERT_EQ(r1.history.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r1.history[i].train_loss, r2.history[i].train_loss);
  TrainConfig other = Config();
  other.seed = 6;
  AudioStore a3(16000);
  EXPECT_NE(SerializeModel(Train(other, Initial(), Data(), a3).final_model),
            SerializeModel(r1.final_model));
}

TEST_F(TrainFixture, CheckpointDirectoryHoldsTopK) {
  AudioStore audio(16000);
  TrainOptions opts;
  opts.checkpoint_dir = (*dir_) / "ckpt";
  int callbacks = 0;
  opts.on_epoch = [&](const EpochStats&) { ++callbacks; };
  const auto r = Train(Config(), Initial(), Data(), audio, opts);
  EXPECT_EQ(callbacks, 3);
  ASSERT_EQ(r.ranking.size(), 2u);
  ASSERT_EQ(r.ranked_models.size(), 2u);
  std::ifstream in(opts.checkpoint_dir + "/ranking.json");
  const auto j = nlohmann::json::parse(in);
  ASSERT_EQ(j.size(), 2u);
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(opts.checkpoint_dir)) {
    files += entry.path().extension() == ".ukat";
  }
  EXPECT_EQ(files, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(j[i]["epoch"].get<int>(), r.ranking[i].epoch);
    const auto path = opts.checkpoint_dir + "/epoch_" + std::to_string(r.ranking[i].epoch) + ".ukat";
    EXPECT_EQ(LoadModel(path), r.ranked_models[i]);
  }
}

TEST_F(TrainFixture, LossFallsOnSeparableToyProblem) {
  AudioStore audio(16000);
  TrainConfig c = Config();
  c.max_epochs = 12;
  const auto r = Train(c, Initial(), Data(), audio);
  ASSERT_FALSE(r.diverged);
  EXPECT_LT(r.history.back().train_loss, r.initial_loss);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
}

TEST_F(TrainFixture, AblationTogglesAreConfigOnly) {
  AudioStore audio(16000);
  TrainConfig c = Config();
  c.max_epochs = 1;
  c.random_crop = false;
  c.uncropped_seconds = 2.0;
  c.psl = false;
  const auto r = Train(c, Initial(), Data(), audio);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_FALSE(r.diverged);
}

TEST_F(TrainFixture, HugeLearningRateStopsCleanly) {
  AudioStore audio(16000);
  TrainConfig c = Config();
  c.learning_rate = 1e30;
  c.max_epochs = 4;
  const auto r = Train(c, Initial(), Data(), audio);
  // Either the run diverges and keeps its last finite snapshot, or it
  // survives; in both cases every stored value is finite.
  for (const auto& t : r.final_model.tensors)
    for (float v : t.data) ASSERT_TRUE(std::isfinite(v)) << t.name;
}

TEST_F(TrainFixture, EmptyInputsAreArgumentErrors) {
  AudioStore audio(16000);
  TrainData empty;
  EXPECT_EQ(KindOf([&] { Train(Config(), Initial(), empty, audio); }), ErrorKind::kArgument);
  TrainData no_valid = Data();
  no_valid.valid.clear();
  EXPECT_EQ(KindOf([&] { Train(Config(), Initial(), no_valid, audio); }), ErrorKind::kArgument);
}

}  // namespace
}  // namespace ukat
