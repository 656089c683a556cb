#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>

#include "emofuse/encoder.hpp"
#include "emofuse/error.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace emofuse;
using emofuse::testing::TempDir;

namespace {

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value.c_str(), 1);
  }
  ~ScopedEnv() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

void copy_checkpoint(const std::filesystem::path& to) {
  std::filesystem::create_directories(to);
  for (const char* f : {"config.json", "vocab.json", "merges.txt", "model.safetensors"}) {
    std::filesystem::copy_file(emofuse::testing::tiny_roberta_dir() / f, to / f);
  }
}

}  // namespace

TEST(RobertaConfig, LoadsTinyCheckpointConfig) {
  const auto cfg = RobertaConfig::load(emofuse::testing::tiny_roberta_dir() / "config.json");
  EXPECT_EQ(cfg.hidden_size, 32);
  EXPECT_EQ(cfg.num_layers, 2);
  EXPECT_EQ(cfg.num_heads, 4);
  EXPECT_EQ(cfg.max_sequence_length(), 38);
}

TEST(TransformerEncoder, ClsMatchesReferenceImplementation) {
  const auto enc = TransformerEncoder::load(emofuse::testing::tiny_roberta_dir(), 12);
  std::ifstream in(emofuse::testing::tiny_roberta_dir() / "expected.json");
  const auto ref = nlohmann::json::parse(in);
  for (const auto& c : ref["cases"]) {
    const auto text = c["text"].get<std::string>();
    EXPECT_EQ(enc->token_ids(text), c["ids"].get<std::vector<int>>()) << text;
    const auto expected = c["cls"].get<std::vector<double>>();
    const Vector cls = enc->encode(text);
    ASSERT_EQ(cls.size(), static_cast<Eigen::Index>(expected.size()));
    for (std::size_t k = 0; k < expected.size(); ++k) {
      EXPECT_NEAR(cls(static_cast<Eigen::Index>(k)), expected[k], 2e-5) << text << " dim " << k;
    }
  }
}

TEST(TransformerEncoder, RejectsLengthBeyondPositionTable) {
  EXPECT_THROW(TransformerEncoder::load(emofuse::testing::tiny_roberta_dir(), 39), Error);
}

TEST(RobertaEncoder, ForwardValidatesIds) {
  const auto enc = TransformerEncoder::load(emofuse::testing::tiny_roberta_dir(), 12);
  EXPECT_THROW(enc->model().forward(std::vector<int>{}), Error);
  EXPECT_THROW(enc->model().forward(std::vector<int>{0, 400, 2}), Error);
  EXPECT_THROW(enc->model().forward(std::vector<int>(39, 5)), Error);
}

TEST(RobertaEncoder, SaveLoadRoundTrip) {
  TempDir dir;
  const auto enc = TransformerEncoder::load(emofuse::testing::tiny_roberta_dir(), 12);
  SafeTensorsWriter w;
  enc->model().save(w, "encoder.");
  w.write(dir / "t.safetensors");
  RobertaEncoder<float> copy(enc->model().config());
  copy.load(SafeTensors::open(dir / "t.safetensors"), "encoder.");
  const std::vector<int> ids{0, 77, 385, 2};
  EXPECT_TRUE(copy.forward(ids).isApprox(enc->model().forward(ids), 0.0f));
}

TEST(RobertaEncoder, GradientsMatchFiniteDifferencesInDouble) {
  const auto cfg = RobertaConfig::load(emofuse::testing::tiny_roberta_dir() / "config.json");
  RobertaEncoder<double> model(cfg);
  model.load(SafeTensors::open(emofuse::testing::tiny_roberta_dir() / "model.safetensors"));
  model.set_trainable(true);
  const std::vector<int> ids{0, 77, 385, 80, 287, 2};
  std::mt19937_64 gen(5);
  const Mat<double> w = Mat<double>::Random(static_cast<Eigen::Index>(ids.size()), cfg.hidden_size);

  for (const bool with_dropout : {false, true}) {
    const Rng base(21, 2);
    const auto loss = [&] {
      Rng r = base;
      const auto h = model.forward(ids, nullptr, with_dropout ? &r : nullptr);
      return (h.array() * w.array()).sum();
    };
    for (auto* p : model.params()) p->zero_grad();
    Rng r = base;
    RobertaEncoder<double>::Trace trace;
    model.forward(ids, &trace, with_dropout ? &r : nullptr);
    model.backward(trace, w);
    for (auto* p : model.params()) {
      const double err = emofuse::testing::max_relative_error(*p, loss, 6, gen, 1e-6);
      EXPECT_LT(err, 1e-5) << p->name << (with_dropout ? " (dropout)" : "");
    }
  }
}

TEST(Projection, ShapeTanhRangeAndDropout) {
  Projection proj(8, 5, 0.5);
  Rng init(1, 1);
  proj.init(init);
  const Vector r = Vector::Random(8);
  const Vector eval = proj.forward(r, Mode::eval);
  ASSERT_EQ(eval.size(), 5);
  EXPECT_LE(eval.cwiseAbs().maxCoeff(), 1.0);
  Rng drop(1, 2);
  EXPECT_EQ(proj.forward(r, Mode::eval, &drop), eval);  // eval ignores the rng
  Rng drop2(1, 2);
  const Vector train = proj.forward(r, Mode::train, &drop2);
  for (Eigen::Index i = 0; i < 5; ++i) {
    EXPECT_TRUE(train(i) == 0.0 || std::abs(train(i) - 2.0 * eval(i)) < 1e-12);
  }
  EXPECT_THROW(proj.forward(Vector::Zero(7), Mode::eval), Error);
}

TEST(Projection, GradientsMatchFiniteDifferences) {
  Projection proj(10, 6, 0.3);
  Rng init(4, 1);
  proj.init(init);
  const Vector r = Vector::Random(10);
  const Vector w = Vector::Random(6);
  const Rng base(8, 2);
  const auto loss = [&] {
    Rng d = base;
    return w.dot(proj.forward(r, Mode::train, &d));
  };
  for (auto* p : proj.params()) p->zero_grad();
  Rng d = base;
  Projection::Trace trace;
  proj.forward(r, Mode::train, &d, &trace);
  const Vector dr = proj.backward(trace, w);
  std::mt19937_64 gen(2);
  for (auto* p : proj.params()) EXPECT_LT(emofuse::testing::max_relative_error(*p, loss, 60, gen), 1e-7);
  Param<double> input("r", 10, 1);
  input.value = r;
  input.grad = dr;
  const auto input_loss = [&] {
    Rng dd = base;
    return w.dot(proj.forward(input.value, Mode::train, &dd));
  };
  EXPECT_LT(emofuse::testing::max_relative_error(input, input_loss, 10, gen), 1e-7);
}

TEST(EncoderConfig, Validation) {
  EncoderConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.dropout_p = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.projection_dim = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(ResolveCheckpoint, LocalPathWinsAndIsChecked) {
  EncoderConfig cfg;
  cfg.local_path = emofuse::testing::tiny_roberta_dir().string();
  EXPECT_EQ(resolve_checkpoint(cfg), emofuse::testing::tiny_roberta_dir());
  cfg.local_path = "/definitely/not/here";
  EXPECT_THROW(resolve_checkpoint(cfg), Error);
}

TEST(ResolveCheckpoint, OfflineModeRequiresLocalPath) {
  ScopedEnv offline("EMOFUSE_OFFLINE", "1");
  EXPECT_TRUE(offline_mode());
  EncoderConfig cfg;
  try {
    resolve_checkpoint(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
  cfg.local_path = emofuse::testing::tiny_roberta_dir().string();
  EXPECT_NO_THROW(resolve_checkpoint(cfg));
}

TEST(ResolveCheckpoint, ModelDirAndHubCacheLayouts) {
  ScopedEnv online("EMOFUSE_OFFLINE", "0");
  ScopedEnv hf_online("HF_HUB_OFFLINE", "0");
  TempDir dir;
  copy_checkpoint(dir / "models" / "tiny");
  {
    ScopedEnv models("EMOFUSE_MODEL_DIR", (dir / "models").string());
    EncoderConfig cfg;
    cfg.checkpoint_name = "tiny";
    EXPECT_EQ(resolve_checkpoint(cfg), dir / "models" / "tiny");
  }
  const auto repo = dir / "hub" / "models--org--tiny";
  copy_checkpoint(repo / "snapshots" / "abc123");
  std::filesystem::create_directories(repo / "refs");
  std::ofstream(repo / "refs" / "main") << "abc123";
  ScopedEnv hub("HF_HUB_CACHE", (dir / "hub").string());
  EncoderConfig cfg;
  cfg.checkpoint_name = "org/tiny";
  EXPECT_EQ(resolve_checkpoint(cfg), repo / "snapshots" / "abc123");
  cfg.checkpoint_name = "org/absent";
  EXPECT_THROW(resolve_checkpoint(cfg), Error);
}
