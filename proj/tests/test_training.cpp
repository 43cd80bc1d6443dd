#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "g2/training.hpp"

using namespace g2;
namespace fs = std::filesystem;

namespace {

constexpr int kTinySize = 32;
constexpr int kTinyK = kLandmarkCount;

struct TinyRig {
  GeneratorNet gen_e;
  GeneratorNet gen_n;
  DiscriminatorNet disc_e;
  DiscriminatorNet disc_n;
  IdentityNet idnet;
};

GeneratorConfig tiny_gen() {
  GeneratorConfig g;
  g.heatmap_channels = kTinyK;
  g.depth = 5;  // 32 = 2^5
  g.widths = {8, 16, 32};
  return g;
}

DiscriminatorConfig tiny_disc() {
  DiscriminatorConfig d;
  d.heatmap_channels = kTinyK;
  d.widths = {8, 16};
  d.strides = {2, 2};
  return d;
}

IdentityNetConfig tiny_idnet(int64_t n_classes) {
  IdentityNetConfig c;
  c.image_size = kTinySize;
  c.embed_dim = 16;
  c.n_classes = n_classes;
  c.widths = {4, 8, 8, 12, 12};
  return c;
}

TinyRig make_rig(uint64_t seed, int64_t n_classes = 3) {
  Rng r1(seed, "init/gen_e"), r2(seed, "init/gen_n"), r3(seed, "init/disc_e"),
      r4(seed, "init/disc_n"), r5(seed, "init/idnet");
  return TinyRig{GeneratorNet(tiny_gen(), r1), GeneratorNet(tiny_gen(), r2),
                 DiscriminatorNet(tiny_disc(), r3), DiscriminatorNet(tiny_disc(), r4),
                 IdentityNet(tiny_idnet(n_classes), r5)};
}

std::vector<Sample> tiny_samples(int n_subjects, int expressions, int intensities,
                                 uint64_t seed) {
  std::vector<Sample> out;
  for (int id = 0; id < n_subjects; ++id) {
    const SyntheticSubject subj = generate_subject(derive_seed(seed, "subject", id));
    auto [img_n, lm_n] = render_face(subj, ExpressionOffsets{});
    for (int e = 0; e < expressions; ++e) {
      for (int level = 1; level <= intensities; ++level) {
        const double intensity = static_cast<double>(level) / intensities;
        auto [img_e, lm_e] =
            render_face(subj, scale_offsets(expression_presets()[e].offsets, intensity));
        Sample s;
        s.subject_id = id;
        s.expression_label = expression_presets()[e].label;
        s.intensity = intensity;
        s.image_neutral = img_n;
        s.image_expr = img_e;
        s.lm_neutral = lm_n;
        s.lm_expr = lm_e;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

TrainConfig tiny_train_config(int64_t iterations) {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.iterations = iterations;
  cfg.image_size = kTinySize;
  cfg.heatmap_sigma = 0.5;
  cfg.checkpoint_every = 0;  // only the final checkpoint
  cfg.seed = 21;
  return cfg;
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("train_step: zero learning rate leaves parameters bit-identical") {
  TinyRig rig = make_rig(1);
  TrainConfig cfg = tiny_train_config(4);
  cfg.lr = 0.0;
  Trainer trainer(rig.gen_e, rig.gen_n, rig.disc_e, rig.disc_n, rig.idnet, cfg);

  std::vector<Sample> samples = tiny_samples(2, 2, 1, 31);
  Rng aug(5);
  Batch batch =
      make_batch(samples, {0, 1}, aug, cfg.preprocess_options(), PreprocessMode::kTrain);

  std::vector<Tensor> before;
  for (const NamedParam& p : rig.gen_e.parameters("gen_e")) before.push_back(p.tensor.clone());
  for (const NamedParam& p : rig.disc_e.parameters("disc_e")) before.push_back(p.tensor.clone());
  trainer.train_step(batch, 0);
  size_t k = 0;
  for (const NamedParam& p : rig.gen_e.parameters("gen_e")) {
    for (int64_t i = 0; i < p.tensor.numel(); ++i) CHECK(p.tensor[i] == before[k][i]);
    ++k;
  }
  for (const NamedParam& p : rig.disc_e.parameters("disc_e")) {
    for (int64_t i = 0; i < p.tensor.numel(); ++i) CHECK(p.tensor[i] == before[k][i]);
    ++k;
  }
}

TEST_CASE("train_step: report satisfies the weighted-sum identity") {
  TinyRig rig = make_rig(2);
  TrainConfig cfg = tiny_train_config(10);
  Trainer trainer(rig.gen_e, rig.gen_n, rig.disc_e, rig.disc_n, rig.idnet, cfg);
  std::vector<Sample> samples = tiny_samples(2, 2, 1, 32);
  Rng aug(6);
  Batch batch =
      make_batch(samples, {0, 2}, aug, cfg.preprocess_options(), PreprocessMode::kTrain);
  for (int64_t it = 0; it < 3; ++it) {
    LossReport r = trainer.train_step(batch, it);
    const double recomputed =
        r.g_adv + cfg.alpha1 * r.pixel + cfg.alpha2 * r.cyc + r.alpha3 * r.identity;
    CHECK(std::fabs(r.g_total - recomputed) <= 1e-10);
    CHECK(r.alpha3 == alpha3_schedule(it, cfg.iterations));
  }
}

TEST_CASE("train_step: the identity extractor receives no updates (freeze invariant)") {
  TinyRig rig = make_rig(3);
  TrainConfig cfg = tiny_train_config(6);
  Trainer trainer(rig.gen_e, rig.gen_n, rig.disc_e, rig.disc_n, rig.idnet, cfg);
  std::vector<Sample> samples = tiny_samples(2, 2, 1, 33);
  Rng aug(7);
  Batch batch =
      make_batch(samples, {1, 3}, aug, cfg.preprocess_options(), PreprocessMode::kTrain);

  std::vector<Tensor> before;
  for (const NamedParam& p : rig.idnet.parameters("idnet")) before.push_back(p.tensor.clone());
  trainer.train_step(batch, 0);
  trainer.train_step(batch, 1);
  size_t k = 0;
  for (const NamedParam& p : rig.idnet.parameters("idnet")) {
    for (int64_t i = 0; i < p.tensor.numel(); ++i) CHECK(p.tensor[i] == before[k][i]);
    ++k;
  }
}

TEST_CASE("discriminator update is detached from generator parameters") {
  TinyRig rig = make_rig(4);
  std::vector<Sample> samples = tiny_samples(2, 1, 1, 34);
  TrainConfig cfg = tiny_train_config(4);
  Rng aug(8);
  Batch batch =
      make_batch(samples, {0, 1}, aug, cfg.preprocess_options(), PreprocessMode::kTrain);

  // replicate the discriminator phase: generators must never be watched
  Tape tape;
  Var in_n = tape.input(batch.image_neutral);
  Var in_e = tape.input(batch.image_expr);
  Var hm = tape.input(batch.heatmap);
  Var fake_e = rig.gen_e.forward(tape, in_n, hm, true, /*trainable=*/false);
  Var real = rig.disc_e.forward(tape, in_n, hm, in_e, true, true);
  Var fake = rig.disc_e.forward(tape, in_n, hm, tape.detach(fake_e), true, true);
  Var loss = discriminator_adv_loss(tape, real, fake);
  tape.backward(loss);
  // generator parameters are absent from the tape: grad() must refuse them
  const NamedParam& gp = rig.gen_e.parameters("gen_e")[0];
  CHECK_THROWS_AS(tape.grad(gp.tensor), std::invalid_argument);
  // discriminator parameters did receive gradients
  const NamedParam& dp = rig.disc_e.parameters("disc_e")[0];
  const Tensor dg = tape.grad(dp.tensor);
  double mag = 0.0;
  for (int64_t i = 0; i < dg.numel(); ++i) mag += std::fabs(dg[i]);
  CHECK(mag > 0.0);
}

TEST_CASE("overfit smoke: pixel loss falls over 200 steps on one fixed batch") {
  TinyRig rig = make_rig(5);
  TrainConfig cfg = tiny_train_config(200);
  cfg.lr = 2e-4;
  Trainer trainer(rig.gen_e, rig.gen_n, rig.disc_e, rig.disc_n, rig.idnet, cfg);
  std::vector<Sample> samples = tiny_samples(1, 1, 1, 35);
  Rng aug(9);
  Batch batch = make_batch(samples, {0, 0}, aug, cfg.preprocess_options(), PreprocessMode::kTest);

  double first = 0.0, last = 0.0;
  for (int64_t it = 0; it < 200; ++it) {
    LossReport r = trainer.train_step(batch, it);
    if (it == 0) first = r.pixel;
    last = r.pixel;
  }
  INFO("pixel loss " << first << " -> " << last);
  CHECK(last < first);
}

TEST_CASE("train_loop: determinism, loss log format, resume") {
  const std::string dir_a = (fs::temp_directory_path() / "g2_train_a").string();
  const std::string dir_b = (fs::temp_directory_path() / "g2_train_b").string();
  const std::string dir_c = (fs::temp_directory_path() / "g2_train_c").string();
  for (const auto& d : {dir_a, dir_b, dir_c}) fs::remove_all(d);

  std::vector<Sample> samples = tiny_samples(2, 2, 1, 36);
  TrainConfig cfg = tiny_train_config(6);
  cfg.checkpoint_every = 3;

  auto run = [&](const std::string& dir) {
    TinyRig rig = make_rig(6);
    Trainer trainer(rig.gen_e, rig.gen_n, rig.disc_e, rig.disc_n, rig.idnet, cfg);
    return train_loop(trainer, samples, dir);
  };
  TrainLoopResult ra = run(dir_a);
  TrainLoopResult rb = run(dir_b);

  // bit-identical loss logs and final checkpoints
  CHECK(read_bytes(ra.loss_log) == read_bytes(rb.loss_log));
  CHECK(read_bytes(ra.final_checkpoint) == read_bytes(rb.final_checkpoint));

  // log format: one line per iteration, 8 tab-separated columns
  std::ifstream log(ra.loss_log);
  std::string line;
  int64_t lines = 0;
  while (std::getline(log, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), '\t') == 7);
  }
  CHECK(lines == cfg.iterations);

  // resume from the midpoint checkpoint reproduces the uninterrupted run
  {
    TinyRig rig = make_rig(6);
    Trainer trainer(rig.gen_e, rig.gen_n, rig.disc_e, rig.disc_n, rig.idnet, cfg);
    const std::string mid = (fs::path(dir_a) / "checkpoint_3.g2ck").string();
    REQUIRE(fs::exists(mid));
    const int64_t start = trainer.load_checkpoint(mid);
    CHECK(start == 3);
    TrainLoopResult rc = train_loop(trainer, samples, dir_c, start);
    CHECK(read_bytes(rc.final_checkpoint) == read_bytes(ra.final_checkpoint));
  }

  for (const auto& d : {dir_a, dir_b, dir_c}) fs::remove_all(d);
}

TEST_CASE("batch assembly is deterministic in (seed, iteration)") {
  std::vector<size_t> a = batch_indices(7, 123, 50, 5);
  std::vector<size_t> b = batch_indices(7, 123, 50, 5);
  CHECK(a == b);
  std::vector<size_t> c = batch_indices(7, 124, 50, 5);
  CHECK(a != c);
  for (size_t i : a) CHECK(i < 50);
}
