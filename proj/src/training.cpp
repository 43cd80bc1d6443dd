#include "g2/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "g2/checkpoint.hpp"

namespace fs = std::filesystem;

namespace g2 {

Batch make_batch(const std::vector<Sample>& pool, const std::vector<size_t>& indices, Rng& aug,
                 const PreprocessOptions& opt, PreprocessMode mode) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  std::vector<Tensor> neutral, expr, heat;
  for (size_t idx : indices) {
    PreprocessedPair pp = preprocess(pool.at(idx), mode, aug, opt);
    neutral.push_back(pp.image_neutral);
    expr.push_back(pp.image_expr);
    heat.push_back(pp.heatmap_expr);
  }
  return Batch{stack_batch(neutral), stack_batch(expr), stack_batch(heat)};
}

std::vector<size_t> batch_indices(uint64_t seed, int64_t iteration, size_t pool_size,
                                  int batch_size) {
  Rng rng(seed, "data", static_cast<uint64_t>(iteration));
  std::vector<size_t> out;
  out.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    out.push_back(static_cast<size_t>(rng.uniform_index(pool_size)));
  }
  return out;
}

Trainer::Trainer(GeneratorNet& gen_e, GeneratorNet& gen_n, DiscriminatorNet& disc_e,
                 DiscriminatorNet& disc_n, IdentityNet& idnet, const TrainConfig& cfg)
    : gen_e_(gen_e), gen_n_(gen_n), disc_e_(disc_e), disc_n_(disc_n), idnet_(idnet), cfg_(cfg) {
  if (cfg_.batch_size < 1 || cfg_.iterations < 1) {
    throw std::invalid_argument("trainer: batch size and iterations must be >= 1");
  }
  AdamHyper hyper;
  hyper.lr = cfg_.lr;
  std::vector<NamedParam> g_params = gen_e_.parameters("gen_e");
  for (NamedParam& p : gen_n_.parameters("gen_n")) g_params.push_back(std::move(p));
  std::vector<NamedParam> d_params = disc_e_.parameters("disc_e");
  for (NamedParam& p : disc_n_.parameters("disc_n")) d_params.push_back(std::move(p));
  optim_g_ = AdamOptimizer(std::move(g_params), hyper);
  optim_d_ = AdamOptimizer(std::move(d_params), hyper);
}

LossReport Trainer::train_step(const Batch& batch, int64_t iteration) {
  if (batch.image_neutral.extent(0) < 1) throw std::invalid_argument("train_step: empty batch");
  LossReport report;
  report.iteration = iteration;
  report.alpha3 = alpha3_schedule(iteration, cfg_.iterations, cfg_.alpha3_start,
                                  cfg_.alpha3_end, cfg_.alpha3_knee_frac);

  // --- discriminator update on real and detached fake triplets ---
  {
    Tape tape;
    Var in_n = tape.input(batch.image_neutral);
    Var in_e = tape.input(batch.image_expr);
    Var hm = tape.input(batch.heatmap);
    // fakes detached: generators run untracked here
    Var fake_e = gen_e_.forward(tape, in_n, hm, /*training=*/true, /*trainable=*/false);
    Var fake_n = gen_n_.forward(tape, in_e, hm, /*training=*/true, /*trainable=*/false);

    Var real_e = disc_e_.forward(tape, in_n, hm, in_e, true, /*trainable=*/true);
    Var fke_e = disc_e_.forward(tape, in_n, hm, tape.detach(fake_e), true, true);
    Var real_n = disc_n_.forward(tape, in_e, hm, in_n, true, true);
    Var fke_n = disc_n_.forward(tape, in_e, hm, tape.detach(fake_n), true, true);

    Var d_loss = tape.add(discriminator_adv_loss(tape, real_e, fke_e),
                          discriminator_adv_loss(tape, real_n, fke_n));
    tape.backward(d_loss);
    optim_d_.step(tape, cfg_.grad_clip_norm);
    report.d_adv = d_loss.value.value();
  }

  // --- generator update through the full objective ---
  {
    Tape tape;
    Var in_n = tape.input(batch.image_neutral);
    Var in_e = tape.input(batch.image_expr);
    Var hm = tape.input(batch.heatmap);

    Var fake_e = gen_e_.forward(tape, in_n, hm, true, /*trainable=*/true);
    Var fake_n = gen_n_.forward(tape, in_e, hm, true, true);
    Var rec_n = gen_n_.forward(tape, fake_e, hm, true, true);
    Var rec_e = gen_e_.forward(tape, fake_n, hm, true, true);

    Var d_on_fake_e = disc_e_.forward(tape, in_n, hm, fake_e, true, /*trainable=*/false);
    Var d_on_fake_n = disc_n_.forward(tape, in_e, hm, fake_n, true, false);

    Var adv = tape.add(generator_adv_loss(tape, d_on_fake_e),
                       generator_adv_loss(tape, d_on_fake_n));
    Var pix = tape.add(pixel_loss(tape, fake_e, in_e), pixel_loss(tape, fake_n, in_n));
    Var cyc = tape.add(cycle_loss(tape, in_n, rec_n), cycle_loss(tape, in_e, rec_e));
    FeatureFn frozen_f = [this](Tape& t, const Var& img) {
      return idnet_.embed(t, img, /*trainable=*/false);
    };
    Var idl = tape.add(identity_loss(tape, frozen_f, in_n, fake_e),
                       identity_loss(tape, frozen_f, in_e, fake_n));
    Var g_loss =
        total_generator_loss(tape, adv, pix, cyc, idl, cfg_.alpha1, cfg_.alpha2, report.alpha3);
    tape.backward(g_loss);
    optim_g_.step(tape, cfg_.grad_clip_norm);

    report.g_adv = adv.value.value();
    report.pixel = pix.value.value();
    report.cyc = cyc.value.value();
    report.identity = idl.value.value();
    report.g_total = g_loss.value.value();
  }
  return report;
}

namespace {

void append_optimizer_blobs(std::vector<CheckpointBlob>& blobs, const AdamOptimizer& optim) {
  const auto& params = optim.params();
  const auto& states = optim.states();
  for (size_t i = 0; i < params.size(); ++i) {
    blobs.push_back({"adam.m." + params[i].name, states[i].m});
    blobs.push_back({"adam.v." + params[i].name, states[i].v});
    blobs.push_back({"adam.t." + params[i].name,
                     Tensor::scalar(static_cast<double>(states[i].t))});
  }
}

void restore_optimizer_blobs(const std::vector<CheckpointBlob>& blobs, AdamOptimizer& optim) {
  const auto& params = optim.params();
  auto& states = optim.states();
  for (size_t i = 0; i < params.size(); ++i) {
    states[i].m.copy_from(checkpoint_get(blobs, "adam.m." + params[i].name));
    states[i].v.copy_from(checkpoint_get(blobs, "adam.v." + params[i].name));
    states[i].t =
        static_cast<int64_t>(checkpoint_get(blobs, "adam.t." + params[i].name).value());
  }
}

void append_named(std::vector<CheckpointBlob>& blobs, const std::vector<NamedParam>& named) {
  for (const NamedParam& p : named) blobs.push_back({p.name, p.tensor});
}

void restore_named(const std::vector<CheckpointBlob>& blobs, std::vector<NamedParam> named) {
  for (NamedParam& p : named) p.tensor.copy_from(checkpoint_get(blobs, p.name));
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path, int64_t iteration) const {
  std::vector<CheckpointBlob> blobs;
  blobs.push_back({"meta.iteration", Tensor::scalar(static_cast<double>(iteration))});
  append_named(blobs, gen_e_.parameters("gen_e"));
  append_named(blobs, gen_e_.buffers("gen_e"));
  append_named(blobs, gen_n_.parameters("gen_n"));
  append_named(blobs, gen_n_.buffers("gen_n"));
  append_named(blobs, disc_e_.parameters("disc_e"));
  append_named(blobs, disc_e_.buffers("disc_e"));
  append_named(blobs, disc_n_.parameters("disc_n"));
  append_named(blobs, disc_n_.buffers("disc_n"));
  append_named(blobs, idnet_.parameters("idnet"));
  append_optimizer_blobs(blobs, optim_g_);
  append_optimizer_blobs(blobs, optim_d_);
  write_checkpoint(path, blobs);
}

int64_t Trainer::load_checkpoint(const std::string& path) {
  const std::vector<CheckpointBlob> blobs = read_checkpoint(path);
  restore_named(blobs, gen_e_.parameters("gen_e"));
  restore_named(blobs, gen_e_.buffers("gen_e"));
  restore_named(blobs, gen_n_.parameters("gen_n"));
  restore_named(blobs, gen_n_.buffers("gen_n"));
  restore_named(blobs, disc_e_.parameters("disc_e"));
  restore_named(blobs, disc_e_.buffers("disc_e"));
  restore_named(blobs, disc_n_.parameters("disc_n"));
  restore_named(blobs, disc_n_.buffers("disc_n"));
  restore_named(blobs, idnet_.parameters("idnet"));
  restore_optimizer_blobs(blobs, optim_g_);
  restore_optimizer_blobs(blobs, optim_d_);
  return static_cast<int64_t>(checkpoint_get(blobs, "meta.iteration").value());
}

namespace {

void write_diagnostic_dump(const std::string& path, Trainer& trainer,
                           const std::vector<LossReport>& history, const std::string& what) {
  std::ofstream os(path, std::ios::trunc);
  os << "training aborted: " << what << "\n";
  os << "recent loss reports (iteration g_adv pixel cyc identity g_total d_adv alpha3):\n";
  const size_t from = history.size() > 20 ? history.size() - 20 : 0;
  for (size_t i = from; i < history.size(); ++i) {
    const LossReport& r = history[i];
    os << r.iteration << "\t" << r.g_adv << "\t" << r.pixel << "\t" << r.cyc << "\t"
       << r.identity << "\t" << r.g_total << "\t" << r.d_adv << "\t" << r.alpha3 << "\n";
  }
  os << "parameter max-abs values:\n";
  for (const auto& group : {trainer.gen_e().parameters("gen_e"),
                            trainer.gen_n().parameters("gen_n"),
                            trainer.idnet().parameters("idnet")}) {
    for (const NamedParam& p : group) {
      os << p.name << "\t" << p.tensor.max_abs() << "\n";
    }
  }
  os.flush();
}

}  // namespace

int64_t load_networks(const std::string& path, GeneratorNet& gen_e, GeneratorNet& gen_n,
                      DiscriminatorNet& disc_e, DiscriminatorNet& disc_n, IdentityNet& idnet) {
  const std::vector<CheckpointBlob> blobs = read_checkpoint(path);
  restore_named(blobs, gen_e.parameters("gen_e"));
  restore_named(blobs, gen_e.buffers("gen_e"));
  restore_named(blobs, gen_n.parameters("gen_n"));
  restore_named(blobs, gen_n.buffers("gen_n"));
  restore_named(blobs, disc_e.parameters("disc_e"));
  restore_named(blobs, disc_e.buffers("disc_e"));
  restore_named(blobs, disc_n.parameters("disc_n"));
  restore_named(blobs, disc_n.buffers("disc_n"));
  restore_named(blobs, idnet.parameters("idnet"));
  return static_cast<int64_t>(checkpoint_get(blobs, "meta.iteration").value());
}

int64_t checkpoint_identity_classes(const std::string& path) {
  const std::vector<CheckpointBlob> blobs = read_checkpoint(path);
  const Tensor& head = checkpoint_get(blobs, "idnet.head.w");
  return head.extent(1);
}

void save_identity_checkpoint(const std::string& path, const IdentityNet& idnet) {
  std::vector<CheckpointBlob> blobs;
  append_named(blobs, idnet.parameters("idnet"));
  write_checkpoint(path, blobs);
}

void load_identity_checkpoint(const std::string& path, IdentityNet& idnet) {
  const std::vector<CheckpointBlob> blobs = read_checkpoint(path);
  restore_named(blobs, idnet.parameters("idnet"));
}

TrainLoopResult train_loop(Trainer& trainer, const std::vector<Sample>& train_samples,
                           const std::string& out_dir, int64_t start_iteration,
                           const std::function<void(const LossReport&)>& on_report) {
  if (train_samples.empty()) throw std::invalid_argument("train_loop: empty dataset");
  fs::create_directories(out_dir);
  const TrainConfig& cfg = trainer.config();
  const PreprocessOptions opt = cfg.preprocess_options();

  TrainLoopResult result;
  result.loss_log = (fs::path(out_dir) / "loss_log.tsv").string();
  std::ofstream log(result.loss_log, start_iteration == 0 ? std::ios::trunc : std::ios::app);
  if (!log) throw std::runtime_error("train_loop: cannot open loss log: " + result.loss_log);

  for (int64_t it = start_iteration; it < cfg.iterations; ++it) {
    const std::vector<size_t> idx =
        batch_indices(cfg.seed, it, train_samples.size(), cfg.batch_size);
    Rng aug(cfg.seed, "aug", static_cast<uint64_t>(it));
    const Batch batch = make_batch(train_samples, idx, aug, opt, PreprocessMode::kTrain);

    LossReport report;
    try {
      report = trainer.train_step(batch, it);
    } catch (const std::runtime_error& e) {
      const std::string dump = (fs::path(out_dir) / "diagnostic_dump.txt").string();
      write_diagnostic_dump(dump, trainer, result.reports, e.what());
      throw std::runtime_error(std::string(e.what()) + " (diagnostic dump: " + dump + ")");
    }
    result.reports.push_back(report);
    char line[512];
    std::snprintf(line, sizeof(line),
                  "%lld\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n",
                  static_cast<long long>(report.iteration), report.g_adv, report.pixel,
                  report.cyc, report.identity, report.g_total, report.d_adv, report.alpha3);
    log << line;
    log.flush();
    if (on_report) on_report(report);

    const bool last = it + 1 == cfg.iterations;
    if (last || (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0)) {
      const std::string ckpt =
          (fs::path(out_dir) / ("checkpoint_" + std::to_string(it + 1) + ".g2ck")).string();
      trainer.save_checkpoint(ckpt, it + 1);
      if (last) result.final_checkpoint = ckpt;
    }
  }
  return result;
}

}  // namespace g2
