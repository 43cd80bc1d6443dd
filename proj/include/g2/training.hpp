#pragma once

#include <functional>
#include <string>
#include <vector>

#include "g2/adam.hpp"
#include "g2/data.hpp"
#include "g2/losses.hpp"
#include "g2/networks.hpp"

namespace g2 {

struct TrainConfig {
  double alpha1 = 10.0;          // pixel weight
  double alpha2 = 5.0;           // cycle weight
  double alpha3_start = 0.1;     // identity weight ramp
  double alpha3_end = 0.5;
  double alpha3_knee_frac = 0.8;
  double lr = 1e-4;
  int batch_size = 5;
  int64_t iterations = 1200;
  uint64_t seed = 7;
  int image_size = 64;
  double heatmap_sigma = 1.0;    // at image_size (2.0 at 128, scaled with size)
  int64_t checkpoint_every = 400;
  double grad_clip_norm = 0.0;   // 0 disables the global-norm safety valve

  PreprocessOptions preprocess_options() const {
    return PreprocessOptions{image_size, heatmap_sigma, false};
  }
};

struct LossReport {
  int64_t iteration = 0;
  double g_adv = 0.0;
  double pixel = 0.0;
  double cyc = 0.0;
  double identity = 0.0;
  double g_total = 0.0;
  double d_adv = 0.0;
  double alpha3 = 0.0;
};

// One preprocessed minibatch.
struct Batch {
  Tensor image_neutral;  // [B,C,S,S]
  Tensor image_expr;     // [B,C,S,S]
  Tensor heatmap;        // [B,K,S,S]
};

// Assembles a train-mode batch from the given sample indices; the rng
// drives crops and flips only.
Batch make_batch(const std::vector<Sample>& pool, const std::vector<size_t>& indices, Rng& aug,
                 const PreprocessOptions& opt, PreprocessMode mode);

// Deterministic index choice for iteration `it` given the run seed.
std::vector<size_t> batch_indices(uint64_t seed, int64_t iteration, size_t pool_size,
                                  int batch_size);

// Alternating optimization of the paired translation models. One
// discriminator update (both directions, on real and detached fake
// triplets) followed by one generator update through the full weighted
// objective, including the cycle through both generators. The identity
// extractor stays frozen throughout.
class Trainer {
 public:
  Trainer(GeneratorNet& gen_e, GeneratorNet& gen_n, DiscriminatorNet& disc_e,
          DiscriminatorNet& disc_n, IdentityNet& idnet, const TrainConfig& cfg);

  LossReport train_step(const Batch& batch, int64_t iteration);

  // Writes/reads the full training state (parameters, norm buffers, Adam
  // moments, iteration counter) in the checkpoint container format.
  void save_checkpoint(const std::string& path, int64_t iteration) const;
  int64_t load_checkpoint(const std::string& path);

  const TrainConfig& config() const { return cfg_; }
  GeneratorNet& gen_e() { return gen_e_; }
  GeneratorNet& gen_n() { return gen_n_; }
  IdentityNet& idnet() { return idnet_; }

 private:
  GeneratorNet& gen_e_;
  GeneratorNet& gen_n_;
  DiscriminatorNet& disc_e_;
  DiscriminatorNet& disc_n_;
  IdentityNet& idnet_;
  TrainConfig cfg_;
  AdamOptimizer optim_g_;
  AdamOptimizer optim_d_;
};

struct TrainLoopResult {
  std::vector<LossReport> reports;
  std::string final_checkpoint;
  std::string loss_log;
};

// Runs train_step over deterministic batches, appending one tab-separated
// line per iteration to <out_dir>/loss_log.tsv (iteration, the six loss
// scalars, alpha3; full double precision) and checkpointing at the
// configured cadence plus at the end. On a non-finite loss a diagnostic
// state dump is written and the error rethrown with the dump path.
TrainLoopResult train_loop(Trainer& trainer, const std::vector<Sample>& train_samples,
                           const std::string& out_dir, int64_t start_iteration = 0,
                           const std::function<void(const LossReport&)>& on_report = {});

// Restores network parameters and norm buffers (not optimizer state) from a
// training checkpoint; returns the stored iteration count.
int64_t load_networks(const std::string& path, GeneratorNet& gen_e, GeneratorNet& gen_n,
                      DiscriminatorNet& disc_e, DiscriminatorNet& disc_n, IdentityNet& idnet);

// Number of identity classes recorded in a checkpoint (from the classifier
// head shape), needed to reconstruct the identity net before loading.
int64_t checkpoint_identity_classes(const std::string& path);

// Stand-alone frozen identity extractor files.
void save_identity_checkpoint(const std::string& path, const IdentityNet& idnet);
void load_identity_checkpoint(const std::string& path, IdentityNet& idnet);

}  // namespace g2
