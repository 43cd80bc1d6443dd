#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "g2/adam.hpp"
#include "g2/data.hpp"
#include "g2/rng.hpp"
#include "g2/tape.hpp"
#include "g2/tensor.hpp"

namespace g2 {

// Conv / norm building blocks shared by the three network families. Conv
// weights are initialized N(0, 0.02); norm scale starts at 1, shift at 0.
struct ConvLayer {
  Tensor w;  // [F,C,kh,kw] for conv, [C,F,kh,kw] for conv_transpose
  Tensor b;  // defined only when the layer carries a bias
  int stride = 1;
  int pad = 1;
};

struct NormLayer {
  Tensor gamma, beta;
  Tensor running_mean, running_var;
};

struct GeneratorConfig {
  int64_t image_channels = 1;
  int64_t heatmap_channels = 18;
  int depth = 6;                               // down/up steps; input >= 2^depth
  std::vector<int64_t> widths = {32, 64, 128, 256};  // per level, last repeats

  int64_t width_at(int level) const {
    return widths[std::min<size_t>(level, widths.size() - 1)];
  }
};

// U-Net: encoder blocks (conv 4x4 stride 2, norm, leaky_relu) mirrored by
// decoder blocks (conv_transpose 4x4 stride 2, norm, relu) with channel
// concatenation skip connections; final activation sigmoid, so outputs lie
// strictly in (0,1) at the input's spatial extent.
class GeneratorNet {
 public:
  GeneratorNet(GeneratorConfig cfg, Rng& init_rng);

  Var forward(Tape& tape, const Var& image, const Var& heatmap, bool training, bool trainable);
  // eval-mode convenience on a [1,C,H,W] or [C,H,W] tensor (no gradients)
  Tensor infer(const Tensor& image, const Tensor& heatmap);

  std::vector<NamedParam> parameters(const std::string& prefix) const;
  std::vector<NamedParam> buffers(const std::string& prefix) const;
  const GeneratorConfig& config() const { return cfg_; }

  // Test knob: zero the skip connection feeding decoder block `level`
  // (-1 disables). Used to verify the skips are actually wired.
  void set_skip_ablation(int level) { ablate_skip_ = level; }

 private:
  struct Block {
    ConvLayer conv;
    bool has_norm = false;
    NormLayer norm;
  };
  GeneratorConfig cfg_;
  std::vector<Block> enc_;
  std::vector<Block> dec_;
  int ablate_skip_ = -1;
};

struct DiscriminatorConfig {
  int64_t image_channels = 1;
  int64_t heatmap_channels = 18;
  std::vector<int64_t> widths = {32, 64, 128};
  std::vector<int> strides = {2, 2, 1};  // one per width; a final stride-1
                                         // 1-channel conv is appended
};

// PatchGAN on the channel-concatenated triplet (I, H, I'): stacked 4x4
// conv blocks emitting a 1-channel patch logit map.
class DiscriminatorNet {
 public:
  DiscriminatorNet(DiscriminatorConfig cfg, Rng& init_rng);

  Var forward(Tape& tape, const Var& image_in, const Var& heatmap, const Var& image_out,
              bool training, bool trainable);

  std::vector<NamedParam> parameters(const std::string& prefix) const;
  std::vector<NamedParam> buffers(const std::string& prefix) const;
  const DiscriminatorConfig& config() const { return cfg_; }

  // logit map extent for a given input size, by the conv shape formula
  static int64_t logit_extent(const DiscriminatorConfig& cfg, int64_t input_extent);

 private:
  struct Block {
    ConvLayer conv;
    bool has_norm = false;
    NormLayer norm;
  };
  DiscriminatorConfig cfg_;
  std::vector<Block> blocks_;
  ConvLayer out_;
};

struct IdentityNetConfig {
  int64_t image_channels = 1;
  int64_t image_size = 64;
  int64_t embed_dim = 64;
  int64_t n_classes = 2;
  std::vector<int64_t> widths = {12, 24, 32, 48, 48};  // five 3x3 convs
};

// Compact identity classifier: five 3x3 convs with two 2x2 max-pools, a
// fully-connected embedding layer (the recognition feature F(I)) and a
// classification head over the synthetic identities. No normalization
// layers, so evaluation is deterministic by construction.
class IdentityNet {
 public:
  IdentityNet(IdentityNetConfig cfg, Rng& init_rng);

  Var embed(Tape& tape, const Var& image, bool trainable);   // [B,D]
  Var logits(Tape& tape, const Var& image, bool trainable);  // [B,n_classes]
  Tensor features(const Tensor& images);  // eval convenience, [B,D] from [B,C,S,S]

  std::vector<NamedParam> parameters(const std::string& prefix) const;
  const IdentityNetConfig& config() const { return cfg_; }

 private:
  IdentityNetConfig cfg_;
  std::vector<ConvLayer> convs_;
  Tensor embed_w_, embed_b_;
  Tensor head_w_, head_b_;
};

struct PretrainConfig {
  int64_t iterations = 500;
  int batch_size = 16;
  double lr = 2e-4;
  double holdout_frac = 0.2;
  uint64_t seed = 1;
  PreprocessOptions preprocess;
};

struct PretrainResult {
  double holdout_accuracy = 0.0;
  int64_t holdout_count = 0;
  std::vector<int> class_of_subject_id;  // sorted unique subject ids
};

// Trains the classifier head on the subjects present in `samples` (softmax
// cross entropy over subject ids, Adam) with train-mode augmentation, and
// reports accuracy on a held-out image subset under test-mode
// preprocessing. Throws if fewer than 2 identities are present.
PretrainResult pretrain_identity(IdentityNet& net, const std::vector<Sample>& samples,
                                 const PretrainConfig& cfg);

}  // namespace g2
