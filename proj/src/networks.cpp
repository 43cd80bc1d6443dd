#include "g2/networks.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace g2 {

namespace {

Tensor init_normal(Shape shape, Rng& rng, double stddev = 0.02) {
  Tensor t(shape);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  t.set_requires_grad(true);
  return t;
}

Tensor init_const(Shape shape, double v) {
  Tensor t(shape, v);
  t.set_requires_grad(true);
  return t;
}

NormLayer make_norm(int64_t channels) {
  NormLayer n;
  n.gamma = init_const(Shape{channels}, 1.0);
  n.beta = init_const(Shape{channels}, 0.0);
  n.running_mean = Tensor::zeros(Shape{channels});
  n.running_var = Tensor::full(Shape{channels}, 1.0);
  return n;
}

Var as_var(Tape& tape, const Tensor& t, bool trainable) {
  return trainable ? tape.watch(t) : tape.input(t);
}

Var maybe_bias(Tape& tape, const ConvLayer& layer, bool trainable) {
  return layer.b.defined() ? as_var(tape, layer.b, trainable) : Var{};
}

bool is_pow2(int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

void append_conv_params(std::vector<NamedParam>& out, const std::string& name,
                        const ConvLayer& conv) {
  out.push_back({name + ".w", conv.w});
  if (conv.b.defined()) out.push_back({name + ".b", conv.b});
}

void append_norm_params(std::vector<NamedParam>& out, const std::string& name,
                        const NormLayer& norm) {
  out.push_back({name + ".gamma", norm.gamma});
  out.push_back({name + ".beta", norm.beta});
}

void append_norm_buffers(std::vector<NamedParam>& out, const std::string& name,
                         const NormLayer& norm) {
  out.push_back({name + ".running_mean", norm.running_mean});
  out.push_back({name + ".running_var", norm.running_var});
}

}  // namespace

// ---- GeneratorNet --------------------------------------------------------------

GeneratorNet::GeneratorNet(GeneratorConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
  if (cfg_.depth < 2) throw std::invalid_argument("generator: depth must be >= 2");
  int64_t in_ch = cfg_.image_channels + cfg_.heatmap_channels;
  for (int i = 0; i < cfg_.depth; ++i) {
    Block b;
    const int64_t out_ch = cfg_.width_at(i);
    b.has_norm = i > 0 && i < cfg_.depth - 1;
    b.conv.w = init_normal(Shape{out_ch, in_ch, 4, 4}, init_rng);
    if (!b.has_norm) b.conv.b = init_const(Shape{out_ch}, 0.0);
    b.conv.stride = 2;
    b.conv.pad = 1;
    if (b.has_norm) b.norm = make_norm(out_ch);
    enc_.push_back(std::move(b));
    in_ch = out_ch;
  }
  for (int j = 0; j < cfg_.depth; ++j) {
    Block b;
    const int64_t dec_in =
        j == 0 ? cfg_.width_at(cfg_.depth - 1) : 2 * cfg_.width_at(cfg_.depth - 1 - j);
    const int64_t dec_out =
        j == cfg_.depth - 1 ? cfg_.image_channels : cfg_.width_at(cfg_.depth - 2 - j);
    b.has_norm = j < cfg_.depth - 1;
    b.conv.w = init_normal(Shape{dec_in, dec_out, 4, 4}, init_rng);
    if (!b.has_norm) b.conv.b = init_const(Shape{dec_out}, 0.0);
    b.conv.stride = 2;
    b.conv.pad = 1;
    if (b.has_norm) b.norm = make_norm(dec_out);
    dec_.push_back(std::move(b));
  }
}

Var GeneratorNet::forward(Tape& tape, const Var& image, const Var& heatmap, bool training,
                          bool trainable) {
  const Shape& si = image.value.shape();
  const Shape& sh = heatmap.value.shape();
  if (si.size() != 4 || sh.size() != 4 || si[0] != sh[0] || si[2] != sh[2] || si[3] != sh[3]) {
    throw std::invalid_argument("generator: image/heatmap shape mismatch");
  }
  if (si[1] != cfg_.image_channels || sh[1] != cfg_.heatmap_channels) {
    throw std::invalid_argument("generator: channel counts do not match construction");
  }
  const int64_t min_extent = int64_t{1} << cfg_.depth;
  if (!is_pow2(si[2]) || !is_pow2(si[3]) || si[2] < min_extent || si[3] < min_extent) {
    throw std::invalid_argument("generator: spatial extents must be powers of two >= 2^depth");
  }

  Var x = tape.channel_concat(image, heatmap);
  std::vector<Var> skips;
  for (int i = 0; i < cfg_.depth; ++i) {
    Block& b = enc_[i];
    x = tape.conv2d(x, as_var(tape, b.conv.w, trainable), maybe_bias(tape, b.conv, trainable),
                    b.conv.stride, b.conv.pad);
    if (b.has_norm) {
      x = tape.batch_norm2d(x, as_var(tape, b.norm.gamma, trainable),
                            as_var(tape, b.norm.beta, trainable), b.norm.running_mean,
                            b.norm.running_var, training);
    }
    x = tape.leaky_relu(x, 0.2);
    skips.push_back(x);
  }
  for (int j = 0; j < cfg_.depth; ++j) {
    if (j > 0) {
      Var skip = skips[cfg_.depth - 1 - j];
      if (ablate_skip_ == j) skip = tape.scalar_mul(skip, 0.0);
      x = tape.channel_concat(x, skip);
    }
    Block& b = dec_[j];
    x = tape.conv_transpose2d(x, as_var(tape, b.conv.w, trainable),
                              maybe_bias(tape, b.conv, trainable), b.conv.stride, b.conv.pad);
    if (j < cfg_.depth - 1) {
      x = tape.batch_norm2d(x, as_var(tape, b.norm.gamma, trainable),
                            as_var(tape, b.norm.beta, trainable), b.norm.running_mean,
                            b.norm.running_var, training);
      x = tape.relu(x);
    } else {
      x = tape.sigmoid(x);
    }
  }
  return x;
}

Tensor GeneratorNet::infer(const Tensor& image, const Tensor& heatmap) {
  const bool batched = image.rank() == 4;
  Tape tape;
  Var img = tape.input(batched ? image : stack_batch({image}));
  Var hm = tape.input(batched ? heatmap : stack_batch({heatmap}));
  Var out = forward(tape, img, hm, /*training=*/false, /*trainable=*/false);
  if (batched) return out.value;
  Tensor squeezed(Shape{out.value.extent(1), out.value.extent(2), out.value.extent(3)});
  std::copy(out.value.data(), out.value.data() + out.value.numel(), squeezed.data());
  return squeezed;
}

std::vector<NamedParam> GeneratorNet::parameters(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < enc_.size(); ++i) {
    const std::string name = prefix + ".enc" + std::to_string(i);
    append_conv_params(out, name, enc_[i].conv);
    if (enc_[i].has_norm) append_norm_params(out, name, enc_[i].norm);
  }
  for (size_t j = 0; j < dec_.size(); ++j) {
    const std::string name = prefix + ".dec" + std::to_string(j);
    append_conv_params(out, name, dec_[j].conv);
    if (dec_[j].has_norm) append_norm_params(out, name, dec_[j].norm);
  }
  return out;
}

std::vector<NamedParam> GeneratorNet::buffers(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < enc_.size(); ++i) {
    if (enc_[i].has_norm) {
      append_norm_buffers(out, prefix + ".enc" + std::to_string(i), enc_[i].norm);
    }
  }
  for (size_t j = 0; j < dec_.size(); ++j) {
    if (dec_[j].has_norm) {
      append_norm_buffers(out, prefix + ".dec" + std::to_string(j), dec_[j].norm);
    }
  }
  return out;
}

// ---- DiscriminatorNet -------------------------------------------------------------

DiscriminatorNet::DiscriminatorNet(DiscriminatorConfig cfg, Rng& init_rng)
    : cfg_(std::move(cfg)) {
  if (cfg_.widths.size() != cfg_.strides.size() || cfg_.widths.empty()) {
    throw std::invalid_argument("discriminator: widths/strides mismatch");
  }
  int64_t in_ch = 2 * cfg_.image_channels + cfg_.heatmap_channels;
  for (size_t i = 0; i < cfg_.widths.size(); ++i) {
    Block b;
    b.has_norm = i > 0;
    b.conv.w = init_normal(Shape{cfg_.widths[i], in_ch, 4, 4}, init_rng);
    if (!b.has_norm) b.conv.b = init_const(Shape{cfg_.widths[i]}, 0.0);
    b.conv.stride = cfg_.strides[i];
    b.conv.pad = 1;
    if (b.has_norm) b.norm = make_norm(cfg_.widths[i]);
    blocks_.push_back(std::move(b));
    in_ch = cfg_.widths[i];
  }
  out_.w = init_normal(Shape{1, in_ch, 4, 4}, init_rng);
  out_.b = init_const(Shape{1}, 0.0);
  out_.stride = 1;
  out_.pad = 1;
}

int64_t DiscriminatorNet::logit_extent(const DiscriminatorConfig& cfg, int64_t e) {
  for (size_t i = 0; i < cfg.strides.size(); ++i) {
    const int64_t num = e + 2 - 4;
    if (num < 0 || num % cfg.strides[i] != 0) {
      throw std::invalid_argument("discriminator: non-integral extent at block " +
                                  std::to_string(i));
    }
    e = num / cfg.strides[i] + 1;
  }
  return e - 1;  // final 4x4 stride-1 pad-1 conv
}

Var DiscriminatorNet::forward(Tape& tape, const Var& image_in, const Var& heatmap,
                              const Var& image_out, bool training, bool trainable) {
  Var x = tape.channel_concat(tape.channel_concat(image_in, heatmap), image_out);
  for (Block& b : blocks_) {
    x = tape.conv2d(x, as_var(tape, b.conv.w, trainable), maybe_bias(tape, b.conv, trainable),
                    b.conv.stride, b.conv.pad);
    if (b.has_norm) {
      x = tape.batch_norm2d(x, as_var(tape, b.norm.gamma, trainable),
                            as_var(tape, b.norm.beta, trainable), b.norm.running_mean,
                            b.norm.running_var, training);
    }
    x = tape.leaky_relu(x, 0.2);
  }
  x = tape.conv2d(x, as_var(tape, out_.w, trainable), as_var(tape, out_.b, trainable),
                  out_.stride, out_.pad);
  return x;
}

std::vector<NamedParam> DiscriminatorNet::parameters(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const std::string name = prefix + ".blk" + std::to_string(i);
    append_conv_params(out, name, blocks_[i].conv);
    if (blocks_[i].has_norm) append_norm_params(out, name, blocks_[i].norm);
  }
  append_conv_params(out, prefix + ".out", out_);
  return out;
}

std::vector<NamedParam> DiscriminatorNet::buffers(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].has_norm) {
      append_norm_buffers(out, prefix + ".blk" + std::to_string(i), blocks_[i].norm);
    }
  }
  return out;
}

// ---- IdentityNet -----------------------------------------------------------------

IdentityNet::IdentityNet(IdentityNetConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
  if (cfg_.widths.size() != 5) throw std::invalid_argument("identity net: expects five convs");
  if (cfg_.image_size % 4 != 0) {
    throw std::invalid_argument("identity net: image size must be divisible by 4");
  }
  int64_t in_ch = cfg_.image_channels;
  for (int64_t w : cfg_.widths) {
    ConvLayer c;
    c.w = init_normal(Shape{w, in_ch, 3, 3}, init_rng);
    c.b = init_const(Shape{w}, 0.0);
    c.stride = 1;
    c.pad = 1;
    convs_.push_back(std::move(c));
    in_ch = w;
  }
  const int64_t spatial = cfg_.image_size / 4;
  const int64_t flat = cfg_.widths.back() * spatial * spatial;
  embed_w_ = init_normal(Shape{flat, cfg_.embed_dim}, init_rng);
  embed_b_ = init_const(Shape{cfg_.embed_dim}, 0.0);
  head_w_ = init_normal(Shape{cfg_.embed_dim, cfg_.n_classes}, init_rng);
  head_b_ = init_const(Shape{cfg_.n_classes}, 0.0);
}

Var IdentityNet::embed(Tape& tape, const Var& image, bool trainable) {
  const Shape& s = image.value.shape();
  if (s.size() != 4 || s[1] != cfg_.image_channels || s[2] != cfg_.image_size ||
      s[3] != cfg_.image_size) {
    throw std::invalid_argument("identity net: input must be [B," +
                                std::to_string(cfg_.image_channels) + "," +
                                std::to_string(cfg_.image_size) + "," +
                                std::to_string(cfg_.image_size) + "]");
  }
  Var x = image;
  for (size_t i = 0; i < convs_.size(); ++i) {
    ConvLayer& c = convs_[i];
    x = tape.conv2d(x, as_var(tape, c.w, trainable), as_var(tape, c.b, trainable), c.stride,
                    c.pad);
    x = tape.relu(x);
    if (i == 0 || i == 1) x = tape.max_pool2d(x, 2, 2);
  }
  const int64_t b = s[0];
  x = tape.reshape(x, Shape{b, x.value.numel() / b});
  return tape.linear(x, as_var(tape, embed_w_, trainable), as_var(tape, embed_b_, trainable));
}

Var IdentityNet::logits(Tape& tape, const Var& image, bool trainable) {
  Var e = embed(tape, image, trainable);
  e = tape.relu(e);
  return tape.linear(e, as_var(tape, head_w_, trainable), as_var(tape, head_b_, trainable));
}

Tensor IdentityNet::features(const Tensor& images) {
  const bool batched = images.rank() == 4;
  Tape tape;
  Var img = tape.input(batched ? images : stack_batch({images}));
  Var out = embed(tape, img, /*trainable=*/false);
  if (batched) return out.value;
  Tensor squeezed(Shape{out.value.extent(1)});
  std::copy(out.value.data(), out.value.data() + out.value.numel(), squeezed.data());
  return squeezed;
}

std::vector<NamedParam> IdentityNet::parameters(const std::string& prefix) const {
  std::vector<NamedParam> out;
  for (size_t i = 0; i < convs_.size(); ++i) {
    append_conv_params(out, prefix + ".conv" + std::to_string(i), convs_[i]);
  }
  out.push_back({prefix + ".embed.w", embed_w_});
  out.push_back({prefix + ".embed.b", embed_b_});
  out.push_back({prefix + ".head.w", head_w_});
  out.push_back({prefix + ".head.b", head_b_});
  return out;
}

// ---- pretraining ------------------------------------------------------------------

PretrainResult pretrain_identity(IdentityNet& net, const std::vector<Sample>& samples,
                                 const PretrainConfig& cfg) {
  std::set<int> id_set;
  for (const Sample& s : samples) id_set.insert(s.subject_id);
  if (id_set.size() < 2) {
    throw std::invalid_argument("pretrain_identity: need at least 2 identities");
  }
  std::vector<int> ids(id_set.begin(), id_set.end());
  if (static_cast<int64_t>(ids.size()) != net.config().n_classes) {
    throw std::invalid_argument("pretrain_identity: net was built for " +
                                std::to_string(net.config().n_classes) + " classes, dataset has " +
                                std::to_string(ids.size()));
  }
  auto class_of = [&ids](int subject_id) {
    return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), subject_id) - ids.begin());
  };

  // item list: every expressioned image plus one neutral per subject
  struct Item {
    int sample_idx;
    bool use_expr;
  };
  std::vector<Item> items;
  std::set<int> neutral_done;
  for (size_t i = 0; i < samples.size(); ++i) {
    items.push_back({static_cast<int>(i), true});
    if (!neutral_done.count(samples[i].subject_id)) {
      neutral_done.insert(samples[i].subject_id);
      items.push_back({static_cast<int>(i), false});
    }
  }
  // deterministic shuffle, holdout from the tail
  Rng shuffle_rng(cfg.seed, "pretrain/holdout");
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = shuffle_rng.uniform_index(i);
    std::swap(items[i - 1], items[j]);
  }
  const size_t holdout_n =
      std::max<size_t>(1, static_cast<size_t>(cfg.holdout_frac * items.size()));
  if (holdout_n >= items.size()) {
    throw std::invalid_argument("pretrain_identity: holdout fraction leaves no training items");
  }
  std::vector<Item> holdout(items.end() - holdout_n, items.end());
  items.resize(items.size() - holdout_n);

  AdamHyper hyper;
  hyper.lr = cfg.lr;
  hyper.beta1 = 0.9;
  AdamOptimizer optim(net.parameters("idnet"), hyper);

  for (int64_t it = 0; it < cfg.iterations; ++it) {
    Rng batch_rng(cfg.seed, "pretrain/batch", it);
    Rng aug_rng(cfg.seed, "pretrain/aug", it);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Item& item = items[batch_rng.uniform_index(items.size())];
      const Sample& s = samples[item.sample_idx];
      PreprocessedPair pp = preprocess(s, PreprocessMode::kTrain, aug_rng, cfg.preprocess);
      images.push_back(item.use_expr ? pp.image_expr : pp.image_neutral);
      labels.push_back(class_of(s.subject_id));
    }
    Tape tape;
    Var x = tape.input(stack_batch(images));
    Var out = net.logits(tape, x, /*trainable=*/true);
    Var loss = tape.softmax_cross_entropy(out, labels);
    tape.backward(loss);
    optim.step(tape);
  }

  // held-out accuracy under test-mode preprocessing
  PretrainResult result;
  result.holdout_count = static_cast<int64_t>(holdout.size());
  result.class_of_subject_id = ids;
  int correct = 0;
  Rng dummy(0);
  for (const Item& item : holdout) {
    const Sample& s = samples[item.sample_idx];
    PreprocessedPair pp = preprocess(s, PreprocessMode::kTest, dummy, cfg.preprocess);
    Tape tape;
    Var x = tape.input(stack_batch({item.use_expr ? pp.image_expr : pp.image_neutral}));
    Var out = net.logits(tape, x, /*trainable=*/false);
    int64_t best = 0;
    for (int64_t c = 1; c < net.config().n_classes; ++c) {
      if (out.value[c] > out.value[best]) best = c;
    }
    if (best == class_of(s.subject_id)) ++correct;
  }
  result.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(holdout.size());
  return result;
}

}  // namespace g2
