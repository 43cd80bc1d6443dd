#pragma once

#include <string>
#include <vector>

#include "g2/tensor.hpp"

namespace g2 {

// Peak signal-to-noise ratio in dB with MAX = 1. RGB inputs are first
// reduced to BT.601 luminance (Y = 0.299 R + 0.587 G + 0.114 B); grayscale
// uses the single channel. A zero-MSE pair reports the 99 dB cap. Inputs
// must share a [C,H,W] shape with values in [0,1].
constexpr double kPsnrCap = 99.0;
double psnr(const Tensor& reference, const Tensor& candidate);

// Single-scale SSIM with the standard 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, L=1, evaluated on the valid region and averaged over
// channels (RGB channels are scored independently). Requires H,W >= 11.
double ssim(const Tensor& reference, const Tensor& candidate);

struct FeatureEntry {
  int id = -1;
  std::vector<double> feature;
};

struct RecognitionResult {
  double rank1 = 0.0;       // percent
  double tar_at_far1 = 0.0;   // percent, FAR = 1%
  double tar_at_far01 = 0.0;  // percent, FAR = 0.1%
};

// Cosine-similarity identification/verification. Rank-1 is the fraction of
// probes whose highest-scoring gallery entry shares their id. TAR@FAR=x
// thresholds at the (1-x) quantile of impostor scores (linear interpolation
// between order statistics, higher score accepts) and reports the fraction
// of genuine scores strictly above it. Gallery ids must be unique and every
// probe id must appear in the gallery.
RecognitionResult recognition_eval(const std::vector<FeatureEntry>& gallery,
                                   const std::vector<FeatureEntry>& probes);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace g2
