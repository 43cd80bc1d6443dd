#pragma once

#include <string>
#include <vector>

#include "g2/heatmap.hpp"
#include "g2/metrics.hpp"
#include "g2/networks.hpp"
#include "g2/shape_model.hpp"

namespace g2 {

// End-to-end inference. All operations run the networks in evaluation mode
// on single [C,H,W] images; landmarks must already be in the image's
// coordinate frame. sigma is the heatmap width used for conditioning.

// G_N(I, H(landmarks)): landmarks describe the input's expression.
Tensor remove_expression(GeneratorNet& gen_n, const Tensor& image, const LandmarkSet& landmarks,
                         double sigma);

// G_E(I, H(target_landmarks)): target landmarks specify the expression to
// synthesize on the neutral input.
Tensor synthesize_expression(GeneratorNet& gen_e, const Tensor& neutral_image,
                             const LandmarkSet& target_landmarks, double sigma);

struct TransferRequest {
  Tensor image_a;
  LandmarkSet landmarks_a;
  LandmarkSet neutral_landmarks_a;  // ground-truth neutral geometry of A
  Tensor image_b;
  LandmarkSet landmarks_b;
  LandmarkSet neutral_landmarks_b;
  double sigma = 1.0;
};

struct TransferResult {
  Tensor neutral_a;  // expression-removed inputs
  Tensor neutral_b;
  LandmarkSet shape_ab;  // neutral_a geometry + B's expression parameters
  LandmarkSet shape_ba;
  Tensor image_ab;  // A wearing B's expression
  Tensor image_ba;
};

// Four-stage expression swap: remove both expressions, fit each subject's
// shape parameters against its own neutral geometry, exchange the
// parameters, and re-synthesize. Implemented as the literal composition of
// the stage operations.
TransferResult expression_transfer(const TransferRequest& request, GeneratorNet& gen_n,
                                   GeneratorNet& gen_e, const ShapeBasis& basis);

// Frames at t = 0, 1/(steps-1), ..., 1 along the parameter ray from the
// neutral shape to target_params.
std::vector<Tensor> interpolate_expression(GeneratorNet& gen_e, const Tensor& neutral_image,
                                           const ShapeBasis& basis,
                                           const LandmarkSet& neutral_landmarks,
                                           const ShapeParams& target_params, int steps,
                                           double sigma);

// Replaces every probe image by its expression-removed version; the gallery
// is never touched.
struct ProbeImage {
  Tensor image;
  LandmarkSet landmarks;
};
std::vector<Tensor> expression_invariant_probe_transform(GeneratorNet& gen_n,
                                                         const std::vector<ProbeImage>& probes,
                                                         double sigma);

// ---- evaluation reports --------------------------------------------------------
struct PairMetrics {
  std::string sample_id;
  double psnr_db = 0.0;
  double ssim_value = 0.0;
};

struct MetricReport {
  std::vector<PairMetrics> rows;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

MetricReport aggregate_metrics(std::vector<PairMetrics> rows);
// One record per pair plus an aggregate footer.
void write_metric_report(const std::string& path, const MetricReport& synthesis,
                         const MetricReport& removal);

}  // namespace g2
