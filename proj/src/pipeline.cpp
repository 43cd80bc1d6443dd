#include "g2/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace g2 {

namespace {
Tensor conditioned_forward(GeneratorNet& net, const Tensor& image, const LandmarkSet& landmarks,
                           double sigma, const char* op) {
  if (image.rank() != 3) throw std::invalid_argument(std::string(op) + ": image must be [C,H,W]");
  if (landmarks.count() != net.config().heatmap_channels) {
    throw std::invalid_argument(std::string(op) + ": landmark count " +
                                std::to_string(landmarks.count()) +
                                " does not match the model's heatmap channels");
  }
  const Tensor heatmap = render_heatmap(landmarks, image.extent(1), image.extent(2), sigma);
  return net.infer(image, heatmap);
}
}  // namespace

Tensor remove_expression(GeneratorNet& gen_n, const Tensor& image, const LandmarkSet& landmarks,
                         double sigma) {
  return conditioned_forward(gen_n, image, landmarks, sigma, "remove_expression");
}

Tensor synthesize_expression(GeneratorNet& gen_e, const Tensor& neutral_image,
                             const LandmarkSet& target_landmarks, double sigma) {
  return conditioned_forward(gen_e, neutral_image, target_landmarks, sigma,
                             "synthesize_expression");
}

TransferResult expression_transfer(const TransferRequest& request, GeneratorNet& gen_n,
                                   GeneratorNet& gen_e, const ShapeBasis& basis) {
  if (request.landmarks_a.count() != basis.K || request.landmarks_b.count() != basis.K) {
    throw std::invalid_argument("expression_transfer: landmark count does not match basis K");
  }
  TransferResult out;
  // stage 1: expression removal
  out.neutral_a = remove_expression(gen_n, request.image_a, request.landmarks_a, request.sigma);
  out.neutral_b = remove_expression(gen_n, request.image_b, request.landmarks_b, request.sigma);
  // stage 2: per-subject shape parameters against their own neutral geometry
  const ShapeParams p_a = fit_params(basis, request.neutral_landmarks_a, request.landmarks_a);
  const ShapeParams p_b = fit_params(basis, request.neutral_landmarks_b, request.landmarks_b);
  // stage 3: exchange parameters
  out.shape_ab = transfer_shape(basis, request.neutral_landmarks_a, p_b);
  out.shape_ba = transfer_shape(basis, request.neutral_landmarks_b, p_a);
  // stage 4: synthesis on the removed faces
  out.image_ab = synthesize_expression(gen_e, out.neutral_a, out.shape_ab, request.sigma);
  out.image_ba = synthesize_expression(gen_e, out.neutral_b, out.shape_ba, request.sigma);
  return out;
}

std::vector<Tensor> interpolate_expression(GeneratorNet& gen_e, const Tensor& neutral_image,
                                           const ShapeBasis& basis,
                                           const LandmarkSet& neutral_landmarks,
                                           const ShapeParams& target_params, int steps,
                                           double sigma) {
  if (steps < 2) throw std::invalid_argument("interpolate_expression: steps must be >= 2");
  const ShapeParams zero{std::vector<double>(target_params.p.size(), 0.0)};
  std::vector<Tensor> frames;
  frames.reserve(steps);
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    const ShapeParams p = interpolate_params(zero, target_params, t);
    const LandmarkSet lm = shape_from_params(basis, neutral_landmarks, p);
    frames.push_back(synthesize_expression(gen_e, neutral_image, lm, sigma));
  }
  return frames;
}

std::vector<Tensor> expression_invariant_probe_transform(GeneratorNet& gen_n,
                                                         const std::vector<ProbeImage>& probes,
                                                         double sigma) {
  std::vector<Tensor> out;
  out.reserve(probes.size());
  for (const ProbeImage& p : probes) {
    out.push_back(remove_expression(gen_n, p.image, p.landmarks, sigma));
  }
  return out;
}

MetricReport aggregate_metrics(std::vector<PairMetrics> rows) {
  if (rows.empty()) throw std::invalid_argument("aggregate_metrics: no rows");
  MetricReport r;
  r.rows = std::move(rows);
  for (const PairMetrics& m : r.rows) {
    r.mean_psnr += m.psnr_db;
    r.mean_ssim += m.ssim_value;
  }
  r.mean_psnr /= static_cast<double>(r.rows.size());
  r.mean_ssim /= static_cast<double>(r.rows.size());
  return r;
}

void write_metric_report(const std::string& path, const MetricReport& synthesis,
                         const MetricReport& removal) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write metric report: " + path);
  char line[256];
  os << "# direction\tsample\tpsnr_db\tssim\n";
  auto emit = [&os, &line](const char* direction, const MetricReport& report) {
    for (const PairMetrics& m : report.rows) {
      std::snprintf(line, sizeof(line), "%s\t%s\t%.9f\t%.9f\n", direction,
                    m.sample_id.c_str(), m.psnr_db, m.ssim_value);
      os << line;
    }
  };
  emit("synthesis", synthesis);
  emit("removal", removal);
  std::snprintf(line, sizeof(line),
                "# aggregate\tremoval_ssim=%.9f\tremoval_psnr=%.9f\tsynthesis_ssim=%.9f\t"
                "synthesis_psnr=%.9f\n",
                removal.mean_ssim, removal.mean_psnr, synthesis.mean_ssim, synthesis.mean_psnr);
  os << line;
  if (!os) throw std::runtime_error("metric report write failed: " + path);
}

}  // namespace g2
