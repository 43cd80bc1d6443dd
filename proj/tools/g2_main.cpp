// Command-line front end: dataset generation/validation, shape-model
// fitting and manipulation, training, inference, and evaluation. Every
// command is deterministic given config + seed, and each run directory
// receives the fully resolved configuration.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "g2/config.hpp"
#include "g2/data.hpp"
#include "g2/heatmap.hpp"
#include "g2/image_io.hpp"
#include "g2/metrics.hpp"
#include "g2/networks.hpp"
#include "g2/pipeline.hpp"
#include "g2/shape_model.hpp"
#include "g2/training.hpp"

namespace fs = std::filesystem;
using namespace g2;

namespace {

struct GlobalArgs {
  std::string config_path;
  int64_t seed_override = -1;
  std::string out_dir = "run";
};

RunConfig load_config(const GlobalArgs& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg.load_file(g.config_path);
  if (g.seed_override >= 0) cfg.set("seed", std::to_string(g.seed_override));
  return cfg;
}

void write_run_config(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  cfg.write_resolved((fs::path(out_dir) / "config.resolved").string());
}

std::string sample_tag(const Sample& s) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "s%03d_%s_%.3g", s.subject_id, s.expression_label.c_str(),
                s.intensity);
  return buf;
}

Point parse_point(const RunConfig& cfg, const std::string& key) {
  const std::vector<int64_t> v = cfg.i64_list(key);
  if (v.size() != 2) throw std::invalid_argument("config key " + key + " must be x,y");
  return Point{static_cast<double>(v[0]), static_cast<double>(v[1])};
}

struct LoadedModel {
  GeneratorNet gen_e;
  GeneratorNet gen_n;
  DiscriminatorNet disc_e;
  DiscriminatorNet disc_n;
  IdentityNet idnet;
  int64_t iteration;
};

LoadedModel load_model(const RunConfig& cfg, const std::string& checkpoint) {
  const int64_t n_classes = checkpoint_identity_classes(checkpoint);
  Rng r_ge(cfg.seed(), "init/gen_e"), r_gn(cfg.seed(), "init/gen_n");
  Rng r_de(cfg.seed(), "init/disc_e"), r_dn(cfg.seed(), "init/disc_n");
  Rng r_id(cfg.seed(), "init/idnet");
  LoadedModel m{GeneratorNet(cfg.generator_config(), r_ge),
                GeneratorNet(cfg.generator_config(), r_gn),
                DiscriminatorNet(cfg.discriminator_config(), r_de),
                DiscriminatorNet(cfg.discriminator_config(), r_dn),
                IdentityNet(cfg.identity_config(n_classes), r_id),
                0};
  m.iteration = load_networks(checkpoint, m.gen_e, m.gen_n, m.disc_e, m.disc_n, m.idnet);
  return m;
}

// held-out samples grouped per subject, first row per subject carries the
// gallery neutral
std::vector<Sample> test_samples(const RunConfig& cfg) {
  std::vector<Sample> all = load_dataset(cfg.str("dataset_dir"));
  DatasetSplit split =
      split_by_subject(std::move(all), static_cast<int>(cfg.i64("dataset_test_subjects")));
  return std::move(split.test);
}

// ---- dataset ------------------------------------------------------------------

int cmd_dataset_validate(const std::string& dir) {
  const std::vector<Sample> samples = load_dataset(dir);
  // invariant: per-channel heatmap argmax recovers each landmark within 1 px
  for (const Sample& s : samples) {
    const Tensor hm = render_heatmap(s.lm_expr, kCanvasSize, kCanvasSize, 2.0);
    for (int64_t c = 0; c < hm.extent(0); ++c) {
      const double* plane = hm.data() + c * kCanvasSize * kCanvasSize;
      int64_t best = 0;
      for (int64_t i = 1; i < kCanvasSize * kCanvasSize; ++i) {
        if (plane[i] > plane[best]) best = i;
      }
      const double by = static_cast<double>(best / kCanvasSize);
      const double bx = static_cast<double>(best % kCanvasSize);
      if (std::abs(bx - s.lm_expr.x(c)) > 1.0 || std::abs(by - s.lm_expr.y(c)) > 1.0) {
        std::cerr << "heatmap/landmark inconsistency for sample " << sample_tag(s)
                  << " channel " << c << "\n";
        return 1;
      }
    }
  }
  std::cout << "dataset ok: " << samples.size() << " pairs, K=" << samples[0].lm_expr.count()
            << "\n";
  return 0;
}

// ---- shape --------------------------------------------------------------------

int cmd_shape_fit(const GlobalArgs& g, const std::string& dataset_dir, const std::string& out,
                  bool include_test) {
  RunConfig cfg = load_config(g);
  std::vector<Sample> samples = load_dataset(dataset_dir);
  if (!include_test) {
    DatasetSplit split = split_by_subject(std::move(samples),
                                          static_cast<int>(cfg.i64("dataset_test_subjects")));
    samples = std::move(split.train);
  }
  const int64_t li = cfg.i64("align_left_eye_idx");
  const int64_t ri = cfg.i64("align_right_eye_idx");
  const Point cl = parse_point(cfg, "align_canonical_left");
  const Point cr = parse_point(cfg, "align_canonical_right");
  std::vector<LandmarkSet> shapes;
  std::set<int> done_subjects;
  for (const Sample& s : samples) {
    shapes.push_back(align_landmarks(s.lm_expr, li, ri, cl, cr).first);
    if (done_subjects.insert(s.subject_id).second) {
      shapes.push_back(align_landmarks(s.lm_neutral, li, ri, cl, cr).first);
    }
  }
  const ShapeBasis basis =
      fit_shape_basis(shapes, ComponentSelect::variance(cfg.f64("shape_variance_fraction")));
  write_shape_basis(out, basis);
  std::cout << "fit basis on " << shapes.size() << " shapes: K=" << basis.K << " N=" << basis.N
            << "\n";
  return 0;
}

int cmd_shape_transfer(const std::string& basis_path, const std::string& source_neutral,
                       const std::string& source_expr, const std::string& target_neutral,
                       const std::string& out, bool params_zero,
                       const std::string& preview_prefix, double sigma) {
  const ShapeBasis basis = read_shape_basis(basis_path);
  const LandmarkSet tgt_neutral = read_landmarks(target_neutral);
  ShapeParams params;
  if (params_zero) {
    params.p.assign(basis.N, 0.0);
  } else {
    params = fit_params(basis, read_landmarks(source_neutral), read_landmarks(source_expr));
  }
  const LandmarkSet transferred = transfer_shape(basis, tgt_neutral, params);
  write_landmarks(out, transferred);
  if (!preview_prefix.empty()) {
    export_heatmap_images(render_heatmap(transferred, kCanvasSize, kCanvasSize, sigma),
                          preview_prefix);
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_shape_interp(const std::string& basis_path, const std::string& neutral_path,
                     const std::string& target_path, int steps, const std::string& out_prefix,
                     bool previews, double sigma) {
  if (steps < 2) throw std::invalid_argument("interp: steps must be >= 2");
  const ShapeBasis basis = read_shape_basis(basis_path);
  const LandmarkSet neutral = read_landmarks(neutral_path);
  const ShapeParams target = fit_params(basis, neutral, read_landmarks(target_path));
  const ShapeParams zero{std::vector<double>(target.p.size(), 0.0)};
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    const LandmarkSet lm =
        shape_from_params(basis, neutral, interpolate_params(zero, target, t));
    const std::string path = out_prefix + "_t" + std::to_string(i) + ".txt";
    write_landmarks(path, lm);
    if (previews) {
      export_heatmap_images(render_heatmap(lm, kCanvasSize, kCanvasSize, sigma),
                            out_prefix + "_t" + std::to_string(i));
    }
  }
  std::cout << "wrote " << steps << " landmark files at " << out_prefix << "_t*.txt\n";
  return 0;
}

// ---- train --------------------------------------------------------------------

int cmd_train(const GlobalArgs& g, const std::string& resume,
              const std::string& identity_checkpoint) {
  RunConfig cfg = load_config(g);
  write_run_config(cfg, g.out_dir);
  const TrainConfig tc = cfg.train_config();

  std::vector<Sample> all = load_dataset(cfg.str("dataset_dir"));
  DatasetSplit split =
      split_by_subject(std::move(all), static_cast<int>(cfg.i64("dataset_test_subjects")));
  std::set<int> train_ids;
  for (const Sample& s : split.train) train_ids.insert(s.subject_id);
  std::cout << "dataset: " << split.train.size() << " train pairs / " << split.test.size()
            << " test pairs, " << train_ids.size() << " train subjects\n";

  Rng r_id(cfg.seed(), "init/idnet");
  IdentityNet idnet(cfg.identity_config(static_cast<int64_t>(train_ids.size())), r_id);
  if (!identity_checkpoint.empty()) {
    load_identity_checkpoint(identity_checkpoint, idnet);
    std::cout << "loaded frozen identity extractor from " << identity_checkpoint << "\n";
  } else {
    const PretrainResult pr = pretrain_identity(idnet, split.train, cfg.pretrain_config());
    std::cout << "identity pretrain: holdout accuracy " << pr.holdout_accuracy * 100.0 << "% ("
              << pr.holdout_count << " held-out images)\n";
    save_identity_checkpoint((fs::path(g.out_dir) / "identity.g2ck").string(), idnet);
  }

  Rng r_ge(cfg.seed(), "init/gen_e"), r_gn(cfg.seed(), "init/gen_n");
  Rng r_de(cfg.seed(), "init/disc_e"), r_dn(cfg.seed(), "init/disc_n");
  GeneratorNet gen_e(cfg.generator_config(), r_ge);
  GeneratorNet gen_n(cfg.generator_config(), r_gn);
  DiscriminatorNet disc_e(cfg.discriminator_config(), r_de);
  DiscriminatorNet disc_n(cfg.discriminator_config(), r_dn);

  Trainer trainer(gen_e, gen_n, disc_e, disc_n, idnet, tc);
  int64_t start = 0;
  if (!resume.empty()) {
    start = trainer.load_checkpoint(resume);
    std::cout << "resumed from " << resume << " at iteration " << start << "\n";
  }

  const auto t0 = std::chrono::steady_clock::now();
  int64_t printed = 0;
  TrainLoopResult result =
      train_loop(trainer, split.train, g.out_dir, start, [&](const LossReport& r) {
        if (r.iteration - printed >= 50 || r.iteration == 0) {
          printed = r.iteration;
          std::printf("it %5lld  g_adv %.4f  pix %.4f  cyc %.4f  id %.4f  g %.4f  d %.4f\n",
                      static_cast<long long>(r.iteration), r.g_adv, r.pixel, r.cyc, r.identity,
                      r.g_total, r.d_adv);
          std::fflush(stdout);
        }
      });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "trained " << tc.iterations - start << " iterations in " << secs
            << " s; grad_clip_norm=" << tc.grad_clip_norm << "\nfinal checkpoint "
            << result.final_checkpoint << "\nloss log " << result.loss_log << "\n";
  return 0;
}

// ---- infer --------------------------------------------------------------------

int cmd_infer_pair(const GlobalArgs& g, const std::string& checkpoint, int index,
                   bool synthesize) {
  RunConfig cfg = load_config(g);
  LoadedModel m = load_model(cfg, checkpoint);
  std::vector<Sample> test = test_samples(cfg);
  if (index < 0 || index >= static_cast<int>(test.size())) {
    throw std::invalid_argument("sample index out of range (test split has " +
                                std::to_string(test.size()) + " pairs)");
  }
  const PreprocessOptions opt = cfg.preprocess_options();
  Rng dummy(0);
  const PreprocessedPair pp = preprocess(test[index], PreprocessMode::kTest, dummy, opt);
  const double sigma = cfg.heatmap_sigma();

  const Tensor fake_n = remove_expression(m.gen_n, pp.image_expr, pp.lm_expr, sigma);
  const Tensor fake_e = synthesize_expression(m.gen_e, pp.image_neutral, pp.lm_expr, sigma);

  fs::create_directories(g.out_dir);
  const std::string tag = sample_tag(test[index]);
  write_pgm((fs::path(g.out_dir) / ("fake_neutral_" + tag + ".pgm")).string(), fake_n);
  write_pgm((fs::path(g.out_dir) / ("fake_expr_" + tag + ".pgm")).string(), fake_e);
  const Tensor grid =
      hstack_images({pp.image_neutral, pp.image_expr, fake_n, fake_e});
  write_pgm((fs::path(g.out_dir) / ("grid_" + tag + ".pgm")).string(), grid);

  std::printf("%s: removal ssim %.4f (input-vs-neutral %.4f), synthesis ssim %.4f "
              "(neutral-vs-expr %.4f)\n",
              tag.c_str(), ssim(pp.image_neutral, fake_n), ssim(pp.image_neutral, pp.image_expr),
              ssim(pp.image_expr, fake_e), ssim(pp.image_expr, pp.image_neutral));
  (void)synthesize;
  return 0;
}

int cmd_infer_transfer(const GlobalArgs& g, const std::string& checkpoint,
                       const std::string& basis_path, int index_a, int index_b) {
  RunConfig cfg = load_config(g);
  LoadedModel m = load_model(cfg, checkpoint);
  const ShapeBasis basis = read_shape_basis(basis_path);
  std::vector<Sample> test = test_samples(cfg);
  if (index_a < 0 || index_a >= static_cast<int>(test.size()) || index_b < 0 ||
      index_b >= static_cast<int>(test.size())) {
    throw std::invalid_argument("sample index out of range");
  }
  const PreprocessOptions opt = cfg.preprocess_options();
  Rng dummy(0);
  const PreprocessedPair pa = preprocess(test[index_a], PreprocessMode::kTest, dummy, opt);
  const PreprocessedPair pb = preprocess(test[index_b], PreprocessMode::kTest, dummy, opt);

  const int64_t li = cfg.i64("align_left_eye_idx");
  const int64_t ri = cfg.i64("align_right_eye_idx");
  const Point cl = parse_point(cfg, "align_canonical_left");
  const Point cr = parse_point(cfg, "align_canonical_right");

  // model the geometry in the aligned canvas frame, then map the
  // transferred shapes back through each subject's own alignment into the
  // test-crop frame that conditions the generators
  auto aligned = [&](const LandmarkSet& lm) { return align_landmarks(lm, li, ri, cl, cr); };
  auto [sa, ta] = aligned(test[index_a].lm_expr);
  auto [sb, tb] = aligned(test[index_b].lm_expr);
  auto [na, ta_n] = aligned(test[index_a].lm_neutral);
  auto [nb, tb_n] = aligned(test[index_b].lm_neutral);

  const ShapeParams p_a = fit_params(basis, na, sa);
  const ShapeParams p_b = fit_params(basis, nb, sb);
  const LandmarkSet s_ab = transfer_shape(basis, na, p_b);
  const LandmarkSet s_ba = transfer_shape(basis, nb, p_a);

  const double sigma = cfg.heatmap_sigma();
  const Tensor neutral_a = remove_expression(m.gen_n, pa.image_expr, pa.lm_expr, sigma);
  const Tensor neutral_b = remove_expression(m.gen_n, pb.image_expr, pb.lm_expr, sigma);
  const LandmarkSet s_ab_img =
      to_test_frame(ta_n.inverse().apply(s_ab), opt.out_size);
  const LandmarkSet s_ba_img =
      to_test_frame(tb_n.inverse().apply(s_ba), opt.out_size);
  const Tensor image_ab = synthesize_expression(m.gen_e, neutral_a, s_ab_img, sigma);
  const Tensor image_ba = synthesize_expression(m.gen_e, neutral_b, s_ba_img, sigma);

  fs::create_directories(g.out_dir);
  write_pgm((fs::path(g.out_dir) / "transfer_ab.pgm").string(), image_ab);
  write_pgm((fs::path(g.out_dir) / "transfer_ba.pgm").string(), image_ba);
  const Tensor grid = hstack_images(
      {pa.image_expr, neutral_a, image_ab, pb.image_expr, neutral_b, image_ba});
  write_pgm((fs::path(g.out_dir) / "transfer_grid.pgm").string(), grid);
  std::cout << "wrote transfer_ab.pgm, transfer_ba.pgm, transfer_grid.pgm in " << g.out_dir
            << "\n";
  return 0;
}

int cmd_infer_interpolate(const GlobalArgs& g, const std::string& checkpoint,
                          const std::string& basis_path, int index, const std::string& label,
                          int steps) {
  RunConfig cfg = load_config(g);
  LoadedModel m = load_model(cfg, checkpoint);
  const ShapeBasis basis = read_shape_basis(basis_path);

  std::vector<Sample> all = load_dataset(cfg.str("dataset_dir"));
  DatasetSplit split =
      split_by_subject(std::move(all), static_cast<int>(cfg.i64("dataset_test_subjects")));
  if (index < 0 || index >= static_cast<int>(split.test.size())) {
    throw std::invalid_argument("sample index out of range");
  }

  const int64_t li = cfg.i64("align_left_eye_idx");
  const int64_t ri = cfg.i64("align_right_eye_idx");
  const Point cl = parse_point(cfg, "align_canonical_left");
  const Point cr = parse_point(cfg, "align_canonical_right");

  // semantic prototypes from the training split, in the aligned frame
  std::vector<LabeledShapePair> labeled;
  for (const Sample& s : split.train) {
    labeled.push_back({align_landmarks(s.lm_neutral, li, ri, cl, cr).first,
                       align_landmarks(s.lm_expr, li, ri, cl, cr).first, s.expression_label});
  }
  const auto prototypes = semantic_prototypes(basis, labeled);
  const auto it = prototypes.find(label);
  if (it == prototypes.end()) {
    throw std::invalid_argument("unknown expression label '" + label + "'");
  }

  const Sample& src = split.test[index];
  const PreprocessOptions opt = cfg.preprocess_options();
  Rng dummy(0);
  const PreprocessedPair pp = preprocess(src, PreprocessMode::kTest, dummy, opt);
  auto [n_aligned, t_n] = align_landmarks(src.lm_neutral, li, ri, cl, cr);

  const double sigma = cfg.heatmap_sigma();
  fs::create_directories(g.out_dir);
  std::vector<Tensor> frames;
  const ShapeParams zero{std::vector<double>(it->second.p.size(), 0.0)};
  for (int i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    const LandmarkSet lm_aligned =
        shape_from_params(basis, n_aligned, interpolate_params(zero, it->second, t));
    const LandmarkSet lm_img = to_test_frame(t_n.inverse().apply(lm_aligned), opt.out_size);
    frames.push_back(synthesize_expression(m.gen_e, pp.image_neutral, lm_img, sigma));
    write_pgm((fs::path(g.out_dir) / ("interp_" + std::to_string(i) + ".pgm")).string(),
              frames.back());
  }
  write_pgm((fs::path(g.out_dir) / "interp_grid.pgm").string(), hstack_images(frames));
  std::cout << "wrote " << steps << " frames + interp_grid.pgm in " << g.out_dir << "\n";
  return 0;
}

// ---- evaluate -----------------------------------------------------------------

int cmd_evaluate_metrics(const GlobalArgs& g, const std::string& checkpoint) {
  RunConfig cfg = load_config(g);
  LoadedModel m = load_model(cfg, checkpoint);
  std::vector<Sample> test = test_samples(cfg);
  const PreprocessOptions opt = cfg.preprocess_options();
  const double sigma = cfg.heatmap_sigma();
  Rng dummy(0);

  std::vector<PairMetrics> synth_rows, removal_rows;
  for (const Sample& s : test) {
    const PreprocessedPair pp = preprocess(s, PreprocessMode::kTest, dummy, opt);
    const Tensor fake_e = synthesize_expression(m.gen_e, pp.image_neutral, pp.lm_expr, sigma);
    const Tensor fake_n = remove_expression(m.gen_n, pp.image_expr, pp.lm_expr, sigma);
    synth_rows.push_back({sample_tag(s), psnr(pp.image_expr, fake_e), ssim(pp.image_expr, fake_e)});
    removal_rows.push_back(
        {sample_tag(s), psnr(pp.image_neutral, fake_n), ssim(pp.image_neutral, fake_n)});
  }
  const MetricReport synth = aggregate_metrics(std::move(synth_rows));
  const MetricReport removal = aggregate_metrics(std::move(removal_rows));
  fs::create_directories(g.out_dir);
  const std::string report_path = (fs::path(g.out_dir) / "metrics.tsv").string();
  write_metric_report(report_path, synth, removal);
  std::printf("removal:   SSIM %.3f  PSNR %.3f\n", removal.mean_ssim, removal.mean_psnr);
  std::printf("synthesis: SSIM %.3f  PSNR %.3f\n", synth.mean_ssim, synth.mean_psnr);
  std::cout << "per-pair records in " << report_path << "\n";
  return 0;
}

int cmd_evaluate_recognition(const GlobalArgs& g, const std::string& checkpoint,
                             bool probe_equals_gallery) {
  RunConfig cfg = load_config(g);
  LoadedModel m = load_model(cfg, checkpoint);
  std::vector<Sample> test = test_samples(cfg);
  const PreprocessOptions opt = cfg.preprocess_options();
  const double sigma = cfg.heatmap_sigma();
  Rng dummy(0);

  auto feature_of = [&m](const Tensor& img) {
    const Tensor f = m.idnet.features(img);
    return std::vector<double>(f.data(), f.data() + f.numel());
  };

  std::vector<FeatureEntry> gallery;
  std::set<int> seen;
  std::vector<FeatureEntry> probes_orig;
  std::vector<ProbeImage> probe_images;
  std::vector<int> probe_ids;
  for (const Sample& s : test) {
    const PreprocessedPair pp = preprocess(s, PreprocessMode::kTest, dummy, opt);
    if (seen.insert(s.subject_id).second) {
      gallery.push_back({s.subject_id, feature_of(pp.image_neutral)});
    }
    probes_orig.push_back({s.subject_id, feature_of(pp.image_expr)});
    probe_images.push_back({pp.image_expr, pp.lm_expr});
    probe_ids.push_back(s.subject_id);
  }

  RecognitionResult original = probe_equals_gallery
                                   ? recognition_eval(gallery, gallery)
                                   : recognition_eval(gallery, probes_orig);

  const std::vector<Tensor> transformed =
      expression_invariant_probe_transform(m.gen_n, probe_images, sigma);
  std::vector<FeatureEntry> probes_trans;
  for (size_t i = 0; i < transformed.size(); ++i) {
    probes_trans.push_back({probe_ids[i], feature_of(transformed[i])});
  }
  const RecognitionResult removed = recognition_eval(gallery, probes_trans);

  fs::create_directories(g.out_dir);
  const std::string path = (fs::path(g.out_dir) / "recognition.tsv").string();
  std::ofstream os(path, std::ios::trunc);
  os << "configuration\trank1\ttar_far1\ttar_far01\n";
  char row[160];
  std::snprintf(row, sizeof(row), "original\t%.2f\t%.2f\t%.2f\n", original.rank1,
                original.tar_at_far1, original.tar_at_far01);
  os << row;
  std::snprintf(row, sizeof(row), "expression_removed\t%.2f\t%.2f\t%.2f\n", removed.rank1,
                removed.tar_at_far1, removed.tar_at_far01);
  os << row;
  os.close();
  std::printf("original:            rank-1 %.2f  TAR@1%% %.2f  TAR@0.1%% %.2f\n", original.rank1,
              original.tar_at_far1, original.tar_at_far01);
  std::printf("expression removed:  rank-1 %.2f  TAR@1%% %.2f  TAR@0.1%% %.2f\n", removed.rank1,
              removed.tar_at_far1, removed.tar_at_far01);
  std::cout << "report in " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geometry-guided facial expression editing toolbox"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "key=value configuration file");
  app.add_option("--seed", g.seed_override, "override the configured seed");
  app.add_option("--out", g.out_dir, "output directory");

  // dataset
  auto* dataset = app.add_subcommand("dataset", "generate or validate synthetic datasets");
  auto* ds_gen = dataset->add_subcommand("gen", "generate a synthetic dataset");
  int64_t subjects = -1, expressions = -1, intensities = -1;
  ds_gen->add_option("--subjects", subjects, "subject count");
  ds_gen->add_option("--expressions", expressions, "expression presets per subject");
  ds_gen->add_option("--intensities", intensities, "intensity levels per expression");
  auto* ds_val = dataset->add_subcommand("validate", "validate a dataset directory");
  std::string val_dir;
  ds_val->add_option("--dir", val_dir, "dataset directory")->required();

  // shape
  auto* shape = app.add_subcommand("shape", "shape model fitting and manipulation");
  auto* sh_fit = shape->add_subcommand("fit", "fit a PCA shape basis");
  std::string fit_dataset, fit_out = "basis.g2sb";
  bool fit_all = false;
  sh_fit->add_option("--dataset", fit_dataset, "dataset directory")->required();
  sh_fit->add_option("--basis-out", fit_out, "output basis file");
  sh_fit->add_flag("--all-subjects", fit_all, "fit on all subjects, not just the train split");
  auto* sh_tr = shape->add_subcommand("transfer", "transfer expression parameters");
  std::string tr_basis, tr_src_n, tr_src_e, tr_tgt_n, tr_out = "transferred.txt", tr_preview;
  bool tr_zero = false;
  double tr_sigma = 2.0;
  sh_tr->add_option("--basis", tr_basis)->required();
  sh_tr->add_option("--source-neutral", tr_src_n);
  sh_tr->add_option("--source-expr", tr_src_e);
  sh_tr->add_option("--target-neutral", tr_tgt_n)->required();
  sh_tr->add_option("--landmarks-out", tr_out);
  sh_tr->add_option("--preview-prefix", tr_preview);
  sh_tr->add_option("--sigma", tr_sigma);
  sh_tr->add_flag("--params-zero", tr_zero, "transfer the zero parameter vector");
  auto* sh_in = shape->add_subcommand("interp", "interpolate expression parameters");
  std::string in_basis, in_neutral, in_target, in_prefix = "interp";
  int in_steps = 5;
  bool in_previews = false;
  double in_sigma = 2.0;
  sh_in->add_option("--basis", in_basis)->required();
  sh_in->add_option("--neutral", in_neutral)->required();
  sh_in->add_option("--target", in_target)->required();
  sh_in->add_option("--steps", in_steps);
  sh_in->add_option("--out-prefix", in_prefix);
  sh_in->add_option("--sigma", in_sigma);
  sh_in->add_flag("--previews", in_previews, "emit heatmap previews per step");

  // train
  auto* train = app.add_subcommand("train", "train the paired translation models");
  std::string resume, identity_ckpt;
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--identity-checkpoint", identity_ckpt,
                    "frozen identity extractor (skips pretraining)");

  // infer
  auto* infer = app.add_subcommand("infer", "run trained models");
  std::string inf_ckpt, inf_basis, inf_label = "happiness";
  int inf_index = 0, inf_index_b = 1, inf_steps = 5;
  auto* inf_rm = infer->add_subcommand("remove", "expression removal on a test sample");
  auto* inf_sy = infer->add_subcommand("synthesize", "expression synthesis on a test sample");
  auto* inf_tr = infer->add_subcommand("transfer", "expression transfer between two samples");
  auto* inf_ip = infer->add_subcommand("interpolate", "expression intensity interpolation");
  for (CLI::App* sub : {inf_rm, inf_sy, inf_tr, inf_ip}) {
    sub->add_option("--checkpoint", inf_ckpt, "training checkpoint")->required();
    sub->add_option("--index", inf_index, "test-split sample index");
  }
  inf_tr->add_option("--index-b", inf_index_b, "second test-split sample index");
  inf_tr->add_option("--basis", inf_basis, "shape basis file")->required();
  inf_ip->add_option("--basis", inf_basis, "shape basis file")->required();
  inf_ip->add_option("--label", inf_label, "expression prototype label");
  inf_ip->add_option("--steps", inf_steps, "frame count");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "metric and recognition suites");
  auto* ev_me = evaluate->add_subcommand("metrics", "SSIM/PSNR over the test split");
  auto* ev_re = evaluate->add_subcommand("recognition", "rank-1 and TAR@FAR verification");
  std::string ev_ckpt;
  bool ev_probe_gallery = false;
  ev_me->add_option("--checkpoint", ev_ckpt)->required();
  ev_re->add_option("--checkpoint", ev_ckpt)->required();
  ev_re->add_flag("--probe-equals-gallery", ev_probe_gallery,
                  "smoke mode: probe set equals the gallery");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ds_gen) {
      RunConfig cfg = load_config(g);
      if (subjects > 0) cfg.set("dataset_subjects", std::to_string(subjects));
      if (expressions > 0) cfg.set("dataset_expressions", std::to_string(expressions));
      if (intensities > 0) cfg.set("dataset_intensities", std::to_string(intensities));
      const GlobalArgs& ga = g;
      DatasetSpec spec = cfg.dataset_spec();
      const std::string manifest = make_dataset(spec, ga.out_dir);
      write_run_config(cfg, ga.out_dir);
      std::cout << "wrote " << manifest << "\n";
      return 0;
    }
    if (*ds_val) return cmd_dataset_validate(val_dir);
    if (*sh_fit) return cmd_shape_fit(g, fit_dataset, fit_out, fit_all);
    if (*sh_tr) {
      if (!tr_zero && (tr_src_n.empty() || tr_src_e.empty())) {
        throw std::invalid_argument(
            "transfer: --source-neutral and --source-expr required unless --params-zero");
      }
      return cmd_shape_transfer(tr_basis, tr_src_n, tr_src_e, tr_tgt_n, tr_out, tr_zero,
                                tr_preview, tr_sigma);
    }
    if (*sh_in) {
      return cmd_shape_interp(in_basis, in_neutral, in_target, in_steps, in_prefix, in_previews,
                              in_sigma);
    }
    if (*train) return cmd_train(g, resume, identity_ckpt);
    if (*inf_rm) return cmd_infer_pair(g, inf_ckpt, inf_index, false);
    if (*inf_sy) return cmd_infer_pair(g, inf_ckpt, inf_index, true);
    if (*inf_tr) return cmd_infer_transfer(g, inf_ckpt, inf_basis, inf_index, inf_index_b);
    if (*inf_ip) {
      return cmd_infer_interpolate(g, inf_ckpt, inf_basis, inf_index, inf_label, inf_steps);
    }
    if (*ev_me) return cmd_evaluate_metrics(g, ev_ckpt);
    if (*ev_re) return cmd_evaluate_recognition(g, ev_ckpt, ev_probe_gallery);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "no command selected\n";
  return 1;
}
