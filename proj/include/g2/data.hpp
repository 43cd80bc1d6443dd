#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "g2/rng.hpp"
#include "g2/shape_model.hpp"
#include "g2/tensor.hpp"

namespace g2 {

// Canvas and landmark markup constants for the procedural face generator.
// Markup (18 points):
//   0-3   left eye:  inner corner, outer corner, top lid, bottom lid
//   4-7   right eye: inner corner, outer corner, top lid, bottom lid
//   8-9   left brow:  inner, outer
//   10-11 right brow: inner, outer
//   12    nose tip
//   13-16 mouth: left corner, right corner, top mid, bottom mid
//   17    chin
// "left"/"right" are image-side (viewer's left has the smaller x).
constexpr int64_t kCanvasSize = 144;
constexpr int64_t kLandmarkCount = 18;

// Landmark pairs swapped by a horizontal flip; unlisted points are on the
// symmetry axis and keep their index.
const std::vector<std::pair<int, int>>& flip_pair_table();

// Identity parameters of one synthetic subject. All fields are drawn
// uniformly from the documented ranges; the same seed yields the same
// subject.
struct SyntheticSubject {
  uint64_t seed = 0;
  double face_rx;      // face ellipse semi-axis x, [44, 56]
  double face_ry;      // face ellipse semi-axis y, [54, 66]
  double eye_dx;       // eye center half-separation, [17, 25]
  double eye_y;        // eye row, [60, 66]
  double eye_w;        // eye half-width, [6.5, 10]
  double eye_h;        // eye half-height, [2.5, 4.5]
  double brow_h;       // brow height above the eye row, [8, 13]
  double brow_len;     // brow half-length, [9, 13]
  double nose_len;     // eye row to nose tip, [16, 24]
  double mouth_drop;   // nose tip to mouth midline, [14, 19]
  double mouth_w;      // mouth half-width, [11, 16]
  double lip_h;        // lip half-height, [2.5, 4.5]
  double base_gray;    // skin tone, [0.55, 0.80]
  double tex_amp;      // texture amplitude, [0.02, 0.06]
  double tex_fx;       // texture frequency x, [0.02, 0.09]
  double tex_fy;       // texture frequency y, [0.02, 0.09]
  double tex_phase;    // texture phase, [0, 2*pi)
};

// Per-organ landmark displacements in pixels. Kinematics (exact):
//   mouth corners:  (-/+ 0.25*lift, -lift) for left/right corner... x moves
//                   outward by 0.25*lift on each side, y up by lift
//   mouth opening:  top mid up by 0.25*open, bottom mid down by open
//   brow raise:     all four brow points up by raise
//   brow furrow:    inner brow points toward the center x by furrow and
//                   down by 0.5*furrow
//   eye openness:   top lids up by 0.5*openness, bottom lids down by
//                   0.5*openness
struct ExpressionOffsets {
  double mouth_corner_lift = 0.0;
  double mouth_open = 0.0;
  double brow_raise = 0.0;
  double brow_furrow = 0.0;
  double eye_openness = 0.0;
};

struct ExpressionPreset {
  std::string label;
  ExpressionOffsets offsets;
};

// The six named presets, in fixed order.
const std::vector<ExpressionPreset>& expression_presets();

ExpressionOffsets scale_offsets(const ExpressionOffsets& offsets, double intensity);

// One training pair: neutral and expressioned renderings of a subject plus
// their exact landmark sets.
struct Sample {
  int subject_id = -1;
  std::string expression_label;
  double intensity = 1.0;
  Tensor image_neutral;  // [1,144,144] in [0,1]
  Tensor image_expr;
  LandmarkSet lm_neutral;
  LandmarkSet lm_expr;
};

SyntheticSubject generate_subject(uint64_t seed);

LandmarkSet neutral_landmarks(const SyntheticSubject& subject);
LandmarkSet apply_offsets(const LandmarkSet& neutral, const ExpressionOffsets& offsets);

// Renders anti-aliased face curves from the landmark polylines; the emitted
// landmarks are exactly the control points used to draw. Throws if any
// landmark leaves the canvas.
std::pair<Tensor, LandmarkSet> render_face(const SyntheticSubject& subject,
                                           const ExpressionOffsets& offsets);

// ---- on-disk dataset ---------------------------------------------------------
// Manifest: TSV, one row per (neutral, expressioned) pair:
//   subject_id  expression_label  intensity  neutral_image  expr_image
//   neutral_landmarks  expr_landmarks
// with paths relative to the dataset directory.
struct DatasetSpec {
  int n_subjects = 20;
  int expressions_per_subject = 6;  // preset count used, <= 6
  int intensities = 3;
  uint64_t seed = 7;
};

std::string make_dataset(const DatasetSpec& spec, const std::string& out_dir);
std::vector<Sample> load_dataset(const std::string& dir);

// Split by subject id: the highest `test_subjects` ids form the test set.
struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};
DatasetSplit split_by_subject(std::vector<Sample> samples, int test_subjects);

// ---- preprocessing -----------------------------------------------------------
struct PreprocessOptions {
  int out_size = 64;        // final square size; 128 / out_size must divide
  double sigma = 1.0;       // heatmap sigma at out_size
  bool aggregated_heatmap = false;
};

enum class PreprocessMode { kTrain, kTest };

struct PreprocessedPair {
  Tensor image_neutral;  // [1,S,S]
  Tensor image_expr;     // [1,S,S]
  Tensor heatmap_expr;   // [K or 1, S, S]
  LandmarkSet lm_neutral;
  LandmarkSet lm_expr;
  bool flipped = false;
  int64_t crop_dx = 0, crop_dy = 0;
};

// Train mode: random 128x128 crop of the 144x144 input plus a 50%
// horizontal flip (landmarks permuted via the flip pair table and mapped
// x -> W-1-x). Test mode: center crop (8,8), no flip. If out_size != 128
// the crop is box-downsampled by the integer factor and landmark
// coordinates rescaled under the pixel-center convention. Heatmaps are
// rendered after all coordinate transforms.
PreprocessedPair preprocess(const Sample& sample, PreprocessMode mode, Rng& rng,
                            const PreprocessOptions& opt);

// Flip helper shared by preprocess and tests.
LandmarkSet flip_landmarks(const LandmarkSet& lm, int64_t width);
Tensor flip_image(const Tensor& image);

// Canvas-frame landmarks -> coordinates of the test-mode crop at out_size
// (center crop to 128, then the box-downsample rescale).
LandmarkSet to_test_frame(const LandmarkSet& canvas_lm, int out_size);

}  // namespace g2
