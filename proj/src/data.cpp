#include "g2/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "g2/heatmap.hpp"
#include "g2/image_io.hpp"

namespace fs = std::filesystem;

namespace g2 {

const std::vector<std::pair<int, int>>& flip_pair_table() {
  static const std::vector<std::pair<int, int>> table = {
      {0, 4}, {1, 5}, {2, 6}, {3, 7},  // eyes
      {8, 10}, {9, 11},                // brows
      {13, 14},                        // mouth corners
  };
  return table;
}

const std::vector<ExpressionPreset>& expression_presets() {
  static const std::vector<ExpressionPreset> presets = {
      {"happiness", {6.0, 2.0, 1.0, 0.0, -1.0}},
      {"surprise", {0.0, 7.0, 5.0, 0.0, 3.0}},
      {"anger", {-3.0, 0.0, -2.0, 3.0, -1.5}},
      {"disgust", {-2.0, 1.0, -1.0, 2.0, -2.0}},
      {"fear", {-1.0, 4.0, 4.0, 1.5, 2.5}},
      {"sadness", {-4.0, 0.5, 2.0, 1.0, -1.0}},
  };
  return presets;
}

ExpressionOffsets scale_offsets(const ExpressionOffsets& o, double intensity) {
  return {o.mouth_corner_lift * intensity, o.mouth_open * intensity, o.brow_raise * intensity,
          o.brow_furrow * intensity, o.eye_openness * intensity};
}

SyntheticSubject generate_subject(uint64_t seed) {
  Rng rng(seed);
  SyntheticSubject s;
  s.seed = seed;
  s.face_rx = rng.uniform(44.0, 56.0);
  s.face_ry = rng.uniform(54.0, 66.0);
  s.eye_dx = rng.uniform(17.0, 25.0);
  s.eye_y = rng.uniform(60.0, 66.0);
  s.eye_w = rng.uniform(6.5, 10.0);
  s.eye_h = rng.uniform(2.5, 4.5);
  s.brow_h = rng.uniform(8.0, 13.0);
  s.brow_len = rng.uniform(9.0, 13.0);
  s.nose_len = rng.uniform(16.0, 24.0);
  s.mouth_drop = rng.uniform(14.0, 19.0);
  s.mouth_w = rng.uniform(11.0, 16.0);
  s.lip_h = rng.uniform(2.5, 4.5);
  s.base_gray = rng.uniform(0.55, 0.80);
  s.tex_amp = rng.uniform(0.02, 0.06);
  s.tex_fx = rng.uniform(0.02, 0.09);
  s.tex_fy = rng.uniform(0.02, 0.09);
  s.tex_phase = rng.uniform(0.0, 2.0 * M_PI);
  return s;
}

namespace {
constexpr double kFaceCx = 72.0;
constexpr double kFaceCy = 74.0;
}  // namespace

LandmarkSet neutral_landmarks(const SyntheticSubject& s) {
  LandmarkSet lm(kLandmarkCount);
  const double lx = kFaceCx - s.eye_dx;  // left eye center
  const double rx = kFaceCx + s.eye_dx;
  const double ey = s.eye_y;
  lm.set(0, lx + s.eye_w, ey);   // left eye inner (nose side)
  lm.set(1, lx - s.eye_w, ey);   // left eye outer
  lm.set(2, lx, ey - s.eye_h);   // left eye top
  lm.set(3, lx, ey + s.eye_h);   // left eye bottom
  lm.set(4, rx - s.eye_w, ey);   // right eye inner
  lm.set(5, rx + s.eye_w, ey);   // right eye outer
  lm.set(6, rx, ey - s.eye_h);
  lm.set(7, rx, ey + s.eye_h);
  const double by = ey - s.brow_h;
  lm.set(8, lx + s.brow_len, by);   // left brow inner
  lm.set(9, lx - s.brow_len, by);   // left brow outer
  lm.set(10, rx - s.brow_len, by);  // right brow inner
  lm.set(11, rx + s.brow_len, by);  // right brow outer
  const double nose_y = ey + s.nose_len;
  lm.set(12, kFaceCx, nose_y);
  const double my = nose_y + s.mouth_drop;
  lm.set(13, kFaceCx - s.mouth_w, my);
  lm.set(14, kFaceCx + s.mouth_w, my);
  lm.set(15, kFaceCx, my - s.lip_h);
  lm.set(16, kFaceCx, my + s.lip_h);
  lm.set(17, kFaceCx, kFaceCy + s.face_ry);
  return lm;
}

LandmarkSet apply_offsets(const LandmarkSet& neutral, const ExpressionOffsets& o) {
  LandmarkSet lm = neutral;
  // mouth corners
  lm.set(13, lm.x(13) - 0.25 * o.mouth_corner_lift, lm.y(13) - o.mouth_corner_lift);
  lm.set(14, lm.x(14) + 0.25 * o.mouth_corner_lift, lm.y(14) - o.mouth_corner_lift);
  // mouth opening
  lm.set(15, lm.x(15), lm.y(15) - 0.25 * o.mouth_open);
  lm.set(16, lm.x(16), lm.y(16) + o.mouth_open);
  // brow raise
  for (int i : {8, 9, 10, 11}) lm.set(i, lm.x(i), lm.y(i) - o.brow_raise);
  // brow furrow: inner points toward center, slightly down
  lm.set(8, lm.x(8) + o.brow_furrow, lm.y(8) + 0.5 * o.brow_furrow);
  lm.set(10, lm.x(10) - o.brow_furrow, lm.y(10) + 0.5 * o.brow_furrow);
  // eye openness
  for (int i : {2, 6}) lm.set(i, lm.x(i), lm.y(i) - 0.5 * o.eye_openness);
  for (int i : {3, 7}) lm.set(i, lm.x(i), lm.y(i) + 0.5 * o.eye_openness);
  return lm;
}

namespace {

struct Canvas {
  int64_t size;
  std::vector<double> px;
  explicit Canvas(int64_t n, double fill) : size(n), px(n * n, fill) {}
  double& at(int64_t y, int64_t x) { return px[y * size + x]; }
};

struct Mask {
  int64_t size;
  std::vector<double> cov;
  explicit Mask(int64_t n) : size(n), cov(n * n, 0.0) {}
};

// capsule coverage: distance from pixel center to segment, smoothed over
// one pixel so edges are anti-aliased
void stroke_segment(Mask& m, Point a, Point b, double radius) {
  const double x0 = std::min(a.x, b.x) - radius - 1.0;
  const double x1 = std::max(a.x, b.x) + radius + 1.0;
  const double y0 = std::min(a.y, b.y) - radius - 1.0;
  const double y1 = std::max(a.y, b.y) + radius + 1.0;
  const int64_t ix0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(x0)));
  const int64_t ix1 = std::min<int64_t>(m.size - 1, static_cast<int64_t>(std::ceil(x1)));
  const int64_t iy0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(y0)));
  const int64_t iy1 = std::min<int64_t>(m.size - 1, static_cast<int64_t>(std::ceil(y1)));
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  for (int64_t y = iy0; y <= iy1; ++y) {
    for (int64_t x = ix0; x <= ix1; ++x) {
      const double pxd = static_cast<double>(x) - a.x;
      const double pyd = static_cast<double>(y) - a.y;
      double t = len2 > 0.0 ? (pxd * vx + pyd * vy) / len2 : 0.0;
      t = std::min(1.0, std::max(0.0, t));
      const double dx = pxd - t * vx, dy = pyd - t * vy;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double c = std::min(1.0, std::max(0.0, radius + 0.5 - d));
      double& cell = m.cov[y * m.size + x];
      cell = std::max(cell, c);
    }
  }
}

// quadratic curve through three points (passes through mid at t=0.5)
void stroke_curve3(Mask& m, Point p0, Point mid, Point p2, double radius) {
  const Point ctrl{2.0 * mid.x - 0.5 * (p0.x + p2.x), 2.0 * mid.y - 0.5 * (p0.y + p2.y)};
  constexpr int kSegments = 24;
  Point prev = p0;
  for (int i = 1; i <= kSegments; ++i) {
    const double t = static_cast<double>(i) / kSegments;
    const double u = 1.0 - t;
    Point cur{u * u * p0.x + 2.0 * u * t * ctrl.x + t * t * p2.x,
              u * u * p0.y + 2.0 * u * t * ctrl.y + t * t * p2.y};
    stroke_segment(m, prev, cur, radius);
    prev = cur;
  }
}

void fill_disc(Mask& m, Point c, double radius) {
  stroke_segment(m, c, c, radius);
}

void blend(Canvas& canvas, const Mask& m, double ink) {
  for (int64_t i = 0; i < canvas.size * canvas.size; ++i) {
    const double c = m.cov[i];
    if (c > 0.0) canvas.px[i] = canvas.px[i] * (1.0 - c) + ink * c;
  }
}

}  // namespace

std::pair<Tensor, LandmarkSet> render_face(const SyntheticSubject& s,
                                           const ExpressionOffsets& offsets) {
  const LandmarkSet lm = apply_offsets(neutral_landmarks(s), offsets);
  for (int64_t i = 0; i < lm.count(); ++i) {
    if (lm.x(i) < 0.0 || lm.x(i) > kCanvasSize - 1 || lm.y(i) < 0.0 ||
        lm.y(i) > kCanvasSize - 1) {
      throw std::invalid_argument("render_face: landmark " + std::to_string(i) +
                                  " leaves the canvas");
    }
  }

  Canvas canvas(kCanvasSize, 0.08);

  // face ellipse fill with anti-aliased edge and a subtle per-subject texture
  for (int64_t y = 0; y < kCanvasSize; ++y) {
    for (int64_t x = 0; x < kCanvasSize; ++x) {
      const double nx = (static_cast<double>(x) - kFaceCx) / s.face_rx;
      const double ny = (static_cast<double>(y) - kFaceCy) / s.face_ry;
      const double f = std::sqrt(nx * nx + ny * ny);
      const double edge = (1.0 - f) * std::min(s.face_rx, s.face_ry);
      const double cov = std::min(1.0, std::max(0.0, edge + 0.5));
      if (cov <= 0.0) continue;
      const double tex = s.tex_amp * std::sin(2.0 * M_PI * s.tex_fx * x + s.tex_phase) *
                         std::sin(2.0 * M_PI * s.tex_fy * y + 0.7 * s.tex_phase);
      const double shade = 0.03 * ny;  // mild vertical shading
      const double skin = s.base_gray + tex - shade;
      canvas.at(y, x) = canvas.at(y, x) * (1.0 - cov) + skin * cov;
    }
  }

  const double ink = 0.16;

  // brows
  {
    Mask m(kCanvasSize);
    stroke_segment(m, lm.point(8), lm.point(9), 1.6);
    stroke_segment(m, lm.point(10), lm.point(11), 1.6);
    blend(canvas, m, ink);
  }
  // eyes: top and bottom lid curves plus an iris disc
  {
    Mask m(kCanvasSize);
    stroke_curve3(m, lm.point(1), lm.point(2), lm.point(0), 0.9);  // left top
    stroke_curve3(m, lm.point(1), lm.point(3), lm.point(0), 0.9);  // left bottom
    stroke_curve3(m, lm.point(4), lm.point(6), lm.point(5), 0.9);  // right top
    stroke_curve3(m, lm.point(4), lm.point(7), lm.point(5), 0.9);  // right bottom
    const Point lc{0.5 * (lm.x(0) + lm.x(1)), 0.5 * (lm.y(2) + lm.y(3))};
    const Point rc{0.5 * (lm.x(4) + lm.x(5)), 0.5 * (lm.y(6) + lm.y(7))};
    const double iris = std::min(2.4, 0.45 * (lm.y(3) - lm.y(2)) + 0.8);
    fill_disc(m, lc, iris);
    fill_disc(m, rc, iris);
    blend(canvas, m, ink * 0.7);
  }
  // nose: bridge from between the eyes down to the tip, short base stroke
  {
    Mask m(kCanvasSize);
    const Point bridge{kFaceCx, s.eye_y + 2.0};
    stroke_segment(m, bridge, lm.point(12), 0.8);
    stroke_segment(m, {lm.x(12) - 3.0, lm.y(12)}, {lm.x(12) + 3.0, lm.y(12)}, 0.8);
    blend(canvas, m, ink * 1.3);
  }
  // mouth: upper and lower lip curves through the corners
  {
    Mask m(kCanvasSize);
    stroke_curve3(m, lm.point(13), lm.point(15), lm.point(14), 1.1);
    stroke_curve3(m, lm.point(13), lm.point(16), lm.point(14), 1.1);
    blend(canvas, m, ink * 0.8);
  }

  Tensor img(Shape{1, kCanvasSize, kCanvasSize});
  for (int64_t i = 0; i < kCanvasSize * kCanvasSize; ++i) {
    img[i] = std::min(1.0, std::max(0.0, canvas.px[i]));
  }
  return {img, lm};
}

// ---- dataset -------------------------------------------------------------------

namespace {

std::string subject_tag(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%03d", id);
  return buf;
}

}  // namespace

std::string make_dataset(const DatasetSpec& spec, const std::string& out_dir) {
  if (spec.n_subjects < 1 || spec.expressions_per_subject < 1 || spec.intensities < 1) {
    throw std::invalid_argument("make_dataset: counts must be >= 1");
  }
  if (spec.expressions_per_subject > static_cast<int>(expression_presets().size())) {
    throw std::invalid_argument("make_dataset: at most " +
                                std::to_string(expression_presets().size()) +
                                " expression presets available");
  }
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "landmarks");

  std::ostringstream manifest;
  for (int id = 0; id < spec.n_subjects; ++id) {
    const SyntheticSubject subject = generate_subject(derive_seed(spec.seed, "subject", id));
    auto [neutral_img, neutral_lm] = render_face(subject, ExpressionOffsets{});
    const std::string tag = subject_tag(id);
    const std::string neutral_img_rel = "images/" + tag + "_neutral.pgm";
    const std::string neutral_lm_rel = "landmarks/" + tag + "_neutral.txt";
    write_pgm((fs::path(out_dir) / neutral_img_rel).string(), neutral_img);
    write_landmarks((fs::path(out_dir) / neutral_lm_rel).string(), neutral_lm);

    for (int e = 0; e < spec.expressions_per_subject; ++e) {
      const ExpressionPreset& preset = expression_presets()[e];
      for (int level = 1; level <= spec.intensities; ++level) {
        const double intensity = static_cast<double>(level) / spec.intensities;
        auto [img, lm] = render_face(subject, scale_offsets(preset.offsets, intensity));
        const std::string stem = tag + "_" + preset.label + "_i" + std::to_string(level);
        const std::string img_rel = "images/" + stem + ".pgm";
        const std::string lm_rel = "landmarks/" + stem + ".txt";
        write_pgm((fs::path(out_dir) / img_rel).string(), img);
        write_landmarks((fs::path(out_dir) / lm_rel).string(), lm);
        char row[512];
        std::snprintf(row, sizeof(row), "%d\t%s\t%.17g\t%s\t%s\t%s\t%s\n", id,
                      preset.label.c_str(), intensity, neutral_img_rel.c_str(), img_rel.c_str(),
                      neutral_lm_rel.c_str(), lm_rel.c_str());
        manifest << row;
      }
    }
  }
  const std::string manifest_path = (fs::path(out_dir) / "manifest.tsv").string();
  std::ofstream os(manifest_path, std::ios::trunc);
  if (!os) throw std::runtime_error("make_dataset: cannot write manifest: " + manifest_path);
  os << manifest.str();
  os.close();
  if (!os) throw std::runtime_error("make_dataset: manifest write failed");
  return manifest_path;
}

std::vector<Sample> load_dataset(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.tsv").string();
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("load_dataset: missing manifest: " + manifest_path);

  std::vector<Sample> samples;
  int64_t uniform_k = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string subject_id, label, intensity, n_img, e_img, n_lm, e_lm;
    if (!std::getline(row, subject_id, '\t') || !std::getline(row, label, '\t') ||
        !std::getline(row, intensity, '\t') || !std::getline(row, n_img, '\t') ||
        !std::getline(row, e_img, '\t') || !std::getline(row, n_lm, '\t') ||
        !std::getline(row, e_lm, '\t')) {
      throw std::runtime_error("load_dataset: malformed manifest row " + std::to_string(lineno));
    }
    Sample s;
    s.subject_id = std::stoi(subject_id);
    s.expression_label = label;
    s.intensity = std::stod(intensity);
    auto resolve = [&dir](const std::string& rel) { return (fs::path(dir) / rel).string(); };
    for (const std::string& rel : {n_img, e_img, n_lm, e_lm}) {
      if (!fs::exists(resolve(rel))) {
        throw std::runtime_error("load_dataset: missing file referenced by manifest: " + rel);
      }
    }
    s.image_neutral = read_image(resolve(n_img));
    s.image_expr = read_image(resolve(e_img));
    s.lm_neutral = read_landmarks(resolve(n_lm));
    s.lm_expr = read_landmarks(resolve(e_lm));
    if (!s.image_neutral.same_shape(s.image_expr)) {
      throw std::runtime_error("load_dataset: image shape mismatch in row " +
                               std::to_string(lineno));
    }
    if (s.lm_neutral.count() != s.lm_expr.count()) {
      throw std::runtime_error("load_dataset: uniform-K violation in row " +
                               std::to_string(lineno) + " (neutral vs expressioned)");
    }
    if (uniform_k < 0) uniform_k = s.lm_neutral.count();
    if (s.lm_neutral.count() != uniform_k) {
      throw std::runtime_error("load_dataset: uniform-K violation: file " + n_lm + " has K=" +
                               std::to_string(s.lm_neutral.count()) + ", expected " +
                               std::to_string(uniform_k));
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw std::runtime_error("load_dataset: empty manifest");
  return samples;
}

DatasetSplit split_by_subject(std::vector<Sample> samples, int test_subjects) {
  std::set<int> ids;
  for (const Sample& s : samples) ids.insert(s.subject_id);
  if (test_subjects < 0 || test_subjects >= static_cast<int>(ids.size())) {
    throw std::invalid_argument("split_by_subject: bad held-out subject count");
  }
  std::vector<int> sorted(ids.begin(), ids.end());
  DatasetSplit split;
  if (test_subjects == 0) {
    split.train = std::move(samples);
    return split;
  }
  const int cut = sorted[sorted.size() - test_subjects];
  for (Sample& s : samples) {
    (s.subject_id >= cut ? split.test : split.train).push_back(std::move(s));
  }
  // split hygiene: train and test subject sets must be disjoint
  std::set<int> train_ids, test_ids;
  for (const Sample& s : split.train) train_ids.insert(s.subject_id);
  for (const Sample& s : split.test) test_ids.insert(s.subject_id);
  for (int id : test_ids) {
    if (train_ids.count(id)) throw std::logic_error("split_by_subject: split leaked a subject");
  }
  return split;
}

// ---- preprocessing ----------------------------------------------------------------

LandmarkSet flip_landmarks(const LandmarkSet& lm, int64_t width) {
  LandmarkSet out = lm;
  for (int64_t i = 0; i < lm.count(); ++i) {
    out.set(i, static_cast<double>(width - 1) - lm.x(i), lm.y(i));
  }
  if (lm.count() == kLandmarkCount) {
    for (auto [a, b] : flip_pair_table()) {
      const double ax = out.x(a), ay = out.y(a);
      out.set(a, out.x(b), out.y(b));
      out.set(b, ax, ay);
    }
  }
  return out;
}

Tensor flip_image(const Tensor& image) {
  const int64_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
  Tensor out(image.shape());
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
      }
    }
  }
  return out;
}

namespace {

Tensor crop_image(const Tensor& img, int64_t dy, int64_t dx, int64_t size) {
  const int64_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
  if (dy + size > h || dx + size > w) throw std::logic_error("crop out of bounds");
  Tensor out(Shape{c, size, size});
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < size; ++y) {
      for (int64_t x = 0; x < size; ++x) {
        out[(ch * size + y) * size + x] = img[(ch * h + y + dy) * w + x + dx];
      }
    }
  }
  return out;
}

Tensor box_downsample(const Tensor& img, int64_t factor) {
  const int64_t c = img.extent(0), h = img.extent(1), w = img.extent(2);
  const int64_t oh = h / factor, ow = w / factor;
  Tensor out(Shape{c, oh, ow});
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int64_t yy = 0; yy < factor; ++yy) {
          for (int64_t xx = 0; xx < factor; ++xx) {
            acc += img[(ch * h + y * factor + yy) * w + x * factor + xx];
          }
        }
        out[(ch * oh + y) * ow + x] = acc * inv;
      }
    }
  }
  return out;
}

LandmarkSet rescale_landmarks(const LandmarkSet& lm, double factor) {
  // pixel-center convention: u' = (u + 0.5)/f - 0.5
  LandmarkSet out(lm.count());
  for (int64_t i = 0; i < lm.count(); ++i) {
    out.set(i, (lm.x(i) + 0.5) / factor - 0.5, (lm.y(i) + 0.5) / factor - 0.5);
  }
  return out;
}

}  // namespace

LandmarkSet to_test_frame(const LandmarkSet& canvas_lm, int out_size) {
  constexpr int64_t kCrop = 128;
  if (out_size < 1 || kCrop % out_size != 0) {
    throw std::invalid_argument("to_test_frame: out_size must divide 128");
  }
  const double off = static_cast<double>((kCanvasSize - kCrop) / 2);
  LandmarkSet lm = crop_heatmap_coords(canvas_lm, off, off);
  const int64_t factor = kCrop / out_size;
  if (factor > 1) lm = rescale_landmarks(lm, static_cast<double>(factor));
  return lm;
}

PreprocessedPair preprocess(const Sample& sample, PreprocessMode mode, Rng& rng,
                            const PreprocessOptions& opt) {
  if (sample.image_neutral.rank() != 3 || sample.image_neutral.extent(1) != kCanvasSize ||
      sample.image_neutral.extent(2) != kCanvasSize) {
    throw std::invalid_argument("preprocess: input must be 144x144");
  }
  constexpr int64_t kCrop = 128;
  if (opt.out_size < 1 || kCrop % opt.out_size != 0) {
    throw std::invalid_argument("preprocess: out_size must divide 128");
  }
  PreprocessedPair out;
  if (mode == PreprocessMode::kTrain) {
    out.crop_dx = static_cast<int64_t>(rng.uniform_index(kCanvasSize - kCrop + 1));
    out.crop_dy = static_cast<int64_t>(rng.uniform_index(kCanvasSize - kCrop + 1));
    out.flipped = rng.bernoulli(0.5);
  } else {
    out.crop_dx = (kCanvasSize - kCrop) / 2;
    out.crop_dy = (kCanvasSize - kCrop) / 2;
    out.flipped = false;
  }

  Tensor img_n = crop_image(sample.image_neutral, out.crop_dy, out.crop_dx, kCrop);
  Tensor img_e = crop_image(sample.image_expr, out.crop_dy, out.crop_dx, kCrop);
  LandmarkSet lm_n = crop_heatmap_coords(
      sample.lm_neutral, static_cast<double>(out.crop_dx), static_cast<double>(out.crop_dy));
  LandmarkSet lm_e = crop_heatmap_coords(
      sample.lm_expr, static_cast<double>(out.crop_dx), static_cast<double>(out.crop_dy));

  if (out.flipped) {
    img_n = flip_image(img_n);
    img_e = flip_image(img_e);
    lm_n = flip_landmarks(lm_n, kCrop);
    lm_e = flip_landmarks(lm_e, kCrop);
  }

  const int64_t factor = kCrop / opt.out_size;
  if (factor > 1) {
    img_n = box_downsample(img_n, factor);
    img_e = box_downsample(img_e, factor);
    lm_n = rescale_landmarks(lm_n, static_cast<double>(factor));
    lm_e = rescale_landmarks(lm_e, static_cast<double>(factor));
  }

  out.image_neutral = std::move(img_n);
  out.image_expr = std::move(img_e);
  out.lm_neutral = std::move(lm_n);
  out.lm_expr = std::move(lm_e);
  out.heatmap_expr =
      render_heatmap(out.lm_expr, opt.out_size, opt.out_size, opt.sigma,
                     opt.aggregated_heatmap ? HeatmapMode::kAggregated : HeatmapMode::kPerPoint);
  return out;
}

}  // namespace g2
