#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "g2/data.hpp"
#include "g2/heatmap.hpp"
#include "g2/image_io.hpp"

using namespace g2;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  const std::string path = (fs::temp_directory_path() / name).string();
  fs::remove_all(path);
  return path;
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

bool trees_identical(const std::string& a, const std::string& b) {
  std::set<std::string> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.insert(fs::relative(e.path(), a).string());
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.insert(fs::relative(e.path(), b).string());
  }
  if (rel_a != rel_b) return false;
  for (const std::string& rel : rel_a) {
    if (read_bytes((fs::path(a) / rel).string()) != read_bytes((fs::path(b) / rel).string())) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("generate_subject: determinism, distinctness, documented ranges") {
  const SyntheticSubject a = generate_subject(42);
  const SyntheticSubject b = generate_subject(42);
  CHECK(a.face_rx == b.face_rx);
  CHECK(a.tex_phase == b.tex_phase);
  const SyntheticSubject c = generate_subject(43);
  CHECK(a.face_rx != c.face_rx);

  for (uint64_t seed = 0; seed < 1000; ++seed) {
    const SyntheticSubject s = generate_subject(seed);
    CHECK(s.face_rx >= 44.0);
    CHECK(s.face_rx <= 56.0);
    CHECK(s.face_ry >= 54.0);
    CHECK(s.face_ry <= 66.0);
    CHECK(s.eye_dx >= 17.0);
    CHECK(s.eye_dx <= 25.0);
    CHECK(s.eye_y >= 60.0);
    CHECK(s.eye_y <= 66.0);
    CHECK(s.nose_len >= 16.0);
    CHECK(s.nose_len <= 24.0);
    CHECK(s.mouth_w >= 11.0);
    CHECK(s.mouth_w <= 16.0);
    CHECK(s.base_gray >= 0.55);
    CHECK(s.base_gray <= 0.80);
  }
}

TEST_CASE("render_face: neutral landmarks, kinematics, determinism") {
  const SyntheticSubject s = generate_subject(7);
  auto [img0, lm0] = render_face(s, ExpressionOffsets{});
  CHECK(img0.shape() == Shape{1, kCanvasSize, kCanvasSize});
  REQUIRE(lm0.count() == kLandmarkCount);
  // neutral landmarks equal the identity-parameter-derived markup
  const LandmarkSet expect = neutral_landmarks(s);
  for (int64_t d = 0; d < 2 * kLandmarkCount; ++d) CHECK(lm0.xy[d] == expect.xy[d]);

  // mouth-corner lift: exactly the two corners move, by (-/+0.25*L, -L)
  ExpressionOffsets lift;
  lift.mouth_corner_lift = 6.0;
  auto [img1, lm1] = render_face(s, lift);
  for (int64_t i = 0; i < kLandmarkCount; ++i) {
    if (i == 13) {
      CHECK(lm1.x(i) == lm0.x(i) - 1.5);
      CHECK(lm1.y(i) == lm0.y(i) - 6.0);
    } else if (i == 14) {
      CHECK(lm1.x(i) == lm0.x(i) + 1.5);
      CHECK(lm1.y(i) == lm0.y(i) - 6.0);
    } else {
      CHECK(lm1.x(i) == lm0.x(i));
      CHECK(lm1.y(i) == lm0.y(i));
    }
  }

  // bit-identical re-render
  auto [img2, lm2] = render_face(s, lift);
  for (int64_t i = 0; i < img1.numel(); ++i) CHECK(img1[i] == img2[i]);

  // image values in range
  for (int64_t i = 0; i < img0.numel(); ++i) {
    CHECK(img0[i] >= 0.0);
    CHECK(img0[i] <= 1.0);
  }

  // out-of-canvas landmarks rejected
  ExpressionOffsets huge;
  huge.brow_raise = 500.0;
  CHECK_THROWS_AS(render_face(s, huge), std::invalid_argument);
}

TEST_CASE("expression presets scale linearly with intensity") {
  const ExpressionOffsets& full = expression_presets()[0].offsets;
  const ExpressionOffsets half = scale_offsets(full, 0.5);
  CHECK(half.mouth_corner_lift == doctest::Approx(0.5 * full.mouth_corner_lift));
  CHECK(half.brow_raise == doctest::Approx(0.5 * full.brow_raise));
  CHECK(expression_presets().size() == 6);
}

TEST_CASE("make_dataset: cardinality, round trip, determinism, split hygiene") {
  const std::string dir_a = temp_dir("g2_ds_a");
  DatasetSpec spec;
  spec.n_subjects = 4;
  spec.expressions_per_subject = 3;
  spec.intensities = 2;
  spec.seed = 11;
  make_dataset(spec, dir_a);

  // image files: subjects neutral + subjects*expr*intensity expressioned
  int64_t image_files = 0;
  for (const auto& e : fs::directory_iterator(fs::path(dir_a) / "images")) {
    if (e.is_regular_file()) ++image_files;
  }
  CHECK(image_files == 4 + 4 * 3 * 2);

  std::vector<Sample> samples = load_dataset(dir_a);
  CHECK(samples.size() == 4 * 3 * 2);  // one manifest row per pair
  for (const Sample& s : samples) {
    CHECK(s.image_neutral.shape() == Shape{1, 144, 144});
    CHECK(s.lm_expr.count() == kLandmarkCount);
    for (int64_t i = 0; i < s.image_expr.numel(); ++i) {
      CHECK(s.image_expr[i] >= 0.0);
      CHECK(s.image_expr[i] <= 1.0);
    }
  }

  // regeneration is byte-identical
  const std::string dir_b = temp_dir("g2_ds_b");
  make_dataset(spec, dir_b);
  CHECK(trees_identical(dir_a, dir_b));

  // split by subject id, never by image
  DatasetSplit split = split_by_subject(samples, 1);
  std::set<int> train_ids, test_ids;
  for (const Sample& s : split.train) train_ids.insert(s.subject_id);
  for (const Sample& s : split.test) test_ids.insert(s.subject_id);
  CHECK(train_ids.size() == 3);
  CHECK(test_ids.size() == 1);
  for (int id : test_ids) CHECK(train_ids.count(id) == 0);

  // loaded pixel values equal the quantized render
  const SyntheticSubject subj = generate_subject(derive_seed(spec.seed, "subject", 0));
  auto [img, lm] = render_face(subj, ExpressionOffsets{});
  const Sample* first = nullptr;
  for (const Sample& s : samples) {
    if (s.subject_id == 0) {
      first = &s;
      break;
    }
  }
  REQUIRE(first != nullptr);
  for (int64_t i = 0; i < img.numel(); ++i) {
    const double quantized = std::lround(img[i] * 255.0) / 255.0;
    CHECK(first->image_neutral[i] == doctest::Approx(quantized).epsilon(1e-12));
  }
  for (int64_t d = 0; d < 2 * kLandmarkCount; ++d) {
    CHECK(first->lm_neutral.xy[d] == lm.xy[d]);  // %.17g text round trip is exact
  }

  fs::remove_all(dir_b);

  // manifest referencing a missing image names the file
  fs::remove(fs::path(dir_a) / "images" / "s000_neutral.pgm");
  try {
    load_dataset(dir_a);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("s000_neutral.pgm") != std::string::npos);
  }
  fs::remove_all(dir_a);
}

TEST_CASE("load_dataset rejects non-uniform K") {
  const std::string dir = temp_dir("g2_ds_k");
  DatasetSpec spec;
  spec.n_subjects = 2;
  spec.expressions_per_subject = 1;
  spec.intensities = 1;
  make_dataset(spec, dir);
  // corrupt one landmark file with a different K
  LandmarkSet small(kLandmarkCount - 3);
  for (int64_t i = 0; i < small.count(); ++i) small.set(i, 10.0 + i, 20.0);
  write_landmarks((fs::path(dir) / "landmarks" / "s001_happiness_i1.txt").string(), small);
  try {
    load_dataset(dir);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("uniform-K") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("image io: quantized round trip and format errors") {
  const std::string dir = temp_dir("g2_img");
  fs::create_directories(dir);
  Tensor img(Shape{1, 9, 13});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = (i % 97) / 96.0;
  const std::string path = (fs::path(dir) / "t.pgm").string();
  write_pgm(path, img);
  Tensor back = read_image(path);
  REQUIRE(back.shape() == img.shape());
  for (int64_t i = 0; i < img.numel(); ++i) {
    CHECK(back[i] == doctest::Approx(std::lround(img[i] * 255.0) / 255.0).epsilon(1e-12));
  }
  // PPM path
  Tensor rgb(Shape{3, 5, 4});
  for (int64_t i = 0; i < rgb.numel(); ++i) rgb[i] = (i % 51) / 50.0;
  const std::string path3 = (fs::path(dir) / "t.ppm").string();
  write_ppm(path3, rgb);
  Tensor rgb_back = read_image(path3);
  CHECK(rgb_back.shape() == rgb.shape());
  CHECK_THROWS(read_image((fs::path(dir) / "missing.pgm").string()));
  fs::remove_all(dir);
}

TEST_CASE("preprocess: center crop, flip involution, determinism") {
  const SyntheticSubject subj = generate_subject(123);
  auto [img_n, lm_n] = render_face(subj, ExpressionOffsets{});
  auto [img_e, lm_e] = render_face(subj, scale_offsets(expression_presets()[1].offsets, 1.0));
  Sample s;
  s.subject_id = 0;
  s.expression_label = "surprise";
  s.intensity = 1.0;
  s.image_neutral = img_n;
  s.image_expr = img_e;
  s.lm_neutral = lm_n;
  s.lm_expr = lm_e;

  PreprocessOptions opt;
  opt.out_size = 64;
  opt.sigma = 1.0;

  Rng rng(0);
  PreprocessedPair test_pp = preprocess(s, PreprocessMode::kTest, rng, opt);
  CHECK(test_pp.crop_dx == 8);
  CHECK(test_pp.crop_dy == 8);
  CHECK_FALSE(test_pp.flipped);
  CHECK(test_pp.image_neutral.shape() == Shape{1, 64, 64});
  CHECK(test_pp.heatmap_expr.shape() == Shape{kLandmarkCount, 64, 64});

  // landmark transform matches the to_test_frame helper
  LandmarkSet expect = to_test_frame(lm_e, 64);
  for (int64_t d = 0; d < 2 * kLandmarkCount; ++d) {
    CHECK(test_pp.lm_expr.xy[d] == doctest::Approx(expect.xy[d]).epsilon(1e-12));
  }

  // flip applied twice restores landmarks exactly
  LandmarkSet flipped = flip_landmarks(lm_e, kCanvasSize);
  LandmarkSet again = flip_landmarks(flipped, kCanvasSize);
  for (int64_t d = 0; d < 2 * kLandmarkCount; ++d) {
    CHECK(again.xy[d] == doctest::Approx(lm_e.xy[d]).epsilon(1e-12));
  }

  // train mode reproducible under a fixed seed
  Rng r1(99), r2(99);
  PreprocessedPair a = preprocess(s, PreprocessMode::kTrain, r1, opt);
  PreprocessedPair b = preprocess(s, PreprocessMode::kTrain, r2, opt);
  CHECK(a.crop_dx == b.crop_dx);
  CHECK(a.flipped == b.flipped);
  for (int64_t i = 0; i < a.image_expr.numel(); ++i) CHECK(a.image_expr[i] == b.image_expr[i]);

  CHECK_THROWS_AS(
      [&] {
        Sample bad = s;
        bad.image_neutral = Tensor(Shape{1, 100, 100});
        Rng r(1);
        preprocess(bad, PreprocessMode::kTest, r, opt);
      }(),
      std::invalid_argument);
}

TEST_CASE("flip correctness: heatmap of flipped landmarks equals flipped heatmap") {
  // channel c of the flipped rendering must equal the horizontally flipped
  // channel of c's flip partner
  const SyntheticSubject subj = generate_subject(55);
  auto [img, lm] = render_face(subj, scale_offsets(expression_presets()[0].offsets, 1.0));
  const int64_t w = kCanvasSize;
  Tensor hm = render_heatmap(lm, w, w, 2.0);
  Tensor hm_flipped_lm = render_heatmap(flip_landmarks(lm, w), w, w, 2.0);

  std::vector<int> partner(kLandmarkCount);
  for (int i = 0; i < kLandmarkCount; ++i) partner[i] = i;
  for (auto [a, b] : flip_pair_table()) {
    partner[a] = b;
    partner[b] = a;
  }
  for (int c = 0; c < kLandmarkCount; ++c) {
    for (int64_t y = 0; y < w; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        CHECK(hm_flipped_lm.at({c, y, x}) == hm.at({partner[c], y, w - 1 - x}));
      }
    }
  }
}

TEST_CASE("heatmap argmax recovers landmarks within one pixel on rendered faces") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const SyntheticSubject subj = generate_subject(seed);
    for (int preset = 0; preset < 3; ++preset) {
      auto [img, lm] =
          render_face(subj, scale_offsets(expression_presets()[preset].offsets, 1.0));
      Tensor hm = render_heatmap(lm, kCanvasSize, kCanvasSize, 2.0);
      for (int64_t c = 0; c < kLandmarkCount; ++c) {
        const double* plane = hm.data() + c * kCanvasSize * kCanvasSize;
        int64_t best = 0;
        for (int64_t i = 1; i < kCanvasSize * kCanvasSize; ++i) {
          if (plane[i] > plane[best]) best = i;
        }
        CHECK(std::abs(best % kCanvasSize - lm.x(c)) <= 1.0);
        CHECK(std::abs(best / kCanvasSize - lm.y(c)) <= 1.0);
      }
    }
  }
}
