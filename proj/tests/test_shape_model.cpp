#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "g2/rng.hpp"
#include "g2/shape_model.hpp"

using namespace g2;

namespace {

LandmarkSet random_shape(int64_t k, Rng& rng, double scale = 10.0) {
  LandmarkSet lm(k);
  for (int64_t i = 0; i < k; ++i) {
    lm.set(i, 50.0 + rng.normal(0.0, scale), 50.0 + rng.normal(0.0, scale));
  }
  return lm;
}

// classic cyclic Jacobi eigendecomposition of a symmetric matrix, used as an
// independent route to the PCA spectrum
void jacobi_eig(std::vector<double> a, int n, std::vector<double>& eigvals,
                std::vector<double>& eigvecs) {
  eigvecs.assign(n * n, 0.0);
  for (int i = 0; i < n; ++i) eigvecs[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(a[p * n + q]) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * a[p * n + q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < n; ++i) {
          const double aip = a[i * n + p], aiq = a[i * n + q];
          a[i * n + p] = c * aip - s * aiq;
          a[i * n + q] = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a[p * n + i], aqi = a[q * n + i];
          a[p * n + i] = c * api - s * aqi;
          a[q * n + i] = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = eigvecs[i * n + p], viq = eigvecs[i * n + q];
          eigvecs[i * n + p] = c * vip - s * viq;
          eigvecs[i * n + q] = s * vip + c * viq;
        }
      }
    }
  }
  eigvals.resize(n);
  for (int i = 0; i < n; ++i) eigvals[i] = a[i * n + i];
}

}  // namespace

TEST_CASE("align_landmarks: identity when eyes already canonical") {
  LandmarkSet lm(3);
  lm.set(0, 45.0, 54.0);
  lm.set(1, 99.0, 54.0);
  lm.set(2, 72.0, 100.0);
  auto [aligned, t] = align_landmarks(lm, 0, 1, {45.0, 54.0}, {99.0, 54.0});
  CHECK(t.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.rotation == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.tx == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(t.ty == doctest::Approx(0.0).epsilon(1e-9));
  for (int64_t i = 0; i < 3; ++i) {
    CHECK(aligned.x(i) == doctest::Approx(lm.x(i)).epsilon(1e-9));
    CHECK(aligned.y(i) == doctest::Approx(lm.y(i)).epsilon(1e-9));
  }
}

TEST_CASE("align_landmarks: rotation solved by the closed-form two-point similarity") {
  // rotate a face 90 degrees about the eye midpoint, then align
  Rng rng(9);
  LandmarkSet base = random_shape(6, rng);
  base.set(0, 40.0, 60.0);
  base.set(1, 100.0, 60.0);
  const double cx = 70.0, cy = 60.0;
  LandmarkSet rotated(6);
  for (int64_t i = 0; i < 6; ++i) {
    const double dx = base.x(i) - cx, dy = base.y(i) - cy;
    rotated.set(i, cx - dy, cy + dx);  // +90 degrees
  }
  const Point cl{45.0, 54.0}, cr{99.0, 54.0};
  auto [aligned, t] = align_landmarks(rotated, 0, 1, cl, cr);
  // anchors land exactly
  CHECK(aligned.x(0) == cl.x);
  CHECK(aligned.y(0) == cl.y);
  CHECK(aligned.x(1) == cr.x);
  CHECK(aligned.y(1) == cr.y);
  // eye segment is horizontal and the transform matches the independent
  // closed-form solve a = (cr-cl)/(er-el) in complex arithmetic
  const double edx = rotated.x(1) - rotated.x(0), edy = rotated.y(1) - rotated.y(0);
  const double cdx = cr.x - cl.x, cdy = cr.y - cl.y;
  const double den = edx * edx + edy * edy;
  const double ar = (cdx * edx + cdy * edy) / den;
  const double ai = (cdy * edx - cdx * edy) / den;
  CHECK(t.scale == doctest::Approx(std::hypot(ar, ai)).epsilon(1e-12));
  CHECK(t.rotation == doctest::Approx(std::atan2(ai, ar)).epsilon(1e-12));
  for (int64_t i = 0; i < 6; ++i) {
    const double ex = ar * rotated.x(i) - ai * rotated.y(i) + t.tx;
    const double ey = ai * rotated.x(i) + ar * rotated.y(i) + t.ty;
    CHECK(aligned.x(i) == doctest::Approx(ex).epsilon(1e-9));
    CHECK(aligned.y(i) == doctest::Approx(ey).epsilon(1e-9));
  }
}

TEST_CASE("align_landmarks: uniform x2 scale about the midpoint gives scale 1/2") {
  LandmarkSet lm(2);
  const double mx = 72.0, my = 54.0;
  lm.set(0, mx - 54.0, my);  // double-width eye segment
  lm.set(1, mx + 54.0, my);
  auto [aligned, t] = align_landmarks(lm, 0, 1, {45.0, 54.0}, {99.0, 54.0});
  CHECK(t.scale == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(aligned.x(0) == 45.0);
  CHECK(aligned.x(1) == 99.0);
}

TEST_CASE("align_landmarks: degenerate and invalid inputs") {
  LandmarkSet lm(2);
  lm.set(0, 10.0, 10.0);
  lm.set(1, 10.0, 10.0);
  CHECK_THROWS_AS(align_landmarks(lm, 0, 1, {0, 0}, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(align_landmarks(lm, 0, 0, {0, 0}, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(align_landmarks(lm, 0, 5, {0, 0}, {1, 0}), std::invalid_argument);
}

TEST_CASE("similarity transform round trip") {
  SimilarityTransform t;
  t.scale = 1.7;
  t.rotation = 0.6;
  t.tx = -4.0;
  t.ty = 11.0;
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    Point p{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    Point q = t.inverse().apply(t.apply(p));
    CHECK(q.x == doctest::Approx(p.x).epsilon(1e-9));
    CHECK(q.y == doctest::Approx(p.y).epsilon(1e-9));
  }
}

TEST_CASE("fit_shape_basis: identical shapes give zero variance and N=0") {
  Rng rng(4);
  LandmarkSet s = random_shape(5, rng);
  std::vector<LandmarkSet> shapes(4, s);
  ShapeBasis b = fit_shape_basis(shapes, ComponentSelect::variance(0.95));
  CHECK(b.N == 0);
  for (int64_t d = 0; d < 10; ++d) CHECK(b.mean[d] == doctest::Approx(s.xy[d]).epsilon(1e-12));
}

TEST_CASE("fit_shape_basis: two shapes give one nonzero eigenvalue along their difference") {
  Rng rng(6);
  LandmarkSet a = random_shape(4, rng);
  LandmarkSet b = random_shape(4, rng);
  ShapeBasis basis = fit_shape_basis({a, b}, ComponentSelect::variance(1.0));
  REQUIRE(basis.N == 1);
  CHECK(basis.eigenvalues[0] > 0.0);
  // eigenvector parallel to a-b
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int64_t d = 0; d < 8; ++d) {
    const double diff = a.xy[d] - b.xy[d];
    dot += diff * basis.basis[d];
    na += diff * diff;
    nb += basis.basis[d] * basis.basis[d];
  }
  CHECK(std::fabs(dot) / std::sqrt(na * nb) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("fit_shape_basis: recovers a planted rank-2 subspace") {
  Rng rng(8);
  const int64_t k = 6, dim = 2 * k;
  // planted orthonormal 2-dim subspace via Gram-Schmidt (independent oracle)
  std::vector<double> u(dim), v(dim);
  for (auto* col : {&u, &v}) {
    for (double& x : *col) x = rng.normal();
  }
  double nu = 0.0;
  for (double x : u) nu += x * x;
  for (double& x : u) x /= std::sqrt(nu);
  double uv = 0.0;
  for (int64_t d = 0; d < dim; ++d) uv += u[d] * v[d];
  for (int64_t d = 0; d < dim; ++d) v[d] -= uv * u[d];
  double nv = 0.0;
  for (double x : v) nv += x * x;
  for (double& x : v) x /= std::sqrt(nv);

  LandmarkSet mean = random_shape(k, rng);
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 40; ++i) {
    const double p1 = rng.normal(0.0, 5.0), p2 = rng.normal(0.0, 2.0);
    LandmarkSet s(k);
    for (int64_t d = 0; d < dim; ++d) s.xy[d] = mean.xy[d] + p1 * u[d] + p2 * v[d];
    shapes.push_back(s);
  }
  ShapeBasis basis = fit_shape_basis(shapes, ComponentSelect::count(2));
  REQUIRE(basis.N == 2);
  // projector identity: S S^T equals the planted projector u u^T + v v^T
  for (int64_t i = 0; i < dim; ++i) {
    for (int64_t j = 0; j < dim; ++j) {
      double impl = 0.0;
      for (int64_t c = 0; c < 2; ++c) impl += basis.basis[i * 2 + c] * basis.basis[j * 2 + c];
      const double oracle = u[i] * u[j] + v[i] * v[j];
      CHECK(impl == doctest::Approx(oracle).epsilon(1e-8));
    }
  }
}

TEST_CASE("fit_shape_basis: spectrum matches an independent covariance eigendecomposition") {
  Rng rng(12);
  const int64_t k = 5, dim = 2 * k;
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 30; ++i) shapes.push_back(random_shape(k, rng));
  ShapeBasis basis = fit_shape_basis(shapes, ComponentSelect::count(6));

  std::vector<double> mean(dim, 0.0);
  for (const auto& s : shapes)
    for (int64_t d = 0; d < dim; ++d) mean[d] += s.xy[d] / shapes.size();
  std::vector<double> cov(dim * dim, 0.0);
  for (const auto& s : shapes) {
    for (int64_t i = 0; i < dim; ++i)
      for (int64_t j = 0; j < dim; ++j)
        cov[i * dim + j] += (s.xy[i] - mean[i]) * (s.xy[j] - mean[j]) / (shapes.size() - 1.0);
  }
  std::vector<double> eigvals, eigvecs;
  jacobi_eig(cov, static_cast<int>(dim), eigvals, eigvecs);
  std::sort(eigvals.rbegin(), eigvals.rend());
  for (int64_t c = 0; c < basis.N; ++c) {
    CHECK(basis.eigenvalues[c] == doctest::Approx(eigvals[c]).epsilon(1e-8));
  }
}

TEST_CASE("shape basis invariants on random data") {
  Rng rng(14);
  const int64_t k = 9;
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 25; ++i) shapes.push_back(random_shape(k, rng));
  ShapeBasis b = fit_shape_basis(shapes, ComponentSelect::variance(0.95));
  REQUIRE(b.N >= 1);

  // orthonormality S^T S = I within 1e-8
  for (int64_t c1 = 0; c1 < b.N; ++c1) {
    for (int64_t c2 = 0; c2 < b.N; ++c2) {
      double dot = 0.0;
      for (int64_t d = 0; d < 2 * k; ++d) dot += b.basis[d * b.N + c1] * b.basis[d * b.N + c2];
      CHECK(dot == doctest::Approx(c1 == c2 ? 1.0 : 0.0).epsilon(1e-8));
    }
  }
  // eigenvalues descending and nonnegative
  for (int64_t c = 0; c + 1 < b.N; ++c) CHECK(b.eigenvalues[c] >= b.eigenvalues[c + 1]);
  CHECK(b.eigenvalues[b.N - 1] >= 0.0);
  // mean of fitted params over the training set is zero
  LandmarkSet mean_shape(k);
  mean_shape.xy = b.mean;
  std::vector<double> psum(b.N, 0.0);
  for (const auto& s : shapes) {
    ShapeParams p = fit_params(b, mean_shape, s);
    for (int64_t c = 0; c < b.N; ++c) psum[c] += p.p[c];
  }
  for (int64_t c = 0; c < b.N; ++c) CHECK(std::fabs(psum[c] / shapes.size()) < 1e-8);
  // projection idempotence
  ShapeParams p1 = fit_params(b, mean_shape, shapes[0]);
  LandmarkSet proj = shape_from_params(b, mean_shape, p1);
  ShapeParams p2 = fit_params(b, mean_shape, proj);
  for (int64_t c = 0; c < b.N; ++c) CHECK(p1.p[c] == doctest::Approx(p2.p[c]).epsilon(1e-10));

  // full-rank exactness: with N = rank, every training shape reconstructs
  ShapeBasis full = fit_shape_basis(shapes, ComponentSelect::variance(1.0));
  for (const auto& s : shapes) {
    LandmarkSet rec =
        shape_from_params(full, mean_shape, fit_params(full, mean_shape, s));
    for (int64_t d = 0; d < 2 * k; ++d) CHECK(rec.xy[d] == doctest::Approx(s.xy[d]).epsilon(1e-8));
  }
}

TEST_CASE("fit_shape_basis error contracts") {
  Rng rng(19);
  CHECK_THROWS_AS(fit_shape_basis({random_shape(4, rng)}, ComponentSelect::variance(0.9)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_shape_basis({random_shape(4, rng), random_shape(5, rng)},
                                  ComponentSelect::variance(0.9)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_shape_basis({random_shape(4, rng), random_shape(4, rng)},
                                  ComponentSelect::count(5)),
                  std::invalid_argument);
}

TEST_CASE("shape_from_params: zero, unit basis, and matvec oracle") {
  Rng rng(21);
  const int64_t k = 4;
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 12; ++i) shapes.push_back(random_shape(k, rng));
  ShapeBasis b = fit_shape_basis(shapes, ComponentSelect::count(3));
  LandmarkSet base = random_shape(k, rng);

  ShapeParams zero{std::vector<double>(3, 0.0)};
  LandmarkSet same = shape_from_params(b, base, zero);
  for (int64_t d = 0; d < 2 * k; ++d) CHECK(same.xy[d] == base.xy[d]);

  ShapeBasis unit;
  unit.K = k;
  unit.N = 2;
  unit.mean.assign(2 * k, 0.0);
  unit.eigenvalues = {1.0, 1.0};
  unit.basis.assign(2 * k * 2, 0.0);
  unit.basis[0 * 2 + 0] = 1.0;  // e1
  unit.basis[3 * 2 + 1] = 1.0;  // e4
  LandmarkSet shifted = shape_from_params(unit, base, ShapeParams{{1.0, 0.0}});
  CHECK(shifted.xy[0] == base.xy[0] + 1.0);
  for (int64_t d = 1; d < 2 * k; ++d) CHECK(shifted.xy[d] == base.xy[d]);

  ShapeParams p{{0.3, -1.2, 0.7}};
  LandmarkSet got = shape_from_params(b, base, p);
  for (int64_t d = 0; d < 2 * k; ++d) {
    double acc = base.xy[d];
    for (int64_t c = 0; c < 3; ++c) acc += b.basis[d * 3 + c] * p.p[c];
    CHECK(got.xy[d] == doctest::Approx(acc).epsilon(1e-12));
  }
  CHECK_THROWS_AS(shape_from_params(b, base, ShapeParams{{1.0}}), std::invalid_argument);
}

TEST_CASE("fit_params: recovery and the normal-equations oracle") {
  Rng rng(25);
  const int64_t k = 7;
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 20; ++i) shapes.push_back(random_shape(k, rng));
  ShapeBasis b = fit_shape_basis(shapes, ComponentSelect::count(4));
  LandmarkSet base = random_shape(k, rng);

  // observed == base -> p == 0
  ShapeParams p0 = fit_params(b, base, base);
  for (double v : p0.p) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

  // exact-subspace recovery
  ShapeParams truth{{1.0, -2.0, 0.5, 3.0}};
  LandmarkSet obs = shape_from_params(b, base, truth);
  ShapeParams rec = fit_params(b, base, obs);
  for (int64_t c = 0; c < 4; ++c) CHECK(rec.p[c] == doctest::Approx(truth.p[c]).epsilon(1e-10));

  // off-subspace noise: orthonormal shortcut equals the generic
  // least-squares path, and the residual is orthogonal to every column
  LandmarkSet noisy = obs;
  for (int64_t d = 0; d < 2 * k; ++d) noisy.xy[d] += rng.normal(0.0, 1.0);
  ShapeParams fast = fit_params(b, base, noisy);
  ShapeParams slow = fit_params_least_squares(b, base, noisy);
  for (int64_t c = 0; c < 4; ++c) CHECK(fast.p[c] == doctest::Approx(slow.p[c]).epsilon(1e-8));
  LandmarkSet fitted = shape_from_params(b, base, fast);
  for (int64_t c = 0; c < 4; ++c) {
    double dot = 0.0;
    for (int64_t d = 0; d < 2 * k; ++d) {
      dot += (noisy.xy[d] - fitted.xy[d]) * b.basis[d * 4 + c];
    }
    CHECK(std::fabs(dot) < 1e-8);
  }
}

TEST_CASE("transfer_shape and interpolate_params") {
  Rng rng(29);
  const int64_t k = 6;
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 15; ++i) shapes.push_back(random_shape(k, rng));
  ShapeBasis b = fit_shape_basis(shapes, ComponentSelect::count(3));
  LandmarkSet neutral_a = random_shape(k, rng);
  LandmarkSet neutral_b = neutral_a;  // same neutral geometry

  // zero params return the neutral target
  ShapeParams zero{std::vector<double>(3, 0.0)};
  LandmarkSet t0 = transfer_shape(b, neutral_a, zero);
  for (int64_t d = 0; d < 2 * k; ++d) CHECK(t0.xy[d] == neutral_a.xy[d]);

  // identical neutrals + same params -> identical transfers
  ShapeParams p{{0.5, 1.0, -0.3}};
  LandmarkSet ta = transfer_shape(b, neutral_a, p);
  LandmarkSet tb = transfer_shape(b, neutral_b, p);
  for (int64_t d = 0; d < 2 * k; ++d) CHECK(ta.xy[d] == tb.xy[d]);

  // transferring a subject's own fitted expression equals the subspace
  // projection of its expressioned shape anchored at its neutral
  LandmarkSet own_expr = random_shape(k, rng);
  ShapeParams own = fit_params(b, neutral_a, own_expr);
  LandmarkSet transferred = transfer_shape(b, neutral_a, own);
  // independent projection oracle: base + S S^T (obs - base)
  for (int64_t d = 0; d < 2 * k; ++d) {
    double proj = neutral_a.xy[d];
    for (int64_t c = 0; c < 3; ++c) {
      double coeff = 0.0;
      for (int64_t e = 0; e < 2 * k; ++e) {
        coeff += b.basis[e * 3 + c] * (own_expr.xy[e] - neutral_a.xy[e]);
      }
      proj += b.basis[d * 3 + c] * coeff;
    }
    CHECK(transferred.xy[d] == doctest::Approx(proj).epsilon(1e-10));
  }

  // interpolation endpoints, scaling, extrapolation
  ShapeParams from{{0.0, 0.0, 0.0}};
  CHECK(interpolate_params(from, p, 0.0).p == from.p);
  CHECK(interpolate_params(from, p, 1.0).p == p.p);
  ShapeParams half = interpolate_params(from, p, 0.5);
  for (size_t i = 0; i < 3; ++i) CHECK(half.p[i] == doctest::Approx(0.5 * p.p[i]));
  ShapeParams twice = interpolate_params(from, p, 2.0);
  for (size_t i = 0; i < 3; ++i) CHECK(twice.p[i] == doctest::Approx(2.0 * p.p[i]));
  CHECK_THROWS_AS(interpolate_params(ShapeParams{{1.0}}, p, 0.5), std::invalid_argument);
}

TEST_CASE("semantic_prototypes") {
  Rng rng(33);
  const int64_t k = 5;
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 15; ++i) shapes.push_back(random_shape(k, rng));
  ShapeBasis b = fit_shape_basis(shapes, ComponentSelect::count(3));

  LandmarkSet neutral = random_shape(k, rng);
  ShapeParams pa{{1.0, 0.0, 2.0}};
  LandmarkSet ea = shape_from_params(b, neutral, pa);
  ShapeParams neg{{-1.0, 0.0, -2.0}};
  LandmarkSet eb = shape_from_params(b, neutral, neg);

  // singleton group: prototype equals the sample's fitted params
  auto single = semantic_prototypes(b, {{neutral, ea, "smile"}});
  for (int64_t c = 0; c < 3; ++c) {
    CHECK(single.at("smile").p[c] == doctest::Approx(pa.p[c]).epsilon(1e-10));
  }
  // p and -p cancel
  auto cancel = semantic_prototypes(b, {{neutral, ea, "x"}, {neutral, eb, "x"}});
  for (int64_t c = 0; c < 3; ++c) CHECK(cancel.at("x").p[c] == doctest::Approx(0.0).epsilon(1e-10));
  // random groups match an arithmetic-mean oracle
  std::vector<LabeledShapePair> pairs;
  std::vector<ShapeParams> fitted;
  for (int i = 0; i < 6; ++i) {
    LandmarkSet e = random_shape(k, rng);
    pairs.push_back({neutral, e, "g"});
    fitted.push_back(fit_params(b, neutral, e));
  }
  auto proto = semantic_prototypes(b, pairs);
  for (int64_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (const auto& f : fitted) mean += f.p[c] / 6.0;
    CHECK(proto.at("g").p[c] == doctest::Approx(mean).epsilon(1e-12));
  }
  CHECK_THROWS_AS(semantic_prototypes(b, {}), std::invalid_argument);
}

TEST_CASE("landmark text file round trip") {
  namespace fs = std::filesystem;
  Rng rng(37);
  LandmarkSet lm = random_shape(7, rng);
  const std::string path = (fs::temp_directory_path() / "g2_lm_test.txt").string();
  write_landmarks(path, lm);
  LandmarkSet back = read_landmarks(path);
  REQUIRE(back.count() == 7);
  for (int64_t d = 0; d < 14; ++d) CHECK(back.xy[d] == lm.xy[d]);  // %.17g is lossless

  // format: first line K, then "x y" lines
  std::ifstream is(path);
  int64_t k = 0;
  is >> k;
  CHECK(k == 7);
  fs::remove(path);

  CHECK_THROWS(read_landmarks("/nonexistent/landmarks.txt"));
}

TEST_CASE("shape basis binary file round trips bitwise") {
  namespace fs = std::filesystem;
  Rng rng(41);
  std::vector<LandmarkSet> shapes;
  for (int i = 0; i < 10; ++i) shapes.push_back(random_shape(6, rng));
  ShapeBasis b = fit_shape_basis(shapes, ComponentSelect::variance(0.95));
  const std::string path = (fs::temp_directory_path() / "g2_basis_test.g2sb").string();
  write_shape_basis(path, b);
  ShapeBasis r = read_shape_basis(path);
  CHECK(r.K == b.K);
  CHECK(r.N == b.N);
  for (size_t i = 0; i < b.mean.size(); ++i) CHECK(r.mean[i] == b.mean[i]);
  for (size_t i = 0; i < b.eigenvalues.size(); ++i) CHECK(r.eigenvalues[i] == b.eigenvalues[i]);
  for (size_t i = 0; i < b.basis.size(); ++i) CHECK(r.basis[i] == b.basis[i]);

  // writing twice produces identical bytes
  const std::string path2 = (fs::temp_directory_path() / "g2_basis_test2.g2sb").string();
  write_shape_basis(path2, b);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.substr(0, 4) == "G2SB");
  fs::remove(path);
  fs::remove(path2);
}
