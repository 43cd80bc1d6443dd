#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace g2 {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// K fiducial points stored interleaved [x0,y0,x1,y1,...]. Coordinates use
// the pixel-center convention: point (x,y) lies at the center of pixel
// (round(x), round(y)).
struct LandmarkSet {
  std::vector<double> xy;

  LandmarkSet() = default;
  explicit LandmarkSet(int64_t k) : xy(2 * k, 0.0) {}
  explicit LandmarkSet(std::vector<double> flat) : xy(std::move(flat)) {}

  int64_t count() const { return static_cast<int64_t>(xy.size()) / 2; }
  double x(int64_t i) const { return xy[2 * i]; }
  double y(int64_t i) const { return xy[2 * i + 1]; }
  void set(int64_t i, double px, double py) {
    xy[2 * i] = px;
    xy[2 * i + 1] = py;
  }
  Point point(int64_t i) const { return {x(i), y(i)}; }

  void validate() const;  // even length, all finite
};

// Linear shape family s(p) = mean + basis * p with orthonormal columns.
struct ShapeBasis {
  int64_t K = 0;                    // landmark count
  int64_t N = 0;                    // retained components
  std::vector<double> mean;         // 2K
  std::vector<double> eigenvalues;  // N, descending
  std::vector<double> basis;        // 2K x N, row-major
};

struct ShapeParams {
  std::vector<double> p;
};

// Rigid scale/rotation/translation of the plane: q = s*R(theta)*p + t.
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;

  Point apply(Point p) const;
  LandmarkSet apply(const LandmarkSet& lm) const;
  SimilarityTransform inverse() const;
};

// Component retention policy for fit_shape_basis: either an explicit count
// or the smallest count whose cumulative eigenvalue fraction reaches
// variance_fraction.
struct ComponentSelect {
  int64_t n_components = -1;         // -1: use variance_fraction
  double variance_fraction = 0.95;

  static ComponentSelect count(int64_t n) { return {n, 0.0}; }
  static ComponentSelect variance(double f) { return {-1, f}; }
};

// Maps the two eye landmarks exactly onto the canonical positions and
// applies the same similarity to every point. Throws on coincident eyes.
std::pair<LandmarkSet, SimilarityTransform> align_landmarks(const LandmarkSet& lm,
                                                            int64_t left_eye_idx,
                                                            int64_t right_eye_idx,
                                                            Point canonical_left,
                                                            Point canonical_right);

// PCA over aligned shapes via one-sided Jacobi SVD of the centered data
// matrix. Eigenvalues are sample variances (1/(M-1)); eigenvector signs are
// fixed so each column's first non-zero entry is positive.
ShapeBasis fit_shape_basis(const std::vector<LandmarkSet>& shapes, const ComponentSelect& sel);

LandmarkSet shape_from_params(const ShapeBasis& basis, const LandmarkSet& base_shape,
                              const ShapeParams& params);

// argmin_p || observed - base - S p ||^2 via the orthonormal shortcut
// p = S^T (observed - base).
ShapeParams fit_params(const ShapeBasis& basis, const LandmarkSet& base_shape,
                       const LandmarkSet& observed);

// General least-squares path (normal equations), valid for non-orthonormal
// bases; cross-checked against fit_params in tests.
ShapeParams fit_params_least_squares(const ShapeBasis& basis, const LandmarkSet& base_shape,
                                     const LandmarkSet& observed);

LandmarkSet transfer_shape(const ShapeBasis& basis, const LandmarkSet& neutral_target,
                           const ShapeParams& params_source);

ShapeParams interpolate_params(const ShapeParams& from, const ShapeParams& to, double t);

struct LabeledShapePair {
  LandmarkSet neutral;
  LandmarkSet expressioned;
  std::string label;
};

std::map<std::string, ShapeParams> semantic_prototypes(
    const ShapeBasis& basis, const std::vector<LabeledShapePair>& samples);

// ---- persistence -----------------------------------------------------------
// Landmark text format: line 1 = K, then K lines "x y", newline-terminated.
void write_landmarks(const std::string& path, const LandmarkSet& lm);
LandmarkSet read_landmarks(const std::string& path);

// Basis binary format: magic "G2SB", little-endian u32 K, u32 N, then
// mean, eigenvalues, basis row-major as little-endian doubles.
void write_shape_basis(const std::string& path, const ShapeBasis& basis);
ShapeBasis read_shape_basis(const std::string& path);

}  // namespace g2
