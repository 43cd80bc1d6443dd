#include "g2/shape_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace g2 {

void LandmarkSet::validate() const {
  if (xy.size() % 2 != 0) throw std::invalid_argument("landmark vector length must be 2K");
  for (double v : xy) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite landmark coordinate");
  }
}

Point SimilarityTransform::apply(Point p) const {
  const double c = std::cos(rotation), s = std::sin(rotation);
  return {scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
}

LandmarkSet SimilarityTransform::apply(const LandmarkSet& lm) const {
  LandmarkSet out(lm.count());
  for (int64_t i = 0; i < lm.count(); ++i) {
    Point q = apply(lm.point(i));
    out.set(i, q.x, q.y);
  }
  return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = -rotation;
  const double c = std::cos(-rotation), s = std::sin(-rotation);
  inv.tx = -inv.scale * (c * tx - s * ty);
  inv.ty = -inv.scale * (s * tx + c * ty);
  return inv;
}

std::pair<LandmarkSet, SimilarityTransform> align_landmarks(const LandmarkSet& lm,
                                                            int64_t left_eye_idx,
                                                            int64_t right_eye_idx,
                                                            Point canonical_left,
                                                            Point canonical_right) {
  lm.validate();
  const int64_t k = lm.count();
  if (left_eye_idx < 0 || left_eye_idx >= k || right_eye_idx < 0 || right_eye_idx >= k ||
      left_eye_idx == right_eye_idx) {
    throw std::invalid_argument("align_landmarks: invalid eye indices");
  }
  const Point el = lm.point(left_eye_idx);
  const Point er = lm.point(right_eye_idx);
  const double dx = er.x - el.x, dy = er.y - el.y;
  if (dx * dx + dy * dy == 0.0) {
    throw std::invalid_argument("align_landmarks: coincident eye points (degenerate geometry)");
  }
  // Two-point similarity as a complex ratio: a = (cr-cl)/(er-el), b = cl - a*el.
  const double cdx = canonical_right.x - canonical_left.x;
  const double cdy = canonical_right.y - canonical_left.y;
  const double denom = dx * dx + dy * dy;
  const double ar = (cdx * dx + cdy * dy) / denom;
  const double ai = (cdy * dx - cdx * dy) / denom;
  SimilarityTransform t;
  t.scale = std::hypot(ar, ai);
  if (t.scale == 0.0) {
    throw std::invalid_argument("align_landmarks: canonical eye points coincide");
  }
  t.rotation = std::atan2(ai, ar);
  t.tx = canonical_left.x - (ar * el.x - ai * el.y);
  t.ty = canonical_left.y - (ai * el.x + ar * el.y);

  LandmarkSet out = t.apply(lm);
  // pin the anchors exactly; the closed form already lands within rounding
  out.set(left_eye_idx, canonical_left.x, canonical_left.y);
  out.set(right_eye_idx, canonical_right.x, canonical_right.y);
  return {out, t};
}

namespace {

// One-sided Jacobi: orthogonalizes the columns of A (m x n, kept as a
// vector of columns), accumulating the rotations into V. At convergence
// column j equals u_j * sigma_j and V holds the right singular vectors.
void jacobi_svd_columns(std::vector<std::vector<double>>& cols,
                        std::vector<std::vector<double>>& v) {
  const size_t n = cols.size();
  if (n == 0) return;
  const size_t m = cols[0].size();
  v.assign(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  const double tol = 1e-14;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (size_t p = 0; p + 1 < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (size_t i = 0; i < m; ++i) {
          app += cols[p][i] * cols[p][i];
          aqq += cols[q][i] * cols[q][i];
          apq += cols[p][i] * cols[q][i];
        }
        if (std::fabs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        off = std::max(off, std::fabs(apq) / std::sqrt(std::max(app * aqq, 1e-300)));
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (size_t i = 0; i < m; ++i) {
          const double xp = cols[p][i], xq = cols[q][i];
          cols[p][i] = c * xp - s * xq;
          cols[q][i] = s * xp + c * xq;
        }
        for (size_t i = 0; i < n; ++i) {
          const double vp = v[p][i], vq = v[q][i];
          v[p][i] = c * vp - s * vq;
          v[q][i] = s * vp + c * vq;
        }
      }
    }
    if (off == 0.0) break;
  }
}

}  // namespace

ShapeBasis fit_shape_basis(const std::vector<LandmarkSet>& shapes, const ComponentSelect& sel) {
  const int64_t M = static_cast<int64_t>(shapes.size());
  if (M < 2) throw std::invalid_argument("fit_shape_basis: need at least 2 shapes");
  shapes[0].validate();
  const int64_t K = shapes[0].count();
  const int64_t dim = 2 * K;
  for (const LandmarkSet& s : shapes) {
    s.validate();
    if (s.count() != K) throw std::invalid_argument("fit_shape_basis: mismatched point counts");
  }

  std::vector<double> mean(dim, 0.0);
  for (const LandmarkSet& s : shapes) {
    for (int64_t d = 0; d < dim; ++d) mean[d] += s.xy[d];
  }
  for (double& v : mean) v /= static_cast<double>(M);

  // centered data, one column per coordinate dimension (rows are samples)
  std::vector<std::vector<double>> cols(dim, std::vector<double>(M));
  for (int64_t d = 0; d < dim; ++d) {
    for (int64_t i = 0; i < M; ++i) cols[d][i] = shapes[i].xy[d] - mean[d];
  }
  std::vector<std::vector<double>> v;
  jacobi_svd_columns(cols, v);

  // singular values and principal directions, sorted descending
  std::vector<std::pair<double, int64_t>> order(dim);
  for (int64_t d = 0; d < dim; ++d) {
    double sq = 0.0;
    for (int64_t i = 0; i < M; ++i) sq += cols[d][i] * cols[d][i];
    order[d] = {sq, d};
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const int64_t max_rank = std::min<int64_t>(dim, M - 1);
  std::vector<double> eigvals;
  for (int64_t j = 0; j < max_rank; ++j) {
    eigvals.push_back(order[j].first / static_cast<double>(M - 1));
  }

  int64_t N;
  if (sel.n_components >= 0) {
    if (sel.n_components > max_rank) {
      throw std::invalid_argument("fit_shape_basis: requested components exceed min(2K, M-1)");
    }
    N = sel.n_components;
  } else {
    if (sel.variance_fraction <= 0.0 || sel.variance_fraction > 1.0) {
      throw std::invalid_argument("fit_shape_basis: variance fraction must be in (0,1]");
    }
    const double total = std::accumulate(eigvals.begin(), eigvals.end(), 0.0);
    if (total <= 0.0) {
      N = 0;  // all shapes identical
    } else {
      double acc = 0.0;
      N = max_rank;
      for (int64_t j = 0; j < max_rank; ++j) {
        acc += eigvals[j];
        if (acc / total >= sel.variance_fraction - 1e-15) {
          N = j + 1;
          break;
        }
      }
    }
  }

  ShapeBasis basis;
  basis.K = K;
  basis.N = N;
  basis.mean = std::move(mean);
  basis.eigenvalues.assign(eigvals.begin(), eigvals.begin() + N);
  basis.basis.assign(dim * N, 0.0);
  for (int64_t j = 0; j < N; ++j) {
    const int64_t src = order[j].second;
    // sign convention: first entry with magnitude > 1e-12 is positive
    double sign = 1.0;
    for (int64_t d = 0; d < dim; ++d) {
      if (std::fabs(v[src][d]) > 1e-12) {
        sign = v[src][d] > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (int64_t d = 0; d < dim; ++d) {
      basis.basis[d * N + j] = sign * v[src][d];
    }
  }
  return basis;
}

namespace {
void require_dims(const ShapeBasis& basis, const LandmarkSet& base, int64_t params_len,
                  const char* op) {
  if (base.count() != basis.K) {
    throw std::invalid_argument(std::string(op) + ": base shape has " +
                                std::to_string(base.count()) + " points, basis expects " +
                                std::to_string(basis.K));
  }
  if (params_len >= 0 && params_len != basis.N) {
    throw std::invalid_argument(std::string(op) + ": parameter length " +
                                std::to_string(params_len) + " does not match basis N=" +
                                std::to_string(basis.N));
  }
}
}  // namespace

LandmarkSet shape_from_params(const ShapeBasis& basis, const LandmarkSet& base_shape,
                              const ShapeParams& params) {
  require_dims(basis, base_shape, static_cast<int64_t>(params.p.size()), "shape_from_params");
  const int64_t dim = 2 * basis.K;
  LandmarkSet out(basis.K);
  for (int64_t d = 0; d < dim; ++d) {
    double acc = base_shape.xy[d];
    const double* row = basis.basis.data() + d * basis.N;
    for (int64_t j = 0; j < basis.N; ++j) acc += row[j] * params.p[j];
    out.xy[d] = acc;
  }
  return out;
}

ShapeParams fit_params(const ShapeBasis& basis, const LandmarkSet& base_shape,
                       const LandmarkSet& observed) {
  require_dims(basis, base_shape, -1, "fit_params");
  if (observed.count() != basis.K) {
    throw std::invalid_argument("fit_params: observed shape dimension mismatch");
  }
  const int64_t dim = 2 * basis.K;
  ShapeParams params;
  params.p.assign(basis.N, 0.0);
  for (int64_t j = 0; j < basis.N; ++j) {
    double acc = 0.0;
    for (int64_t d = 0; d < dim; ++d) {
      acc += basis.basis[d * basis.N + j] * (observed.xy[d] - base_shape.xy[d]);
    }
    params.p[j] = acc;
  }
  return params;
}

ShapeParams fit_params_least_squares(const ShapeBasis& basis, const LandmarkSet& base_shape,
                                     const LandmarkSet& observed) {
  require_dims(basis, base_shape, -1, "fit_params_least_squares");
  if (observed.count() != basis.K) {
    throw std::invalid_argument("fit_params_least_squares: observed shape dimension mismatch");
  }
  const int64_t dim = 2 * basis.K;
  const int64_t n = basis.N;
  if (n == 0) return ShapeParams{};
  // normal equations: (S^T S) p = S^T r
  std::vector<double> ata(n * n, 0.0);
  std::vector<double> atb(n, 0.0);
  for (int64_t d = 0; d < dim; ++d) {
    const double* row = basis.basis.data() + d * n;
    const double r = observed.xy[d] - base_shape.xy[d];
    for (int64_t i = 0; i < n; ++i) {
      atb[i] += row[i] * r;
      for (int64_t j = i; j < n; ++j) ata[i * n + j] += row[i] * row[j];
    }
  }
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < i; ++j) ata[i * n + j] = ata[j * n + i];
  }
  // Gaussian elimination with partial pivoting
  std::vector<int64_t> piv(n);
  std::iota(piv.begin(), piv.end(), 0);
  for (int64_t col = 0; col < n; ++col) {
    int64_t best = col;
    for (int64_t r2 = col + 1; r2 < n; ++r2) {
      if (std::fabs(ata[r2 * n + col]) > std::fabs(ata[best * n + col])) best = r2;
    }
    if (std::fabs(ata[best * n + col]) < 1e-300) {
      throw std::runtime_error("fit_params_least_squares: singular normal equations");
    }
    if (best != col) {
      for (int64_t j2 = 0; j2 < n; ++j2) std::swap(ata[col * n + j2], ata[best * n + j2]);
      std::swap(atb[col], atb[best]);
    }
    for (int64_t r2 = col + 1; r2 < n; ++r2) {
      const double f = ata[r2 * n + col] / ata[col * n + col];
      if (f == 0.0) continue;
      for (int64_t j2 = col; j2 < n; ++j2) ata[r2 * n + j2] -= f * ata[col * n + j2];
      atb[r2] -= f * atb[col];
    }
  }
  ShapeParams params;
  params.p.assign(n, 0.0);
  for (int64_t row = n - 1; row >= 0; --row) {
    double acc = atb[row];
    for (int64_t j2 = row + 1; j2 < n; ++j2) acc -= ata[row * n + j2] * params.p[j2];
    params.p[row] = acc / ata[row * n + row];
  }
  return params;
}

LandmarkSet transfer_shape(const ShapeBasis& basis, const LandmarkSet& neutral_target,
                           const ShapeParams& params_source) {
  return shape_from_params(basis, neutral_target, params_source);
}

ShapeParams interpolate_params(const ShapeParams& from, const ShapeParams& to, double t) {
  if (from.p.size() != to.p.size()) {
    throw std::invalid_argument("interpolate_params: length mismatch");
  }
  ShapeParams out;
  out.p.resize(from.p.size());
  for (size_t i = 0; i < from.p.size(); ++i) {
    out.p[i] = (1.0 - t) * from.p[i] + t * to.p[i];
  }
  return out;
}

std::map<std::string, ShapeParams> semantic_prototypes(
    const ShapeBasis& basis, const std::vector<LabeledShapePair>& samples) {
  if (samples.empty()) throw std::invalid_argument("semantic_prototypes: no samples");
  std::map<std::string, ShapeParams> sums;
  std::map<std::string, int64_t> counts;
  for (const LabeledShapePair& s : samples) {
    ShapeParams p = fit_params(basis, s.neutral, s.expressioned);
    auto it = sums.find(s.label);
    if (it == sums.end()) {
      sums[s.label] = p;
      counts[s.label] = 1;
    } else {
      for (size_t i = 0; i < p.p.size(); ++i) it->second.p[i] += p.p[i];
      counts[s.label] += 1;
    }
  }
  for (auto& [label, proto] : sums) {
    const double c = static_cast<double>(counts[label]);
    for (double& v : proto.p) v /= c;
  }
  return sums;
}

// ---- persistence --------------------------------------------------------------

void write_landmarks(const std::string& path, const LandmarkSet& lm) {
  lm.validate();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open landmark file for write: " + path);
  std::fprintf(f, "%lld\n", static_cast<long long>(lm.count()));
  for (int64_t i = 0; i < lm.count(); ++i) {
    std::fprintf(f, "%.17g %.17g\n", lm.x(i), lm.y(i));
  }
  std::fclose(f);
}

LandmarkSet read_landmarks(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open landmark file: " + path);
  int64_t k = -1;
  if (!(is >> k) || k < 0) throw std::runtime_error("malformed landmark file (bad K): " + path);
  LandmarkSet lm(k);
  for (int64_t i = 0; i < k; ++i) {
    double px, py;
    if (!(is >> px >> py)) {
      throw std::runtime_error("malformed landmark file (truncated points): " + path);
    }
    lm.set(i, px, py);
  }
  lm.validate();
  return lm;
}

namespace {
void put_u32le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("shape basis file truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
void put_f64le(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}
double get_f64le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("shape basis file truncated");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}
}  // namespace

void write_shape_basis(const std::string& path, const ShapeBasis& basis) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open basis file for write: " + path);
  os.write("G2SB", 4);
  put_u32le(os, static_cast<uint32_t>(basis.K));
  put_u32le(os, static_cast<uint32_t>(basis.N));
  for (double v : basis.mean) put_f64le(os, v);
  for (double v : basis.eigenvalues) put_f64le(os, v);
  for (double v : basis.basis) put_f64le(os, v);
  if (!os) throw std::runtime_error("basis write failed: " + path);
}

ShapeBasis read_shape_basis(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open basis file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "G2SB", 4) != 0) {
    throw std::runtime_error("bad shape basis magic in " + path);
  }
  ShapeBasis b;
  b.K = get_u32le(is);
  b.N = get_u32le(is);
  b.mean.resize(2 * b.K);
  for (double& v : b.mean) v = get_f64le(is);
  b.eigenvalues.resize(b.N);
  for (double& v : b.eigenvalues) v = get_f64le(is);
  b.basis.resize(2 * b.K * b.N);
  for (double& v : b.basis) v = get_f64le(is);
  return b;
}

}  // namespace g2
