#include "g2/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace g2 {

namespace {

void check_image_pair(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rank() != 3 || b.rank() != 3 || !a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": images must share a [C,H,W] shape");
  }
  if (a.extent(0) != 1 && a.extent(0) != 3) {
    throw std::invalid_argument(std::string(op) + ": expected 1 or 3 channels");
  }
  for (const Tensor* t : {&a, &b}) {
    for (int64_t i = 0; i < t->numel(); ++i) {
      if ((*t)[i] < 0.0 || (*t)[i] > 1.0) {
        throw std::invalid_argument(std::string(op) + ": values must lie in [0,1]");
      }
    }
  }
}

std::vector<double> luminance(const Tensor& img) {
  const int64_t h = img.extent(1), w = img.extent(2);
  std::vector<double> y(h * w);
  if (img.extent(0) == 1) {
    std::copy(img.data(), img.data() + h * w, y.begin());
  } else {
    const double* r = img.data();
    const double* g = img.data() + h * w;
    const double* b = img.data() + 2 * h * w;
    for (int64_t i = 0; i < h * w; ++i) y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  }
  return y;
}

}  // namespace

double psnr(const Tensor& reference, const Tensor& candidate) {
  check_image_pair(reference, candidate, "psnr");
  const std::vector<double> yr = luminance(reference);
  const std::vector<double> yc = luminance(candidate);
  double mse = 0.0;
  for (size_t i = 0; i < yr.size(); ++i) {
    const double d = yr[i] - yc[i];
    mse += d * d;
  }
  mse /= static_cast<double>(yr.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

// 11x11 Gaussian window, sigma 1.5, normalized to unit sum
const std::vector<double>& ssim_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(11 * 11);
    double total = 0.0;
    for (int i = 0; i < 11; ++i) {
      for (int j = 0; j < 11; ++j) {
        const double dy = i - 5, dx = j - 5;
        w[i * 11 + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
        total += w[i * 11 + j];
      }
    }
    for (double& v : w) v /= total;
    return w;
  }();
  return win;
}

double ssim_channel(const double* x, const double* y, int64_t h, int64_t w) {
  constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2
  constexpr double kC2 = 0.03 * 0.03;  // (K2*L)^2
  const std::vector<double>& win = ssim_window();
  const int64_t oh = h - 10, ow = w - 10;
  double total = 0.0;
  for (int64_t oy = 0; oy < oh; ++oy) {
    for (int64_t ox = 0; ox < ow; ++ox) {
      double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
      for (int64_t i = 0; i < 11; ++i) {
        for (int64_t j = 0; j < 11; ++j) {
          const double wv = win[i * 11 + j];
          const double xv = x[(oy + i) * w + ox + j];
          const double yv = y[(oy + i) * w + ox + j];
          mx += wv * xv;
          my += wv * yv;
          mxx += wv * xv * xv;
          myy += wv * yv * yv;
          mxy += wv * xv * yv;
        }
      }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cxy = mxy - mx * my;
      const double num = (2.0 * mx * my + kC1) * (2.0 * cxy + kC2);
      const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
      total += num / den;
    }
  }
  return total / static_cast<double>(oh * ow);
}

}  // namespace

double ssim(const Tensor& reference, const Tensor& candidate) {
  check_image_pair(reference, candidate, "ssim");
  const int64_t c = reference.extent(0), h = reference.extent(1), w = reference.extent(2);
  if (h < 11 || w < 11) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  double total = 0.0;
  for (int64_t ch = 0; ch < c; ++ch) {
    total += ssim_channel(reference.data() + ch * h * w, candidate.data() + ch * h * w, h, w);
  }
  return total / static_cast<double>(c);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return dot / denom;
}

namespace {

// type-7 quantile (linear interpolation between order statistics)
double quantile(const std::vector<double>& sorted_ascending, double p) {
  const size_t m = sorted_ascending.size();
  if (m == 0) throw std::invalid_argument("quantile of empty set");
  if (m == 1) return sorted_ascending[0];
  const double hpos = p * static_cast<double>(m - 1);
  const size_t lo = static_cast<size_t>(std::floor(hpos));
  const size_t hi = std::min(lo + 1, m - 1);
  const double frac = hpos - static_cast<double>(lo);
  return sorted_ascending[lo] + frac * (sorted_ascending[hi] - sorted_ascending[lo]);
}

}  // namespace

RecognitionResult recognition_eval(const std::vector<FeatureEntry>& gallery,
                                   const std::vector<FeatureEntry>& probes) {
  if (gallery.empty() || probes.empty()) {
    throw std::invalid_argument("recognition_eval: empty gallery or probe set");
  }
  std::set<int> gallery_ids;
  for (const FeatureEntry& g : gallery) {
    if (!gallery_ids.insert(g.id).second) {
      throw std::invalid_argument("recognition_eval: duplicate gallery id " +
                                  std::to_string(g.id));
    }
  }

  int64_t rank1_hits = 0;
  std::vector<double> genuine, impostor;
  genuine.reserve(probes.size());
  impostor.reserve(probes.size() * (gallery.size() - 1));
  for (const FeatureEntry& p : probes) {
    double best = -2.0;
    int best_id = -1;
    bool found_genuine = false;
    for (const FeatureEntry& g : gallery) {
      const double s = cosine_similarity(p.feature, g.feature);
      if (s > best) {
        best = s;
        best_id = g.id;
      }
      if (g.id == p.id) {
        genuine.push_back(s);
        found_genuine = true;
      } else {
        impostor.push_back(s);
      }
    }
    if (!found_genuine) {
      throw std::invalid_argument("recognition_eval: probe id " + std::to_string(p.id) +
                                  " missing from gallery");
    }
    if (best_id == p.id) ++rank1_hits;
  }

  std::sort(impostor.begin(), impostor.end());
  auto tar_at = [&](double far) {
    const double threshold = quantile(impostor, 1.0 - far);
    int64_t accepted = 0;
    for (double s : genuine) {
      if (s > threshold) ++accepted;
    }
    return 100.0 * static_cast<double>(accepted) / static_cast<double>(genuine.size());
  };

  RecognitionResult r;
  r.rank1 = 100.0 * static_cast<double>(rank1_hits) / static_cast<double>(probes.size());
  r.tar_at_far1 = tar_at(0.01);
  r.tar_at_far01 = tar_at(0.001);
  return r;
}

}  // namespace g2
