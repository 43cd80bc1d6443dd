#include "g2/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace g2 {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  entries_ = {
      {"seed", "7"},
      {"image_size", "64"},
      {"heatmap_sigma", "0"},  // 0 = auto: 2.0 * image_size / 128
      {"heatmap_mode", "per-point"},
      {"dataset_dir", "data"},
      {"dataset_subjects", "20"},
      {"dataset_expressions", "6"},
      {"dataset_intensities", "3"},
      {"dataset_test_subjects", "5"},
      {"train_iterations", "1200"},
      {"train_batch_size", "5"},
      {"train_lr", "1e-4"},
      {"train_alpha1", "10"},
      {"train_alpha2", "5"},
      {"train_alpha3_start", "0.1"},
      {"train_alpha3_end", "0.5"},
      {"train_alpha3_knee_frac", "0.8"},
      {"train_checkpoint_every", "400"},
      {"train_grad_clip_norm", "0"},
      {"gen_widths", "32,64,128,256"},
      {"gen_depth", "6"},
      {"disc_widths", "32,64,128"},
      {"disc_strides", "2,2,1"},
      {"identity_embed_dim", "64"},
      {"identity_widths", "12,24,32,48,48"},
      {"pretrain_iterations", "500"},
      {"pretrain_batch_size", "16"},
      {"pretrain_lr", "2e-4"},
      {"pretrain_holdout_frac", "0.2"},
      {"align_left_eye_idx", "1"},
      {"align_right_eye_idx", "5"},
      {"align_canonical_left", "45,54"},
      {"align_canonical_right", "99,54"},
      {"shape_variance_fraction", "0.95"},
  };
}

int RunConfig::find(const std::string& key) const {
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == key) return static_cast<int>(i);
  }
  return -1;
}

bool RunConfig::has_key(const std::string& key) const { return find(key) >= 0; }

void RunConfig::set(const std::string& key, const std::string& value) {
  const int i = find(key);
  if (i < 0) throw std::invalid_argument("unknown configuration key: " + key);
  entries_[i].second = value;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string RunConfig::str(const std::string& key) const {
  const int i = find(key);
  if (i < 0) throw std::invalid_argument("unknown configuration key: " + key);
  return entries_[i].second;
}

int64_t RunConfig::i64(const std::string& key) const {
  const std::string v = str(key);
  size_t pos = 0;
  const int64_t out = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("config key " + key + ": bad integer '" + v + "'");
  return out;
}

double RunConfig::f64(const std::string& key) const {
  const std::string v = str(key);
  size_t pos = 0;
  const double out = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("config key " + key + ": bad number '" + v + "'");
  return out;
}

std::vector<int64_t> RunConfig::i64_list(const std::string& key) const {
  const std::string v = str(key);
  std::vector<int64_t> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(std::stoll(item));
  }
  if (out.empty()) throw std::invalid_argument("config key " + key + ": empty list");
  return out;
}

std::string RunConfig::resolved() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
  return os.str();
}

void RunConfig::write_resolved(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write resolved config: " + path);
  os << resolved();
}

double RunConfig::heatmap_sigma() const {
  const double v = f64("heatmap_sigma");
  if (v > 0.0) return v;
  return 2.0 * static_cast<double>(i64("image_size")) / 128.0;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.alpha1 = f64("train_alpha1");
  t.alpha2 = f64("train_alpha2");
  t.alpha3_start = f64("train_alpha3_start");
  t.alpha3_end = f64("train_alpha3_end");
  t.alpha3_knee_frac = f64("train_alpha3_knee_frac");
  t.lr = f64("train_lr");
  t.batch_size = static_cast<int>(i64("train_batch_size"));
  t.iterations = i64("train_iterations");
  t.seed = seed();
  t.image_size = static_cast<int>(i64("image_size"));
  t.heatmap_sigma = heatmap_sigma();
  t.checkpoint_every = i64("train_checkpoint_every");
  t.grad_clip_norm = f64("train_grad_clip_norm");
  return t;
}

PreprocessOptions RunConfig::preprocess_options() const {
  PreprocessOptions o;
  o.out_size = static_cast<int>(i64("image_size"));
  o.sigma = heatmap_sigma();
  o.aggregated_heatmap = str("heatmap_mode") == "aggregated";
  if (str("heatmap_mode") != "aggregated" && str("heatmap_mode") != "per-point") {
    throw std::invalid_argument("heatmap_mode must be per-point or aggregated");
  }
  return o;
}

GeneratorConfig RunConfig::generator_config() const {
  GeneratorConfig g;
  g.image_channels = 1;
  g.heatmap_channels =
      str("heatmap_mode") == "aggregated" ? 1 : kLandmarkCount;
  g.depth = static_cast<int>(i64("gen_depth"));
  g.widths = i64_list("gen_widths");
  return g;
}

DiscriminatorConfig RunConfig::discriminator_config() const {
  DiscriminatorConfig d;
  d.image_channels = 1;
  d.heatmap_channels = str("heatmap_mode") == "aggregated" ? 1 : kLandmarkCount;
  d.widths = i64_list("disc_widths");
  d.strides.clear();
  for (int64_t s : i64_list("disc_strides")) d.strides.push_back(static_cast<int>(s));
  return d;
}

IdentityNetConfig RunConfig::identity_config(int64_t n_classes) const {
  IdentityNetConfig c;
  c.image_channels = 1;
  c.image_size = i64("image_size");
  c.embed_dim = i64("identity_embed_dim");
  c.n_classes = n_classes;
  c.widths = i64_list("identity_widths");
  return c;
}

PretrainConfig RunConfig::pretrain_config() const {
  PretrainConfig p;
  p.iterations = i64("pretrain_iterations");
  p.batch_size = static_cast<int>(i64("pretrain_batch_size"));
  p.lr = f64("pretrain_lr");
  p.holdout_frac = f64("pretrain_holdout_frac");
  p.seed = derive_seed(seed(), "pretrain");
  p.preprocess = preprocess_options();
  return p;
}

DatasetSpec RunConfig::dataset_spec() const {
  DatasetSpec d;
  d.n_subjects = static_cast<int>(i64("dataset_subjects"));
  d.expressions_per_subject = static_cast<int>(i64("dataset_expressions"));
  d.intensities = static_cast<int>(i64("dataset_intensities"));
  d.seed = derive_seed(seed(), "dataset");
  return d;
}

}  // namespace g2
