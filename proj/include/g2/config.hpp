#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "g2/networks.hpp"
#include "g2/training.hpp"

namespace g2 {

// Flat key=value run configuration ('#' starts a comment, one pair per
// line). Every key has a default; unknown keys are rejected. The fully
// resolved configuration is serialized verbatim into each run directory so
// any artifact is reproducible from the directory alone.
class RunConfig {
 public:
  RunConfig();  // defaults only

  void load_file(const std::string& path);      // overlays file values
  void set(const std::string& key, const std::string& value);  // overlay one
  bool has_key(const std::string& key) const;

  std::string str(const std::string& key) const;
  int64_t i64(const std::string& key) const;
  double f64(const std::string& key) const;
  std::vector<int64_t> i64_list(const std::string& key) const;  // comma-separated

  // deterministic serialization in registry order
  std::string resolved() const;
  void write_resolved(const std::string& path) const;

  // ---- derived structures -------------------------------------------------
  uint64_t seed() const { return static_cast<uint64_t>(i64("seed")); }
  double heatmap_sigma() const;  // explicit value, or 2.0 * image_size / 128
  TrainConfig train_config() const;
  PreprocessOptions preprocess_options() const;
  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  IdentityNetConfig identity_config(int64_t n_classes) const;
  PretrainConfig pretrain_config() const;
  DatasetSpec dataset_spec() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;  // registry order
  int find(const std::string& key) const;
};

}  // namespace g2
