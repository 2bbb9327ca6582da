#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2r/metrics.hpp"
#include "s2r/phantom.hpp"
#include "s2r/preprocess.hpp"
#include "s2r/simulate.hpp"
#include "s2r/translate.hpp"

#include <nlohmann/json.hpp>

namespace s2r {

// Procedural texture for the toy "real" domain: correlated (blurred) noise
// plus a random-direction intensity gradient.
struct RealTexture {
  double blur_sigma = 1.5;
  double noise_sd = 0.08;
  double gradient_strength = 0.25;
};

struct RealSourceConfig {
  std::string mode = "procedural";  // "procedural" | "directory"
  std::string dir;
  int n_images = 64;
  RealTexture texture;
};

struct ExperimentConfig {
  uint64_t master_seed = 1;
  std::string output_root = "runs/exp";

  int n_subjects = 16;
  SubjectDims dims;
  Spacing3 spacing;
  PopulationRanges ranges;

  SequenceParams sequence;
  double variation_pct = 0.1;
  int slices_per_phase = 4;

  PreprocessParams preprocess;

  RealSourceConfig real;

  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  TranslatorConfig translator;

  FeatureExtractor extractor;

  void validate() const;  // throws ValidationError naming the field path
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

// Stable FNV-1a hash of the canonical JSON dump.
uint64_t config_hash(const ExperimentConfig& c);

// Apply one `--set path.to.field=value` override to a JSON document.
void apply_override(nlohmann::json& j, const std::string& assignment);

struct PipelineResult {
  std::string experiment_dir;
  double fid_sim_real = 0.0;
  double fid_translated_real = 0.0;
};

// End-to-end run: labels/ sim/ preprocessed/ checkpoints/ translated/
// reports/ + manifest.json. Stages write to temp paths, then atomically
// rename; re-running with an identical config reproduces identical reports.
PipelineResult run_pipeline(const ExperimentConfig& config);

// Stage pieces, exposed for the CLI subcommands and tests.
std::vector<Image2D> build_sim_dataset(const ExperimentConfig& config,
                                       std::vector<LabelSlice>* labels_out);
std::vector<Image2D> build_real_dataset(const ExperimentConfig& config);
Image2D apply_real_texture(const Image2D& img, const RealTexture& tex,
                           uint64_t seed);

}  // namespace s2r
