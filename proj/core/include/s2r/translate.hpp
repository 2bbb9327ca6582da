#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2r/image.hpp"
#include "s2r/tensor.hpp"

namespace s2r {

struct GeneratorSpec {
  int base_channels = 32;
  int n_downsamples = 2;
  int n_resblocks = 4;
  std::vector<int> nce_layers = {0, 2, 4};

  void validate() const;
  // encoder taps: one per encoder conv, then one per resblock
  int n_encoder_layers() const { return 1 + n_downsamples + n_resblocks; }
};

struct DiscriminatorSpec {
  int base_channels = 32;
  int n_layers = 3;

  void validate() const;
};

struct TranslatorConfig {
  double tau = 0.07;
  double lambda_nce = 1.0;
  double lambda_nce_identity = 1.0;
  int n_patches = 64;
  double lr = 2e-4;
  int iterations = 300;
  int batch_size = 1;
  uint64_t seed = 0;
  int embed_dim = 64;  // projection-head output width

  void validate() const;
};

// Unit-norm patch embeddings from one encoder layer plus the spatial
// positions they came from. Source and translated sets of a pair share
// indices.
struct PatchEmbeddingSet {
  int layer = 0;
  std::vector<int> indices;  // flattened y*W+x
  ad::Tensor embeddings;     // [n_patches, d], rows unit-norm
};

// Residual encoder-decoder generator with a bounded [0,1] output and exposed
// encoder features for the contrastive loss.
class Generator {
 public:
  Generator(const GeneratorSpec& spec, uint64_t seed);

  struct Forward {
    ad::Tensor output;                   // [1,1,H,W] in [0,1]
    std::vector<ad::Tensor> features;    // encoder taps, all layers
  };

  Forward forward(const ad::Tensor& input, bool want_features) const;
  // Encoder-only pass (for re-encoding translated images).
  std::vector<ad::Tensor> encode(const ad::Tensor& input) const;

  std::vector<ad::NamedTensor> named_params() const;
  std::vector<ad::Tensor> params() const;
  const GeneratorSpec& spec() const { return spec_; }

 private:
  GeneratorSpec spec_;
  struct ConvBlock {
    ad::Tensor w, b, gamma, beta;
    int stride = 1, pad = 1;
    bool norm = true;
  };
  std::vector<ConvBlock> enc_;                  // 1 + n_downsamples
  std::vector<std::array<ConvBlock, 2>> res_;   // n_resblocks
  std::vector<ConvBlock> dec_;                  // n_downsamples
  ConvBlock out_;                               // 1x1 head, no norm
};

// PatchGAN discriminator: spatial map of realness scores.
class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, uint64_t seed);

  ad::Tensor forward(const ad::Tensor& input) const;

  std::vector<ad::NamedTensor> named_params() const;
  std::vector<ad::Tensor> params() const;

 private:
  DiscriminatorSpec spec_;
  struct Layer {
    ad::Tensor w, b, gamma, beta;
    int stride = 2;
    bool norm = true;
  };
  std::vector<Layer> layers_;
};

// Two-layer projection heads, one per NCE layer (input width = that layer's
// channel count).
class ProjectionHead {
 public:
  ProjectionHead(const GeneratorSpec& gspec, int embed_dim, uint64_t seed);

  // features: encoder taps of one image; returns one set per nce layer.
  // When reuse is non-null its indices are reused (translated-image path);
  // otherwise indices are sampled with rng.
  std::vector<PatchEmbeddingSet> sample_patches(
      const std::vector<ad::Tensor>& features, const GeneratorSpec& gspec,
      int n_patches, const std::vector<PatchEmbeddingSet>* reuse,
      uint64_t sample_seed) const;

  std::vector<ad::NamedTensor> named_params() const;
  std::vector<ad::Tensor> params() const;

 private:
  std::vector<int> nce_layers_;
  struct Head {
    ad::Tensor w1, b1, w2, b2;
  };
  std::vector<Head> heads_;
};

// Multilayer PatchNCE: sum over layers of the per-layer InfoNCE loss.
ad::Tensor patchnce_loss(const std::vector<PatchEmbeddingSet>& src,
                         const std::vector<PatchEmbeddingSet>& tr, double tau);

struct LsganLosses {
  ad::Tensor loss_d;
  ad::Tensor loss_g;
};

// loss_D = 1/2 mean((D(real)-1)^2) + 1/2 mean(D(fake)^2)
// loss_G = mean((D(fake)-1)^2)
LsganLosses lsgan_losses(const ad::Tensor& disc_real,
                         const ad::Tensor& disc_fake);

struct TrainLogRow {
  int iteration = 0;
  double loss_d = 0, loss_g = 0, loss_nce = 0, loss_nce_id = 0;
};

struct TrainedModel {
  GeneratorSpec gen_spec;
  DiscriminatorSpec disc_spec;
  TranslatorConfig config;
  std::shared_ptr<Generator> generator;
  std::shared_ptr<Discriminator> discriminator;
  std::shared_ptr<ProjectionHead> head;
  std::vector<TrainLogRow> log;
};

// One-sided contrastive unpaired translation training loop. Deterministic
// for a fixed seed and thread count. On a numeric error the last good
// checkpoint is kept at checkpoint_path before rethrowing.
TrainedModel train_cut(const std::vector<Image2D>& sim_dataset,
                       const std::vector<Image2D>& real_dataset,
                       const GeneratorSpec& gen_spec,
                       const DiscriminatorSpec& disc_spec,
                       const TranslatorConfig& config,
                       const std::string& checkpoint_path = "");

std::vector<Image2D> translate_batch(const TrainedModel& model,
                                     const std::vector<Image2D>& images);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

void write_train_log_csv(const std::vector<TrainLogRow>& log,
                         const std::string& path);

// Image <-> [1,1,H,W] tensor conversion.
ad::Tensor image_to_tensor(const Image2D& img, bool requires_grad = false);
Image2D tensor_to_image(const ad::Tensor& t);

}  // namespace s2r
