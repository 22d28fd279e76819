#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "argem/graph.hpp"
#include "argem/model.hpp"

namespace argem {

struct TrainConfig {
  Variant variant = Variant::Arga;
  Prior prior = Prior::Gaussian;
  int epochs = 200;      // T
  int disc_steps = 1;    // K
  double lr = 1e-3;
  double disc_lr = 1e-3;
  int hidden = 32;
  int embed = 16;
  int dec_hidden = 32;
  int disc_h1 = 16;
  int disc_h2 = 64;
  int disc_batch = 0;    // rows sampled per discriminator step; 0 = all
  double adv_weight = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Per-parameter Adam accumulators. The step counter increments exactly once
/// per update call.
struct AdamState {
  DenseMat m, v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard bias-corrected Adam update in place. Non-finite gradient entries
/// raise NumericError naming the parameter.
void adam_step(AdamState& state, DenseMat& param, const DenseMat& grad, double lr,
               const std::string& name);

/// Gaussian: i.i.d. N(0,1). Uniform: i.i.d. U(-1,1).
DenseMat sample_prior(Prior prior, int batch, int dim, Rng& rng);

struct LossHistory {
  std::vector<double> recon, kl, disc, gen;
};

struct TrainedModel {
  ModelWeights weights;
  DenseMat embedding;  // n x embed, the mean path under the final weights
  LossHistory history;
};

/// Observation points for tests; every callback is optional.
struct TrainHooks {
  std::function<void(const Propagator&, const StructTarget&)> on_setup;
  std::function<void(int epoch, const ModelWeights&)> after_forward;
  std::function<void(int epoch, const ModelWeights&)> after_disc_steps;
  std::function<void(int epoch, const ModelWeights&)> after_update;
};

/// Joint optimization of the autoencoder and the discriminator. The
/// propagator and the structure target are built from the training edges
/// only; held-out positives never contribute. Per epoch: one encoder forward,
/// disc_steps discriminator updates on sampled rows vs prior draws, then one
/// update of the encoder(+decoder) weights on recon(+KL) + adv_weight * gen
/// with the discriminator frozen. With adv_weight == 0 the adversarial module
/// is skipped entirely and the loop is the plain autoencoder objective.
TrainedModel train(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg,
                   const TrainHooks* hooks = nullptr);

}  // namespace argem
