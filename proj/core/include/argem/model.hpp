#pragma once

#include <string>
#include <utility>

#include "argem/graph.hpp"
#include "argem/rng.hpp"
#include "argem/tape.hpp"

namespace argem {

/// The six model variants: inner-product decoder, GCN decoder reconstructing
/// structure, GCN decoder reconstructing structure plus content, each in a
/// plain and a variational version.
enum class Variant { Arga, Arvga, ArgaGd, ArvgaGd, ArgaAx, ArvgaAx };
enum class DecoderKind { InnerProduct, GcnStructure, GcnContent };
enum class Prior { Gaussian, Uniform };

bool is_variational(Variant v);
DecoderKind decoder_kind(Variant v);
std::string to_string(Variant v);
std::string to_string(Prior p);
Variant parse_variant(const std::string& s);  // ContractError on unknown name
Prior parse_prior(const std::string& s);

/// Two-layer GCN encoder. The first layer is shared between the mean and
/// log-sigma heads of the variational encoder.
struct EncoderWeights {
  DenseMat w0;        // m x hidden
  DenseMat w1;        // hidden x embed (mean head)
  DenseMat w1_sigma;  // hidden x embed, empty for non-variational models
};

struct DecoderWeights {
  DecoderKind kind = DecoderKind::InnerProduct;
  DenseMat wd1;  // embed x dec_hidden (GCN decoders only)
  DenseMat wd2;  // dec_hidden x k, k = n (structure) or k = m (content)
};

/// MLP discriminator: affine d->h1, h1->h2, h2->1 with biases, relu hidden
/// activations, sigmoid output.
struct DiscriminatorWeights {
  DenseMat w1, b1;
  DenseMat w2, b2;
  DenseMat w3, b3;
};

struct ModelWeights {
  Variant variant = Variant::Arga;
  EncoderWeights enc;
  DecoderWeights dec;
  DiscriminatorWeights disc;
};

struct ModelDims {
  int n = 0;           // node count (width of the GcnStructure output)
  int m = 0;           // feature count
  int hidden = 32;
  int embed = 16;
  int dec_hidden = 32;
  int disc_h1 = 16;
  int disc_h2 = 64;
};

/// Glorot-uniform weights, zero biases. Draw order is fixed, so a seeded Rng
/// reproduces the same initialization.
ModelWeights init_weights(Variant v, const ModelDims& dims, Rng& rng);

/// Encoder/decoder outputs of one forward pass.
struct LatentBatch {
  DenseMat z;          // n x d; equals mu for non-variational encoders
  DenseMat mu;         // n x d
  DenseMat log_sigma;  // n x d after clamping; empty for non-variational
};

// Value-level forward passes. Each builds a scratch tape internally; the
// trainer uses the *_on builders below instead so gradients can flow.

LatentBatch encode(const Propagator& p, const DenseMat& x, const EncoderWeights& w,
                   bool variational, Rng& rng);

/// Inner-product logits Z Z^T (sigmoid belongs to the loss, not here).
DenseMat decode_inner_product(const DenseMat& z);

/// Two linear GCN layers: O = P (P Z Wd1) Wd2, returned as logits.
DenseMat decode_gcn(const DenseMat& z, const Propagator& p, const DecoderWeights& w);

/// Mean weighted sigmoid cross-entropy of n x n logits against the
/// self-loop-augmented adjacency target.
double structure_loss(const DenseMat& logits, const StructTarget& target);

/// Mean sigmoid cross-entropy of n x m logits against binary features.
double content_loss(const DenseMat& logits, const DenseMat& x);

/// Closed-form KL to the standard normal, averaged per node. Inputs are
/// clamped to [-10, 10] in log-sigma first.
double kl_loss(const DenseMat& mu, const DenseMat& log_sigma);

/// Discriminator probabilities, one per input row.
DenseMat discriminate(const DenseMat& z, const DiscriminatorWeights& w);

/// (disc_loss, gen_loss) from discriminator logits on prior samples and on
/// encoder output. disc = -1/2 mean log D(real) - 1/2 mean log(1 - D(fake));
/// gen = -mean log D(fake), the non-saturating form.
std::pair<double, double> adversarial_losses_from_logits(const DenseMat& real_logits,
                                                         const DenseMat& fake_logits);

// Tape builders used by the trainer and the gradient-check suites.

struct EncoderVars {
  Var w0, w1, w1_sigma;
};
struct DecoderVars {
  DecoderKind kind = DecoderKind::InnerProduct;
  Var wd1, wd2;
};
struct DiscVars {
  Var w1, b1, w2, b2, w3, b3;
};
struct LatentVars {
  Var z, mu, log_sigma;
};

EncoderVars make_encoder_vars(Tape& t, const EncoderWeights& w, bool requires_grad);
DecoderVars make_decoder_vars(Tape& t, const DecoderWeights& w, bool requires_grad);
DiscVars make_disc_vars(Tape& t, const DiscriminatorWeights& w, bool requires_grad);

/// eps is the reparameterization draw (n x d standard normals); required for
/// variational encoders, ignored otherwise.
LatentVars encode_on(Tape& t, const Propagator& p, Var x, const EncoderVars& w,
                     bool variational, const DenseMat* eps);

Var decode_gcn_on(Tape& t, Var z, const Propagator& p, const DecoderVars& w);

Var discriminate_logits_on(Tape& t, Var z, const DiscVars& w);

Var disc_loss_on(Tape& t, Var real_logits, Var fake_logits);
Var gen_loss_on(Tape& t, Var fake_logits);

}  // namespace argem
