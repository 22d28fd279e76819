#include "argem/model.hpp"

#include <cmath>

#include "argem/error.hpp"

namespace argem {

bool is_variational(Variant v) {
  return v == Variant::Arvga || v == Variant::ArvgaGd || v == Variant::ArvgaAx;
}

DecoderKind decoder_kind(Variant v) {
  switch (v) {
    case Variant::Arga:
    case Variant::Arvga:
      return DecoderKind::InnerProduct;
    case Variant::ArgaGd:
    case Variant::ArvgaGd:
      return DecoderKind::GcnStructure;
    case Variant::ArgaAx:
    case Variant::ArvgaAx:
      return DecoderKind::GcnContent;
  }
  throw ContractError("unknown variant");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Arga: return "arga";
    case Variant::Arvga: return "arvga";
    case Variant::ArgaGd: return "arga_gd";
    case Variant::ArvgaGd: return "arvga_gd";
    case Variant::ArgaAx: return "arga_ax";
    case Variant::ArvgaAx: return "arvga_ax";
  }
  throw ContractError("unknown variant");
}

std::string to_string(Prior p) {
  return p == Prior::Gaussian ? "gaussian" : "uniform";
}

Variant parse_variant(const std::string& s) {
  if (s == "arga") return Variant::Arga;
  if (s == "arvga") return Variant::Arvga;
  if (s == "arga_gd") return Variant::ArgaGd;
  if (s == "arvga_gd") return Variant::ArvgaGd;
  if (s == "arga_ax") return Variant::ArgaAx;
  if (s == "arvga_ax") return Variant::ArvgaAx;
  throw ContractError("unknown model variant: '" + s + "'");
}

Prior parse_prior(const std::string& s) {
  if (s == "gaussian") return Prior::Gaussian;
  if (s == "uniform") return Prior::Uniform;
  throw ContractError("unknown prior: '" + s + "'");
}

namespace {

DenseMat glorot(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  DenseMat w(rows, cols);
  for (double& v : w.data) v = rng.uniform(-bound, bound);
  return w;
}

constexpr double kLogSigmaClamp = 10.0;

}  // namespace

ModelWeights init_weights(Variant v, const ModelDims& dims, Rng& rng) {
  check_contract(dims.m >= 1 && dims.hidden >= 1 && dims.embed >= 1,
                 "init_weights: dimensions must be positive");
  ModelWeights w;
  w.variant = v;
  w.enc.w0 = glorot(dims.m, dims.hidden, rng);
  w.enc.w1 = glorot(dims.hidden, dims.embed, rng);
  if (is_variational(v)) {
    w.enc.w1_sigma = glorot(dims.hidden, dims.embed, rng);
  }
  w.dec.kind = decoder_kind(v);
  if (w.dec.kind != DecoderKind::InnerProduct) {
    const int k = w.dec.kind == DecoderKind::GcnStructure ? dims.n : dims.m;
    check_contract(k >= 1, "init_weights: decoder output width must be positive");
    w.dec.wd1 = glorot(dims.embed, dims.dec_hidden, rng);
    w.dec.wd2 = glorot(dims.dec_hidden, k, rng);
  }
  w.disc.w1 = glorot(dims.embed, dims.disc_h1, rng);
  w.disc.b1 = DenseMat::zeros(1, dims.disc_h1);
  w.disc.w2 = glorot(dims.disc_h1, dims.disc_h2, rng);
  w.disc.b2 = DenseMat::zeros(1, dims.disc_h2);
  w.disc.w3 = glorot(dims.disc_h2, 1, rng);
  w.disc.b3 = DenseMat::zeros(1, 1);
  return w;
}

EncoderVars make_encoder_vars(Tape& t, const EncoderWeights& w, bool requires_grad) {
  EncoderVars v;
  v.w0 = t.leaf(w.w0, requires_grad);
  v.w1 = t.leaf(w.w1, requires_grad);
  if (w.w1_sigma.size() > 0) v.w1_sigma = t.leaf(w.w1_sigma, requires_grad);
  return v;
}

DecoderVars make_decoder_vars(Tape& t, const DecoderWeights& w, bool requires_grad) {
  DecoderVars v;
  v.kind = w.kind;
  if (w.kind != DecoderKind::InnerProduct) {
    v.wd1 = t.leaf(w.wd1, requires_grad);
    v.wd2 = t.leaf(w.wd2, requires_grad);
  }
  return v;
}

DiscVars make_disc_vars(Tape& t, const DiscriminatorWeights& w, bool requires_grad) {
  DiscVars v;
  v.w1 = t.leaf(w.w1, requires_grad);
  v.b1 = t.leaf(w.b1, requires_grad);
  v.w2 = t.leaf(w.w2, requires_grad);
  v.b2 = t.leaf(w.b2, requires_grad);
  v.w3 = t.leaf(w.w3, requires_grad);
  v.b3 = t.leaf(w.b3, requires_grad);
  return v;
}

LatentVars encode_on(Tape& t, const Propagator& p, Var x, const EncoderVars& w,
                     bool variational, const DenseMat* eps) {
  // Layer 1: relu(P (X W0)); layer 2 heads are linear.
  Var z1 = t.relu(t.spmm(p.mat, t.matmul(x, w.w0)));
  Var mu = t.spmm(p.mat, t.matmul(z1, w.w1));
  LatentVars out;
  out.mu = mu;
  if (!variational) {
    out.z = mu;
    return out;
  }
  check_contract(w.w1_sigma.valid(), "variational encoder needs w1_sigma");
  check_contract(eps != nullptr, "variational encoder needs a noise draw");
  Var logs = t.clamp(t.spmm(p.mat, t.matmul(z1, w.w1_sigma)), -kLogSigmaClamp,
                     kLogSigmaClamp);
  const DenseMat& muv = t.value(mu);
  check_shape(eps->rows == muv.rows && eps->cols == muv.cols,
              "encode: eps shape mismatch");
  Var noise = t.constant(*eps);
  out.log_sigma = logs;
  out.z = t.add(mu, t.hadamard(t.exp(logs), noise));
  return out;
}

Var decode_gcn_on(Tape& t, Var z, const Propagator& p, const DecoderVars& w) {
  check_contract(w.kind != DecoderKind::InnerProduct,
                 "decode_gcn_on: inner-product decoder has no GCN layers");
  Var zd = t.spmm(p.mat, t.matmul(z, w.wd1));
  return t.spmm(p.mat, t.matmul(zd, w.wd2));
}

Var discriminate_logits_on(Tape& t, Var z, const DiscVars& w) {
  Var h1 = t.relu(t.add_bias(t.matmul(z, w.w1), w.b1));
  Var h2 = t.relu(t.add_bias(t.matmul(h1, w.w2), w.b2));
  return t.add_bias(t.matmul(h2, w.w3), w.b3);
}

Var disc_loss_on(Tape& t, Var real_logits, Var fake_logits) {
  check_shape(t.value(real_logits).rows == t.value(fake_logits).rows,
              "adversarial loss: batch sizes differ");
  Var real_term = t.bce_with_logits_mean_const(real_logits, 1.0);
  Var fake_term = t.bce_with_logits_mean_const(fake_logits, 0.0);
  return t.add(t.scale(real_term, 0.5), t.scale(fake_term, 0.5));
}

Var gen_loss_on(Tape& t, Var fake_logits) {
  return t.bce_with_logits_mean_const(fake_logits, 1.0);
}

LatentBatch encode(const Propagator& p, const DenseMat& x, const EncoderWeights& w,
                   bool variational, Rng& rng) {
  Tape t;
  EncoderVars wv = make_encoder_vars(t, w, false);
  Var xv = t.constant(x);
  DenseMat eps;
  if (variational) {
    eps = DenseMat(x.rows, w.w1.cols);
    for (double& v : eps.data) v = rng.normal();
  }
  LatentVars lv = encode_on(t, p, xv, wv, variational, variational ? &eps : nullptr);
  LatentBatch out;
  out.z = t.value(lv.z);
  out.mu = t.value(lv.mu);
  if (variational) out.log_sigma = t.value(lv.log_sigma);
  return out;
}

DenseMat decode_inner_product(const DenseMat& z) {
  check_contract(z.all_finite(), "decode_inner_product: non-finite input");
  return dense_matmul(z, [&] {
    DenseMat zt(z.cols, z.rows);
    for (int i = 0; i < z.rows; ++i)
      for (int j = 0; j < z.cols; ++j) zt(j, i) = z(i, j);
    return zt;
  }());
}

DenseMat decode_gcn(const DenseMat& z, const Propagator& p, const DecoderWeights& w) {
  Tape t;
  DecoderVars wv = make_decoder_vars(t, w, false);
  Var zv = t.constant(z);
  return t.value(decode_gcn_on(t, zv, p, wv));
}

double structure_loss(const DenseMat& logits, const StructTarget& target) {
  Tape t;
  Var lv = t.constant(logits);
  return t.value(t.structure_loss_logits(lv, target))(0, 0);
}

double content_loss(const DenseMat& logits, const DenseMat& x) {
  Tape t;
  Var lv = t.constant(logits);
  return t.value(t.bce_with_logits_mean(lv, x))(0, 0);
}

double kl_loss(const DenseMat& mu, const DenseMat& log_sigma) {
  Tape t;
  Var mv = t.constant(mu);
  Var sv = t.clamp(t.constant(log_sigma), -kLogSigmaClamp, kLogSigmaClamp);
  return t.value(t.kl_gaussian(mv, sv))(0, 0);
}

DenseMat discriminate(const DenseMat& z, const DiscriminatorWeights& w) {
  Tape t;
  DiscVars wv = make_disc_vars(t, w, false);
  Var logits = discriminate_logits_on(t, t.constant(z), wv);
  return t.value(t.sigmoid(logits));
}

std::pair<double, double> adversarial_losses_from_logits(const DenseMat& real_logits,
                                                         const DenseMat& fake_logits) {
  Tape t;
  Var rv = t.constant(real_logits);
  Var fv = t.constant(fake_logits);
  const double disc = t.value(disc_loss_on(t, rv, fv))(0, 0);
  const double gen = t.value(gen_loss_on(t, fv))(0, 0);
  return {disc, gen};
}

}  // namespace argem
