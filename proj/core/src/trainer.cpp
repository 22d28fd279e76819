#include "argem/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "argem/error.hpp"

namespace argem {

void TrainConfig::validate() const {
  check_contract(epochs >= 1, "epochs must be >= 1");
  check_contract(disc_steps >= 1, "disc_steps must be >= 1");
  check_contract(lr > 0.0 && disc_lr > 0.0, "learning rates must be positive");
  check_contract(hidden >= 1 && embed >= 1 && dec_hidden >= 1,
                 "layer widths must be positive");
  check_contract(disc_h1 >= 1 && disc_h2 >= 1, "discriminator widths must be positive");
  check_contract(disc_batch >= 0, "disc_batch must be >= 0");
  check_contract(adv_weight >= 0.0, "adv_weight must be >= 0");
}

void adam_step(AdamState& state, DenseMat& param, const DenseMat& grad, double lr,
               const std::string& name) {
  check_shape(param.same_shape(grad), "adam_step: gradient shape mismatch for " + name);
  if (!grad.all_finite()) {
    throw NumericError("non-finite gradient for parameter " + name);
  }
  if (state.m.size() == 0) {
    state.m = DenseMat::zeros(param.rows, param.cols);
    state.v = DenseMat::zeros(param.rows, param.cols);
  }
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad.data[k];
    state.m.data[k] = b1 * state.m.data[k] + (1.0 - b1) * g;
    state.v.data[k] = b2 * state.v.data[k] + (1.0 - b2) * g * g;
    const double mhat = state.m.data[k] / corr1;
    const double vhat = state.v.data[k] / corr2;
    param.data[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

DenseMat sample_prior(Prior prior, int batch, int dim, Rng& rng) {
  check_contract(batch >= 1 && dim >= 1, "sample_prior: batch and dim must be >= 1");
  DenseMat s(batch, dim);
  if (prior == Prior::Gaussian) {
    for (double& v : s.data) v = rng.normal();
  } else {
    for (double& v : s.data) v = rng.uniform(-1.0, 1.0);
  }
  return s;
}

namespace {

struct ParamRef {
  std::string name;
  DenseMat* value;
  AdamState adam;
};

DenseMat gather_rows(const DenseMat& src, const std::vector<int>& rows) {
  DenseMat out(static_cast<int>(rows.size()), src.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* from = src.data.data() + static_cast<std::size_t>(rows[i]) * src.cols;
    std::copy(from, from + src.cols, out.data.data() + i * src.cols);
  }
  return out;
}

}  // namespace

TrainedModel train(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg,
                   const TrainHooks* hooks) {
  cfg.validate();
  g.validate();
  const bool variational = is_variational(cfg.variant);
  const DecoderKind dkind = decoder_kind(cfg.variant);

  // Training adjacency only: held-out positives are removed before anything
  // downstream sees the graph.
  const Propagator prop = build_propagator(g.n, split.train_edges);
  const StructTarget target = StructTarget::build(g.n, split.train_edges);
  if (hooks && hooks->on_setup) hooks->on_setup(prop, target);

  Rng rng(cfg.seed);
  ModelDims dims;
  dims.n = g.n;
  dims.m = g.m;
  dims.hidden = cfg.hidden;
  dims.embed = cfg.embed;
  dims.dec_hidden = cfg.dec_hidden;
  dims.disc_h1 = cfg.disc_h1;
  dims.disc_h2 = cfg.disc_h2;
  ModelWeights weights = init_weights(cfg.variant, dims, rng);

  std::vector<ParamRef> enc_params;
  enc_params.push_back({"enc.w0", &weights.enc.w0, {}});
  enc_params.push_back({"enc.w1", &weights.enc.w1, {}});
  if (variational) enc_params.push_back({"enc.w1_sigma", &weights.enc.w1_sigma, {}});
  if (dkind != DecoderKind::InnerProduct) {
    enc_params.push_back({"dec.wd1", &weights.dec.wd1, {}});
    enc_params.push_back({"dec.wd2", &weights.dec.wd2, {}});
  }
  std::vector<ParamRef> disc_params;
  disc_params.push_back({"disc.w1", &weights.disc.w1, {}});
  disc_params.push_back({"disc.b1", &weights.disc.b1, {}});
  disc_params.push_back({"disc.w2", &weights.disc.w2, {}});
  disc_params.push_back({"disc.b2", &weights.disc.b2, {}});
  disc_params.push_back({"disc.w3", &weights.disc.w3, {}});
  disc_params.push_back({"disc.b3", &weights.disc.b3, {}});

  const bool adversarial = cfg.adv_weight > 0.0;
  const int batch = cfg.disc_batch > 0 ? std::min(cfg.disc_batch, g.n) : g.n;

  TrainedModel out;
  out.history.recon.reserve(cfg.epochs);

  DenseMat eps;
  std::vector<int> all_rows(g.n);
  for (int i = 0; i < g.n; ++i) all_rows[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    try {
      if (variational) {
        eps = DenseMat(g.n, cfg.embed);
        for (double& v : eps.data) v = rng.normal();
      }

      // Autoencoder forward, recorded for the later generator step.
      Tape tape;
      EncoderVars enc_vars = make_encoder_vars(tape, weights.enc, true);
      DecoderVars dec_vars = make_decoder_vars(tape, weights.dec, true);
      Var x = tape.constant(g.features);
      LatentVars latent =
          encode_on(tape, prop, x, enc_vars, variational, variational ? &eps : nullptr);

      Var recon;
      switch (dkind) {
        case DecoderKind::InnerProduct:
          recon = tape.structure_loss_inner(latent.z, target);
          break;
        case DecoderKind::GcnStructure: {
          Var o = decode_gcn_on(tape, latent.z, prop, dec_vars);
          recon = tape.structure_loss_logits(o, target);
          break;
        }
        case DecoderKind::GcnContent: {
          Var o = decode_gcn_on(tape, latent.z, prop, dec_vars);
          Var structure = tape.structure_loss_inner(latent.z, target);
          Var content = tape.bce_with_logits_mean(o, g.features);
          recon = tape.add(structure, content);
          break;
        }
      }
      out.history.recon.push_back(tape.value(recon)(0, 0));
      if (hooks && hooks->after_forward) hooks->after_forward(epoch, weights);

      Var loss = recon;
      if (variational) {
        Var kl = tape.kl_gaussian(latent.mu, latent.log_sigma);
        out.history.kl.push_back(tape.value(kl)(0, 0));
        loss = tape.add(loss, kl);
      } else {
        out.history.kl.push_back(0.0);
      }

      double disc_loss_value = 0.0;
      if (adversarial) {
        const DenseMat& z_now = tape.value(latent.z);
        for (int k = 0; k < cfg.disc_steps; ++k) {
          std::vector<int> rows;
          if (batch < g.n) {
            // partial Fisher-Yates: first `batch` entries of a seeded shuffle
            std::vector<int> idx = all_rows;
            for (int i = 0; i < batch; ++i) {
              const int j = i + static_cast<int>(rng.below(g.n - i));
              std::swap(idx[i], idx[j]);
            }
            rows.assign(idx.begin(), idx.begin() + batch);
          } else {
            rows = all_rows;
          }
          DenseMat fake = gather_rows(z_now, rows);
          DenseMat real = sample_prior(cfg.prior, batch, cfg.embed, rng);

          Tape disc_tape;
          DiscVars dvars = make_disc_vars(disc_tape, weights.disc, true);
          Var real_logits = discriminate_logits_on(disc_tape, disc_tape.constant(real), dvars);
          Var fake_logits = discriminate_logits_on(disc_tape, disc_tape.constant(fake), dvars);
          Var dl = disc_loss_on(disc_tape, real_logits, fake_logits);
          disc_loss_value = disc_tape.value(dl)(0, 0);
          disc_tape.backward(dl);
          Var dvar_list[] = {dvars.w1, dvars.b1, dvars.w2, dvars.b2, dvars.w3, dvars.b3};
          for (std::size_t pi = 0; pi < disc_params.size(); ++pi) {
            adam_step(disc_params[pi].adam, *disc_params[pi].value,
                      disc_tape.grad(dvar_list[pi]), cfg.disc_lr, disc_params[pi].name);
          }
        }

        if (hooks && hooks->after_disc_steps) hooks->after_disc_steps(epoch, weights);

        // Generator term on the full-graph embedding, discriminator frozen.
        DiscVars frozen = make_disc_vars(tape, weights.disc, false);
        Var fake_logits = discriminate_logits_on(tape, latent.z, frozen);
        Var gen = gen_loss_on(tape, fake_logits);
        out.history.gen.push_back(tape.value(gen)(0, 0));
        loss = tape.add(loss, tape.scale(gen, cfg.adv_weight));
      } else {
        out.history.gen.push_back(0.0);
      }
      out.history.disc.push_back(disc_loss_value);

      tape.backward(loss);
      Var enc_var_list[8];
      int vi = 0;
      enc_var_list[vi++] = enc_vars.w0;
      enc_var_list[vi++] = enc_vars.w1;
      if (variational) enc_var_list[vi++] = enc_vars.w1_sigma;
      if (dkind != DecoderKind::InnerProduct) {
        enc_var_list[vi++] = dec_vars.wd1;
        enc_var_list[vi++] = dec_vars.wd2;
      }
      for (std::size_t pi = 0; pi < enc_params.size(); ++pi) {
        adam_step(enc_params[pi].adam, *enc_params[pi].value,
                  tape.grad(enc_var_list[pi]), cfg.lr, enc_params[pi].name);
      }
      if (hooks && hooks->after_update) hooks->after_update(epoch, weights);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                         ": " + e.what());
    }
  }

  // Final deterministic embedding: the mean path under the final weights.
  {
    Tape tape;
    EncoderVars enc_vars = make_encoder_vars(tape, weights.enc, false);
    Var x = tape.constant(g.features);
    LatentVars latent = encode_on(tape, prop, x, enc_vars, false, nullptr);
    out.embedding = tape.value(latent.mu);
  }
  out.weights = std::move(weights);
  return out;
}

}  // namespace argem
