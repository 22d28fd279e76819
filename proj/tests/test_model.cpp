#include <doctest.h>

#include <cmath>

#include "argem/gradcheck.hpp"
#include "argem/model.hpp"
#include "test_util.hpp"

using namespace argem;
using testutil::random_binary_mat;
using testutil::random_mat;

namespace {

EncoderWeights scalar_encoder(double w0, double w1) {
  EncoderWeights w;
  w.w0 = DenseMat::filled(1, 1, w0);
  w.w1 = DenseMat::filled(1, 1, w1);
  return w;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("encode: zero weights give a zero embedding") {
  Rng rng(1);
  Propagator p = build_propagator(3, {{0, 1}, {1, 2}});
  DenseMat x = random_binary_mat(3, 4, rng);
  EncoderWeights w;
  w.w0 = DenseMat::zeros(4, 2);
  w.w1 = DenseMat::zeros(2, 2);
  LatentBatch out = encode(p, x, w, false, rng);
  for (double v : out.z.data) CHECK(v == 0.0);
}

TEST_CASE("encode: single-node scalar chain") {
  // P = [[1]], X = [1], w0 = 1, w1 = 2 -> relu(1*1*1) * 1 * 2 = 2
  Rng rng(2);
  Propagator p = build_propagator(1, {});
  DenseMat x = DenseMat::filled(1, 1, 1.0);
  LatentBatch out = encode(p, x, scalar_encoder(1.0, 2.0), false, rng);
  CHECK(out.z(0, 0) == 2.0);
  CHECK(out.mu(0, 0) == 2.0);
}

TEST_CASE("encode: non-variational output is a pure function of its inputs") {
  Rng rng(3);
  Propagator p = build_propagator(5, {{0, 1}, {1, 2}, {3, 4}});
  DenseMat x = random_binary_mat(5, 6, rng);
  EncoderWeights w;
  w.w0 = random_mat(6, 4, rng);
  w.w1 = random_mat(4, 2, rng);
  Rng r1(9), r2(10);  // different rng state must not matter
  LatentBatch a = encode(p, x, w, false, r1);
  LatentBatch b = encode(p, x, w, false, r2);
  CHECK(a.z.data == b.z.data);
}

TEST_CASE("encode: variational collapse when sigma goes to zero") {
  // The reparameterization z = mu + exp(log sigma) * eps collapses to mu as
  // log sigma -> -inf; with log sigma = -30 the gap is below 1e-12.
  Rng rng(4);
  DenseMat mu = random_mat(4, 3, rng);
  DenseMat eps = random_mat(4, 3, rng);
  Tape t;
  Var muv = t.leaf(mu, false);
  Var logs = t.leaf(DenseMat::filled(4, 3, -30.0), false);
  Var z = t.add(muv, t.hadamard(t.exp(logs), t.constant(eps)));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    CHECK(std::abs(t.value(z).data[i] - mu.data[i]) < 1e-6);
  }

  // Through the encoder itself the clamp floors log sigma at -10, so the gap
  // is bounded by exp(-10) * max |eps|.
  Propagator p = build_propagator(4, {{0, 1}, {2, 3}});
  DenseMat x = random_binary_mat(4, 5, rng);
  EncoderWeights w;
  w.w0 = random_mat(5, 3, rng);
  w.w1 = random_mat(3, 2, rng);
  w.w1_sigma = DenseMat::filled(3, 2, -1e6);
  Rng enc_rng(7);
  LatentBatch out = encode(p, x, w, true, enc_rng);
  for (std::size_t i = 0; i < out.mu.size(); ++i) {
    CHECK(std::abs(out.z.data[i] - out.mu.data[i]) < std::exp(-10.0) * 10.0);
    CHECK(out.log_sigma.data[i] == -10.0);
  }
}

TEST_CASE("decode_inner_product: trivial and oracle cases") {
  DenseMat zero(3, 2);
  DenseMat logits = decode_inner_product(zero);
  for (double v : logits.data) CHECK(v == 0.0);  // implied probability 0.5

  DenseMat ortho(2, 2);
  ortho(0, 0) = 1.0;
  ortho(1, 1) = 1.0;
  DenseMat l2 = decode_inner_product(ortho);
  CHECK(l2(0, 0) == 1.0);
  CHECK(l2(1, 1) == 1.0);
  CHECK(l2(0, 1) == 0.0);
  CHECK(l2(1, 0) == 0.0);

  Rng rng(5);
  DenseMat z = random_mat(4, 2, rng);
  DenseMat got = decode_inner_product(z);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 2; ++k) dot += z(i, k) * z(j, k);
      CHECK(got(i, j) == doctest::Approx(dot).epsilon(1e-14));
      CHECK(got(i, j) == got(j, i));  // exact symmetry
    }
  }
}

TEST_CASE("decode_gcn: zero weights and scalar chain") {
  Propagator p1 = build_propagator(1, {});
  DecoderWeights w;
  w.kind = DecoderKind::GcnStructure;
  w.wd1 = DenseMat::filled(1, 1, 3.0);
  w.wd2 = DenseMat::filled(1, 1, 5.0);
  DenseMat z = DenseMat::filled(1, 1, 2.0);
  DenseMat o = decode_gcn(z, p1, w);
  CHECK(o(0, 0) == 2.0 * 3.0 * 5.0);

  w.wd1 = DenseMat::zeros(1, 1);
  w.wd2 = DenseMat::zeros(1, 1);
  CHECK(decode_gcn(z, p1, w)(0, 0) == 0.0);
}

TEST_CASE("decode_gcn: content variant produces n x m logits") {
  Rng rng(6);
  const int n = 7, m = 9, d = 3, h = 4;
  Propagator p = build_propagator(n, testutil::random_edges(n, 0.3, rng));
  DecoderWeights w;
  w.kind = DecoderKind::GcnContent;
  w.wd1 = random_mat(d, h, rng);
  w.wd2 = random_mat(h, m, rng);
  DenseMat o = decode_gcn(random_mat(n, d, rng), p, w);
  CHECK(o.rows == n);
  CHECK(o.cols == m);
}

TEST_CASE("structure_loss: perfect reconstruction limit approaches zero") {
  const int n = 4;
  auto edges = std::vector<std::pair<int, int>>{{0, 1}, {2, 3}};
  StructTarget tgt = StructTarget::build(n, edges);
  DenseMat logits(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) logits(i, j) = -40.0;
  for (int i = 0; i < n; ++i) logits(i, i) = 40.0;
  logits(0, 1) = logits(1, 0) = 40.0;
  logits(2, 3) = logits(3, 2) = 40.0;
  CHECK(structure_loss(logits, tgt) < 1e-12);
}

TEST_CASE("structure_loss: zero logits on a random graph match the loop oracle") {
  Rng rng(7);
  const int n = 5;
  auto edges = testutil::random_edges(n, 0.4, rng);
  if (edges.empty()) edges.emplace_back(0, 1);
  StructTarget tgt = StructTarget::build(n, edges);

  DenseMat logits(n, n);  // all zero
  // independent oracle: walk all n^2 entries with a dense target
  std::vector<std::vector<int>> dense_target(n, std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i) dense_target[i][i] = 1;
  for (auto [a, b] : edges) dense_target[a][b] = dense_target[b][a] = 1;
  double expected = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double l = logits(i, j);
      const double sp_pos = std::log1p(std::exp(-l));  // softplus(-l)
      const double sp_neg = std::log1p(std::exp(l));   // softplus(l)
      expected += dense_target[i][j] ? tgt.pos_weight * sp_pos : sp_neg;
    }
  }
  expected *= tgt.norm / (n * n);
  CHECK(structure_loss(logits, tgt) == doctest::Approx(expected).epsilon(1e-12));

  // same oracle against random logits
  DenseMat rnd = random_mat(n, n, rng);
  double expected2 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double l = rnd(i, j);
      expected2 += dense_target[i][j]
                       ? tgt.pos_weight * std::log1p(std::exp(-l))
                       : std::log1p(std::exp(l));
    }
  expected2 *= tgt.norm / (n * n);
  CHECK(structure_loss(rnd, tgt) == doctest::Approx(expected2).epsilon(1e-12));
}

TEST_CASE("content_loss: trivial values and loop oracle") {
  DenseMat x(2, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  DenseMat sharp(2, 2);
  sharp(0, 0) = 40.0;
  sharp(0, 1) = -40.0;
  sharp(1, 0) = -40.0;
  sharp(1, 1) = 40.0;
  CHECK(content_loss(sharp, x) < 1e-12);

  DenseMat zero(2, 2);
  CHECK(content_loss(zero, x) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(8);
  DenseMat o = random_mat(3, 4, rng);
  DenseMat xb = random_binary_mat(3, 4, rng);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      const double l = o(i, j);
      expected += xb(i, j) == 1.0 ? std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
    }
  expected /= 12.0;
  CHECK(content_loss(o, xb) == doctest::Approx(expected).epsilon(1e-12));

  DenseMat bad(2, 2);
  bad(0, 0) = 0.25;
  CHECK_THROWS_AS(content_loss(zero, bad), ContractError);
}

TEST_CASE("kl_loss: closed form values") {
  DenseMat mu0(1, 1), ls0(1, 1);
  CHECK(kl_loss(mu0, ls0) == 0.0);  // prior equals posterior

  DenseMat mu1 = DenseMat::filled(1, 1, 1.0);
  CHECK(kl_loss(mu1, ls0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kl_loss: Monte-Carlo cross-check at mu=1, sigma=1") {
  // KL(N(1,1) || N(0,1)) via sampling: E_q[log q - log p], z = 1 + eps
  Rng rng(9);
  double acc = 0.0;
  const int samples = 1000000;
  for (int s = 0; s < samples; ++s) {
    const double eps = rng.normal();
    const double z = 1.0 + eps;
    acc += -0.5 * eps * eps + 0.5 * z * z;
  }
  const double mc = acc / samples;
  DenseMat mu = DenseMat::filled(1, 1, 1.0);
  DenseMat ls(1, 1);
  CHECK(kl_loss(mu, ls) == doctest::Approx(mc).epsilon(1e-2));
}

TEST_CASE("kl_loss is nonnegative on 1000 random inputs") {
  Rng rng(10);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int d = 1 + static_cast<int>(rng.below(4));
    DenseMat mu = random_mat(n, d, rng, -3.0, 3.0);
    DenseMat ls = random_mat(n, d, rng, -3.0, 3.0);
    CHECK(kl_loss(mu, ls) >= 0.0);
  }
}

TEST_CASE("discriminate: zero weights give one half everywhere") {
  DiscriminatorWeights w;
  w.w1 = DenseMat::zeros(3, 4);
  w.b1 = DenseMat::zeros(1, 4);
  w.w2 = DenseMat::zeros(4, 5);
  w.b2 = DenseMat::zeros(1, 5);
  w.w3 = DenseMat::zeros(5, 1);
  w.b3 = DenseMat::zeros(1, 1);
  Rng rng(11);
  DenseMat probs = discriminate(random_mat(6, 3, rng), w);
  CHECK(probs.rows == 6);
  CHECK(probs.cols == 1);
  for (double v : probs.data) CHECK(v == 0.5);
}

TEST_CASE("discriminate: matches a layer-by-layer loop oracle and stays in (0,1)") {
  Rng rng(12);
  ModelDims dims;
  dims.n = 5;
  dims.m = 4;
  dims.embed = 3;
  dims.disc_h1 = 4;
  dims.disc_h2 = 6;
  ModelWeights mw = init_weights(Variant::Arga, dims, rng);
  DenseMat z = random_mat(5, 3, rng, -4.0, 4.0);
  DenseMat probs = discriminate(z, mw.disc);

  for (int i = 0; i < z.rows; ++i) {
    std::vector<double> h1(dims.disc_h1, 0.0), h2(dims.disc_h2, 0.0);
    for (int j = 0; j < dims.disc_h1; ++j) {
      double s = mw.disc.b1(0, j);
      for (int k = 0; k < 3; ++k) s += z(i, k) * mw.disc.w1(k, j);
      h1[j] = std::max(s, 0.0);
    }
    for (int j = 0; j < dims.disc_h2; ++j) {
      double s = mw.disc.b2(0, j);
      for (int k = 0; k < dims.disc_h1; ++k) s += h1[k] * mw.disc.w2(k, j);
      h2[j] = std::max(s, 0.0);
    }
    double logit = mw.disc.b3(0, 0);
    for (int k = 0; k < dims.disc_h2; ++k) logit += h2[k] * mw.disc.w3(k, 0);
    const double want = 1.0 / (1.0 + std::exp(-logit));
    CHECK(probs(i, 0) == doctest::Approx(want).epsilon(1e-12));
    CHECK(probs(i, 0) > 0.0);
    CHECK(probs(i, 0) < 1.0);
  }
}

TEST_CASE("adversarial losses: trivial, limit and oracle cases") {
  // probabilities 0.5 on both sides -> logit 0
  DenseMat zeros(4, 1);
  auto [disc0, gen0] = adversarial_losses_from_logits(zeros, zeros);
  CHECK(disc0 == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(gen0 == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  // perfect discriminator: D(real) -> 1, D(fake) -> 0
  DenseMat big = DenseMat::filled(4, 1, 40.0);
  DenseMat small = DenseMat::filled(4, 1, -40.0);
  auto [disc1, gen1] = adversarial_losses_from_logits(big, small);
  CHECK(disc1 < 1e-12);
  CHECK(gen1 > 10.0);

  Rng rng(13);
  DenseMat real = random_mat(8, 1, rng, -3.0, 3.0);
  DenseMat fake = random_mat(8, 1, rng, -3.0, 3.0);
  auto [disc, gen] = adversarial_losses_from_logits(real, fake);
  double disc_want = 0.0, gen_want = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double pr = 1.0 / (1.0 + std::exp(-real(i, 0)));
    const double pf = 1.0 / (1.0 + std::exp(-fake(i, 0)));
    disc_want += -0.5 * std::log(pr) - 0.5 * std::log(1.0 - pf);
    gen_want += -std::log(pf);
  }
  disc_want /= 8.0;
  gen_want /= 8.0;
  CHECK(disc == doctest::Approx(disc_want).epsilon(1e-12));
  CHECK(gen == doctest::Approx(gen_want).epsilon(1e-12));
}

TEST_CASE("loss positivity on random inputs") {
  Rng rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 3 + static_cast<int>(rng.below(4));
    auto edges = testutil::random_edges(n, 0.3, rng);
    if (edges.empty()) edges.emplace_back(0, 1);
    if (edges.size() == static_cast<std::size_t>(n) * (n - 1) / 2) edges.pop_back();
    StructTarget tgt = StructTarget::build(n, edges);
    CHECK(structure_loss(random_mat(n, n, rng), tgt) >= 0.0);
    DenseMat xb = random_binary_mat(n, 3, rng);
    CHECK(content_loss(random_mat(n, 3, rng), xb) >= 0.0);
    auto [d, g] = adversarial_losses_from_logits(random_mat(4, 1, rng),
                                                 random_mat(4, 1, rng));
    CHECK(d >= 0.0);
    CHECK(g >= 0.0);
  }
}

TEST_CASE("full model gradient checks on a 10-node random graph") {
  Rng rng(15);
  const int n = 10, m = 6;
  auto edges = testutil::random_edges(n, 0.3, rng);
  if (edges.empty()) edges.emplace_back(0, 1);
  Propagator prop = build_propagator(n, edges);
  StructTarget tgt = StructTarget::build(n, edges);
  DenseMat x = random_binary_mat(n, m, rng);

  ModelDims dims;
  dims.n = n;
  dims.m = m;
  dims.hidden = 4;
  dims.embed = 3;
  dims.dec_hidden = 3;
  dims.disc_h1 = 3;
  dims.disc_h2 = 4;

  SUBCASE("inner-product autoencoder loss") {
    ModelWeights w = init_weights(Variant::Arga, dims, rng);
    auto build = [&](Tape& t, const std::vector<Var>& p) {
      EncoderVars ev{p[0], p[1], {}};
      LatentVars lat = encode_on(t, prop, t.constant(x), ev, false, nullptr);
      return t.structure_loss_inner(lat.z, tgt);
    };
    CHECK(check_gradients(build, {{"w0", w.enc.w0}, {"w1", w.enc.w1}}, 1e-5, 1e-4)
              .pass);
  }

  SUBCASE("variational loss with KL") {
    ModelWeights w = init_weights(Variant::Arvga, dims, rng);
    DenseMat eps(n, dims.embed);
    for (double& v : eps.data) v = rng.normal();
    auto build = [&](Tape& t, const std::vector<Var>& p) {
      EncoderVars ev{p[0], p[1], p[2]};
      LatentVars lat = encode_on(t, prop, t.constant(x), ev, true, &eps);
      Var recon = t.structure_loss_inner(lat.z, tgt);
      return t.add(recon, t.kl_gaussian(lat.mu, lat.log_sigma));
    };
    CHECK(check_gradients(build,
                          {{"w0", w.enc.w0},
                           {"w1", w.enc.w1},
                           {"w1_sigma", w.enc.w1_sigma}},
                          1e-5, 1e-4)
              .pass);
  }

  SUBCASE("GCN structure decoder loss") {
    ModelWeights w = init_weights(Variant::ArgaGd, dims, rng);
    auto build = [&](Tape& t, const std::vector<Var>& p) {
      EncoderVars ev{p[0], p[1], {}};
      DecoderVars dv;
      dv.kind = DecoderKind::GcnStructure;
      dv.wd1 = p[2];
      dv.wd2 = p[3];
      LatentVars lat = encode_on(t, prop, t.constant(x), ev, false, nullptr);
      Var o = decode_gcn_on(t, lat.z, prop, dv);
      return t.structure_loss_logits(o, tgt);
    };
    CHECK(check_gradients(build,
                          {{"w0", w.enc.w0},
                           {"w1", w.enc.w1},
                           {"wd1", w.dec.wd1},
                           {"wd2", w.dec.wd2}},
                          1e-5, 1e-4)
              .pass);
  }

  SUBCASE("content decoder plus structure loss") {
    ModelWeights w = init_weights(Variant::ArgaAx, dims, rng);
    auto build = [&](Tape& t, const std::vector<Var>& p) {
      EncoderVars ev{p[0], p[1], {}};
      DecoderVars dv;
      dv.kind = DecoderKind::GcnContent;
      dv.wd1 = p[2];
      dv.wd2 = p[3];
      LatentVars lat = encode_on(t, prop, t.constant(x), ev, false, nullptr);
      Var o = decode_gcn_on(t, lat.z, prop, dv);
      Var recon = t.add(t.structure_loss_inner(lat.z, tgt),
                        t.bce_with_logits_mean(o, x));
      return recon;
    };
    CHECK(check_gradients(build,
                          {{"w0", w.enc.w0},
                           {"w1", w.enc.w1},
                           {"wd1", w.dec.wd1},
                           {"wd2", w.dec.wd2}},
                          1e-5, 1e-4)
              .pass);
  }

  SUBCASE("discriminator and generator losses") {
    ModelWeights w = init_weights(Variant::Arga, dims, rng);
    DenseMat real = random_mat(n, dims.embed, rng);
    DenseMat fake = random_mat(n, dims.embed, rng);

    // central differences are meaningless at a relu kink; nudge the biases
    // until every hidden pre-activation is bounded away from zero
    auto nudge_off_kinks = [&](DiscriminatorWeights& dw) {
      for (int pass = 0; pass < 100; ++pass) {
        bool clean = true;
        for (const DenseMat* in : {&real, &fake}) {
          DenseMat h1pre = dense_matmul(*in, dw.w1);
          for (int i = 0; i < h1pre.rows; ++i)
            for (int j = 0; j < h1pre.cols; ++j) {
              if (std::abs(h1pre(i, j) + dw.b1(0, j)) < 1e-3) {
                dw.b1(0, j) += 3e-3;
                clean = false;
              }
            }
          DenseMat h1(h1pre.rows, h1pre.cols);
          for (int i = 0; i < h1.rows; ++i)
            for (int j = 0; j < h1.cols; ++j)
              h1(i, j) = std::max(h1pre(i, j) + dw.b1(0, j), 0.0);
          DenseMat h2pre = dense_matmul(h1, dw.w2);
          for (int i = 0; i < h2pre.rows; ++i)
            for (int j = 0; j < h2pre.cols; ++j) {
              if (std::abs(h2pre(i, j) + dw.b2(0, j)) < 1e-3) {
                dw.b2(0, j) += 3e-3;
                clean = false;
              }
            }
        }
        if (clean) return;
      }
    };
    nudge_off_kinks(w.disc);

    auto build = [&](Tape& t, const std::vector<Var>& p) {
      DiscVars dv{p[0], p[1], p[2], p[3], p[4], p[5]};
      Var rl = discriminate_logits_on(t, t.constant(real), dv);
      Var fl = discriminate_logits_on(t, t.constant(fake), dv);
      return disc_loss_on(t, rl, fl);
    };
    CHECK(check_gradients(build,
                          {{"w1", w.disc.w1},
                           {"b1", w.disc.b1},
                           {"w2", w.disc.w2},
                           {"b2", w.disc.b2},
                           {"w3", w.disc.w3},
                           {"b3", w.disc.b3}},
                          1e-5, 1e-4)
              .pass);

    // generator: gradient flows through the encoder into a frozen critic
    ModelWeights w2 = init_weights(Variant::Arga, dims, rng);
    auto build_gen = [&](Tape& t, const std::vector<Var>& p) {
      EncoderVars ev{p[0], p[1], {}};
      LatentVars lat = encode_on(t, prop, t.constant(x), ev, false, nullptr);
      DiscVars dv = make_disc_vars(t, w2.disc, false);
      return gen_loss_on(t, discriminate_logits_on(t, lat.z, dv));
    };
    CHECK(check_gradients(build_gen, {{"w0", w2.enc.w0}, {"w1", w2.enc.w1}}, 1e-5,
                          1e-4)
              .pass);
  }
}

TEST_CASE("variant helpers") {
  CHECK(is_variational(Variant::Arvga));
  CHECK_FALSE(is_variational(Variant::ArgaAx));
  CHECK(decoder_kind(Variant::ArgaGd) == DecoderKind::GcnStructure);
  CHECK(decoder_kind(Variant::ArvgaAx) == DecoderKind::GcnContent);
  CHECK(parse_variant("arvga_gd") == Variant::ArvgaGd);
  CHECK(to_string(parse_variant("arga_ax")) == "arga_ax");
  CHECK_THROWS_AS(parse_variant("foo"), ContractError);
  CHECK(parse_prior("uniform") == Prior::Uniform);
  CHECK_THROWS_AS(parse_prior("laplace"), ContractError);
}

}  // TEST_SUITE
