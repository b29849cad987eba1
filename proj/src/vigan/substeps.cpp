// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/substeps.hpp"

namespace vigan {

namespace {

template <class T>
double value_of(const Var<T>& v) {
  return static_cast<double>(v.value().item());
}

}  // namespace

template <class T>
Var<T> encoder_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, LossReport& r) {
  Tape<T>& tape = f.tape();
  auto x = constant(tape, in.images);
  auto enc = encode(f, m, x);
  auto x_rec = generate(f, m, reparameterize(enc, constant(tape, in.eps)), constant(tape, in.attributes));
  auto l_prior = kl_prior(enc);
  auto l_recon = recon_feature_loss(critic_trunk(f, m, x), critic_trunk(f, m, x_rec));
  auto loss = compose_enc_loss(l_prior, l_recon);
  r.l_prior = value_of(l_prior);
  r.l_recon = value_of(l_recon);
  r.l_enc = value_of(loss);
  return loss;
}

template <class T>
Var<T> generator_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, const LossWeights& w,
                           LossReport& r) {
  Tape<T>& tape = f.tape();
  auto x = constant(tape, in.images);
  auto c = constant(tape, in.attributes);
  auto c_prior = constant(tape, in.prior_c);
  auto z_tilde = detach(reparameterize(encode(f, m, x), constant(tape, in.eps)));
  auto on_rec = critic(f, m, generate(f, m, z_tilde, c));
  auto on_gen = critic(f, m, generate(f, m, constant(tape, in.prior_z), c_prior));
  auto f_real = detach(critic_trunk(f, m, x));
  auto adv_rec = gen_adv_loss(on_rec.p_real);
  auto adv_gen = gen_adv_loss(on_gen.p_real);
  auto l_recon = recon_feature_loss(f_real, on_rec.features);
  auto loss = compose_gen_loss(adv_rec, recog_loss(c, on_rec.q), adv_gen, recog_loss(c_prior, on_gen.q), l_recon, w);
  r.l_gen_adv = value_of(adv_rec) + value_of(adv_gen);
  r.l_gen = value_of(loss);
  return loss;
}

template <class T>
Var<T> recognizer_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, LossReport& r,
                            SubstepTrace* trace) {
  Tape<T>& tape = f.tape();
  auto x = constant(tape, in.images);
  if (trace) trace->rec_real = x.shape()[0];
  auto q = recognizer_head(f, m, detach(critic_trunk(f, m, x)));
  auto loss = recog_loss(constant(tape, in.attributes), q);
  r.l_recog = value_of(loss);
  return loss;
}

template <class T>
Var<T> discriminator_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, LossReport& r,
                               SubstepTrace* trace) {
  Tape<T>& tape = f.tape();
  auto x = constant(tape, in.images);
  auto z_tilde = reparameterize(encode(f, m, x), constant(tape, in.eps));
  auto x_rec = detach(generate(f, m, z_tilde, constant(tape, in.attributes)));
  auto x_gen = detach(generate(f, m, constant(tape, in.prior_z), constant(tape, in.prior_c)));
  if (trace) {
    trace->dis_real = x.shape()[0];
    trace->dis_generated = x_gen.shape()[0];
    trace->dis_reconstructed = x_rec.shape()[0];
  }
  auto loss = dis_loss(discriminate(f, m, x).p_real, discriminate(f, m, x_gen).p_real,
                       discriminate(f, m, x_rec).p_real);
  r.l_dis = value_of(loss);
  return loss;
}

#define VIGAN_INSTANTIATE(T)                                                                                      \
  template Var<T> encoder_objective<T>(Forward<T>&, const Model&, const SubstepInputs<T>&, LossReport&);         \
  template Var<T> generator_objective<T>(Forward<T>&, const Model&, const SubstepInputs<T>&, const LossWeights&, \
                                         LossReport&);                                                           \
  template Var<T> recognizer_objective<T>(Forward<T>&, const Model&, const SubstepInputs<T>&, LossReport&,       \
                                          SubstepTrace*);                                                        \
  template Var<T> discriminator_objective<T>(Forward<T>&, const Model&, const SubstepInputs<T>&, LossReport&,    \
                                             SubstepTrace*);

VIGAN_INSTANTIATE(float)
VIGAN_INSTANTIATE(double)

#undef VIGAN_INSTANTIATE

}  // namespace vigan
