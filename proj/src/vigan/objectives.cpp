// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/objectives.hpp"

#include <cmath>
#include <sstream>

namespace vigan {

namespace {

template <class T>
double batch_of(const Var<T>& x) {
  if (x.shape().empty()) throw ShapeError("loss input has no batch axis");
  return static_cast<double>(x.shape()[0]);
}

// 1 - x
template <class T>
Var<T> one_minus(const Var<T>& x) {
  return add_scalar(scale(x, -1.0), 1.0);
}

}  // namespace

void LossWeights::validate() const {
  if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || lambda1 < 0 || lambda2 < 0)
    throw std::invalid_argument("loss weights must be finite and non-negative");
}

bool LossReport::all_finite() const {
  for (double v : {l_prior, l_recon, l_recog, l_gen_adv, l_dis, l_enc, l_gen})
    if (!std::isfinite(v)) return false;
  return true;
}

std::string LossReport::describe() const {
  std::ostringstream os;
  os.precision(9);
  os << "l_prior=" << l_prior << " l_recon=" << l_recon << " l_recog=" << l_recog << " l_gen_adv=" << l_gen_adv
     << " l_dis=" << l_dis << " l_enc=" << l_enc << " l_gen=" << l_gen;
  return os.str();
}

template <class T>
Var<T> kl_prior(const EncoderOutput<T>& out) {
  const auto& mu = out.mu;
  const auto& lv = out.logvar;
  // mu^2 + exp(lv) - 1 - lv
  Var<T> terms = sub(add_scalar(add(square(mu), exp(lv)), -1.0), lv);
  return scale(sum(terms), 0.5 / batch_of(mu));
}

template <class T>
Var<T> recon_feature_loss(const Var<T>& f_real, const Var<T>& f_rec) {
  if (f_real.shape() != f_rec.shape())
    throw ShapeError("recon_feature_loss: feature shapes " + to_string(f_real.shape()) + " and " +
                     to_string(f_rec.shape()) + " differ");
  return scale(mean(square(sub(detach(f_real), f_rec))), 0.5);
}

template <class T>
Var<T> recog_loss(const Var<T>& c_true, const Var<T>& q_raw) {
  Var<T> c = detach(c_true);
  Var<T> q = clamp(q_raw, kProbEps, 1.0 - kProbEps);
  Var<T> ll = add(mul(c, log(q)), mul(one_minus(c), log(one_minus(q))));
  return scale(sum(ll), -1.0 / batch_of(q));
}

template <class T>
Var<T> gen_adv_loss(const Var<T>& p_fake) {
  return scale(mean(log(p_fake)), -1.0);
}

template <class T>
Var<T> dis_loss(const Var<T>& p_real, const Var<T>& p_fake_gen, const Var<T>& p_fake_rec) {
  Var<T> real = scale(mean(log(p_real)), -1.0);
  Var<T> gen = scale(mean(log(one_minus(p_fake_gen))), -1.0);
  Var<T> rec = scale(mean(log(one_minus(p_fake_rec))), -1.0);
  return add(add(real, gen), rec);
}

template <class T>
Var<T> compose_enc_loss(const Var<T>& l_prior, const Var<T>& l_recon) {
  return add(l_prior, l_recon);
}

template <class T>
Var<T> compose_gen_loss(const Var<T>& adv_rec, const Var<T>& recog_rec, const Var<T>& adv_gen,
                        const Var<T>& recog_gen, const Var<T>& l_recon, const LossWeights& w) {
  w.validate();
  Var<T> rec_path = add(adv_rec, scale(recog_rec, w.lambda2));
  Var<T> gen_path = add(adv_gen, scale(recog_gen, w.lambda2));
  return add(add(rec_path, gen_path), scale(l_recon, w.lambda1));
}

#define VIGAN_INSTANTIATE(T)                                                                                \
  template Var<T> kl_prior<T>(const EncoderOutput<T>&);                                                    \
  template Var<T> recon_feature_loss<T>(const Var<T>&, const Var<T>&);                                     \
  template Var<T> recog_loss<T>(const Var<T>&, const Var<T>&);                                             \
  template Var<T> gen_adv_loss<T>(const Var<T>&);                                                          \
  template Var<T> dis_loss<T>(const Var<T>&, const Var<T>&, const Var<T>&);                                \
  template Var<T> compose_enc_loss<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> compose_gen_loss<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,          \
                                      const Var<T>&, const LossWeights&);

VIGAN_INSTANTIATE(float)
VIGAN_INSTANTIATE(double)

#undef VIGAN_INSTANTIATE

}  // namespace vigan
