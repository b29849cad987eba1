// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// Loss terms and the four minimized objectives. Every function takes tape
// variables and returns a scalar variable, so each term is differentiable.
// Batch reductions are means; attribute and latent axes are summed.

#pragma once

#include "vigan/model.hpp"

namespace vigan {

struct LossWeights {
  double lambda1 = 1.0;  // feature reconstruction, generator objective only
  double lambda2 = 1.0;  // recognition of generated and reconstructed images

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossReport {
  double l_prior = 0;
  double l_recon = 0;
  double l_recog = 0;
  double l_gen_adv = 0;
  double l_dis = 0;
  double l_enc = 0;
  double l_gen = 0;

  bool all_finite() const;
  std::string describe() const;
};

/// KL(N(mu, exp(logvar)) || N(0, I)), summed over latent dims, batch mean.
template <class T>
Var<T> kl_prior(const EncoderOutput<T>& out);

/// 0.5 * mean((f_real - f_rec)^2) with f_real treated as a constant.
template <class T>
Var<T> recon_feature_loss(const Var<T>& f_real, const Var<T>& f_rec);

/// Bernoulli negative log-likelihood of c under q, summed over attributes,
/// batch mean. c is data; q is clamped to [kProbEps, 1 - kProbEps] first.
template <class T>
Var<T> recog_loss(const Var<T>& c_true, const Var<T>& q);

/// mean(-log D(fake))
template <class T>
Var<T> gen_adv_loss(const Var<T>& p_fake);

/// mean(-log D(x)) + mean(-log(1 - D(G(z, c)))) + mean(-log(1 - D(G(z~, c))))
template <class T>
Var<T> dis_loss(const Var<T>& p_real, const Var<T>& p_fake_gen, const Var<T>& p_fake_rec);

template <class T>
Var<T> compose_enc_loss(const Var<T>& l_prior, const Var<T>& l_recon);

/// (adv_rec + l2 * recog_rec) + (adv_gen + l2 * recog_gen) + l1 * l_recon
template <class T>
Var<T> compose_gen_loss(const Var<T>& adv_rec, const Var<T>& recog_rec, const Var<T>& adv_gen,
                        const Var<T>& recog_gen, const Var<T>& l_recon, const LossWeights& w);

}  // namespace vigan
