#pragma once

#include <functional>

#include "g2/tape.hpp"

namespace g2 {

// Adversarial losses in the conditional-GAN form, both written as
// minimization objectives. D(.) is sigmoid of the patch logit map; means run
// over all patches and the batch. The 1e-12 log clamp (see Tape::log) keeps
// both finite at saturated discriminators.

// -mean(log sigmoid(logits)): the non-saturating generator objective.
Var generator_adv_loss(Tape& tape, const Var& d_logits_on_fake);

// mean(log(1 - sigmoid(real))) + mean(log sigmoid(fake)); minimizing drives
// D(real) -> 1 and D(fake) -> 0.
Var discriminator_adv_loss(Tape& tape, const Var& d_logits_real, const Var& d_logits_fake);

// mean absolute difference (L1)
Var pixel_loss(Tape& tape, const Var& generated, const Var& target);

// same contract as pixel_loss, applied to a source image and its
// reconstruction through both generators
Var cycle_loss(Tape& tape, const Var& original, const Var& reconstructed);

// feature extractor hook: maps a [B,C,H,W] image bundle to [B,D] features
using FeatureFn = std::function<Var(Tape&, const Var&)>;

// mean absolute difference of recognition features; the extractor is
// expected to be frozen (no watched parameters).
Var identity_loss(Tape& tape, const FeatureFn& extractor, const Var& original,
                  const Var& generated);

// adv + a1*pixel + a2*cycle + a3*identity
Var total_generator_loss(Tape& tape, const Var& adv, const Var& pixel, const Var& cycle,
                         const Var& identity, double alpha1, double alpha2, double alpha3);
double total_generator_loss(double adv, double pixel, double cycle, double identity,
                            double alpha1, double alpha2, double alpha3);

// Linear ramp for the identity-loss weight: `start` at iteration 0 up to
// `end` at knee_frac*total, constant afterwards. Throws if iteration is
// negative or exceeds total.
double alpha3_schedule(int64_t iteration, int64_t total, double start = 0.1, double end = 0.5,
                       double knee_frac = 0.8);

}  // namespace g2
