#include "g2/losses.hpp"

#include <stdexcept>

namespace g2 {

Var generator_adv_loss(Tape& tape, const Var& d_logits_on_fake) {
  Var p = tape.sigmoid(d_logits_on_fake);
  return tape.scalar_mul(tape.mean(tape.log(p)), -1.0);
}

Var discriminator_adv_loss(Tape& tape, const Var& d_logits_real, const Var& d_logits_fake) {
  Var p_real = tape.sigmoid(d_logits_real);
  Var one_minus = tape.scalar_add(tape.scalar_mul(p_real, -1.0), 1.0);
  Var real_term = tape.mean(tape.log(one_minus));
  Var fake_term = tape.mean(tape.log(tape.sigmoid(d_logits_fake)));
  return tape.add(real_term, fake_term);
}

Var pixel_loss(Tape& tape, const Var& generated, const Var& target) {
  return tape.abs_mean(tape.sub(generated, target));
}

Var cycle_loss(Tape& tape, const Var& original, const Var& reconstructed) {
  return tape.abs_mean(tape.sub(original, reconstructed));
}

Var identity_loss(Tape& tape, const FeatureFn& extractor, const Var& original,
                  const Var& generated) {
  Var f_orig = extractor(tape, original);
  Var f_gen = extractor(tape, generated);
  return tape.abs_mean(tape.sub(f_orig, f_gen));
}

Var total_generator_loss(Tape& tape, const Var& adv, const Var& pixel, const Var& cycle,
                         const Var& identity, double alpha1, double alpha2, double alpha3) {
  if (alpha1 < 0.0 || alpha2 < 0.0 || alpha3 < 0.0) {
    throw std::invalid_argument("total_generator_loss: weights must be >= 0");
  }
  Var total = tape.add(adv, tape.scalar_mul(pixel, alpha1));
  total = tape.add(total, tape.scalar_mul(cycle, alpha2));
  return tape.add(total, tape.scalar_mul(identity, alpha3));
}

double total_generator_loss(double adv, double pixel, double cycle, double identity,
                            double alpha1, double alpha2, double alpha3) {
  if (alpha1 < 0.0 || alpha2 < 0.0 || alpha3 < 0.0) {
    throw std::invalid_argument("total_generator_loss: weights must be >= 0");
  }
  return adv + alpha1 * pixel + alpha2 * cycle + alpha3 * identity;
}

double alpha3_schedule(int64_t iteration, int64_t total, double start, double end,
                       double knee_frac) {
  if (total < 1) throw std::invalid_argument("alpha3_schedule: total must be >= 1");
  if (iteration < 0 || iteration > total) {
    throw std::invalid_argument("alpha3_schedule: iteration out of [0, total]");
  }
  const double knee = knee_frac * static_cast<double>(total);
  if (knee <= 0.0 || static_cast<double>(iteration) >= knee) return end;
  return start + (end - start) * (static_cast<double>(iteration) / knee);
}

}  // namespace g2
