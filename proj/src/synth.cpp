#include <random>

#include "invbag/io.hpp"
#include "invbag/random.hpp"

namespace invbag {

SyntheticSpec SyntheticSpec::uniform_shift(Index d, double delta, std::uint64_t seed) {
  if (d < 1) throw InvalidInput("synthetic sample needs at least one feature");
  return SyntheticSpec{Eigen::VectorXd::Constant(d, delta), seed};
}

SyntheticSample generate_synthetic(const SyntheticSpec& spec, Index n_background,
                                   Index n_signal) {
  const Index d = spec.n_features();
  if (d < 1) throw InvalidInput("generate_synthetic: need at least one feature");
  if (n_background < 1) throw InvalidInput("generate_synthetic: need background events");
  if (n_signal < 0) throw InvalidInput("generate_synthetic: negative signal count");
  if (!spec.shift.allFinite()) throw InvalidInput("generate_synthetic: non-finite shift");

  // Separate streams keep the background identical whatever n_signal is.
  std::mt19937_64 bg_rng(mix_seed(spec.seed, 1));
  std::mt19937_64 sig_rng(mix_seed(spec.seed, 2));
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticSample s;
  s.background.resize(n_background, d);
  for (Index i = 0; i < n_background; ++i) {
    for (Index k = 0; k < d; ++k) s.background(i, k) = normal(bg_rng);
  }
  normal.reset();
  s.signal.resize(n_signal, d);
  for (Index i = 0; i < n_signal; ++i) {
    for (Index k = 0; k < d; ++k) s.signal(i, k) = spec.shift(k) + normal(sig_rng);
  }
  return s;
}

}  // namespace invbag
