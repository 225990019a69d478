// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <random>

namespace sirsmfm {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); used to give every chain,
/// replicate and simulated region its own reproducible stream.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5173u};
  return Rng(seq);
}

inline double draw_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double draw_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Open interval (0,1); used for base-measure draws that must avoid 0.
inline double draw_open_unit(Rng& rng) {
  double u;
  do {
    u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  } while (u <= 0.0);
  return u;
}

/// InverseGamma(shape, rate) as 1 / Gamma(shape, scale = 1 / rate).
inline double draw_inverse_gamma(Rng& rng, double shape, double rate) {
  double g;
  do {
    g = std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
  } while (!(g > 0.0));
  return 1.0 / g;
}

}  // namespace sirsmfm
