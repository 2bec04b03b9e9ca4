#pragma once

// Counter-based generator (Philox4x32-10, Salmon et al., SC'11) and the noise
// plan that maps (seed, particle, step) to Brownian increments.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mfchaos::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

// One Philox4x32 block with ten rounds.
Counter philox4x32(Counter ctr, Key key);

// splitmix64 finaliser; used to derive independent seeds from (seed, tag).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

// Uniform in (0, 1) with 52 random bits; never returns 0 or 1.
double to_open_unit(std::uint32_t hi, std::uint32_t lo);

// Stateless stream of doubles indexed by a 64-bit position. Handy for
// Monte Carlo loops that must not depend on evaluation order.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream);

  // Two uniforms per block position.
  std::array<double, 2> uniforms(std::uint64_t position) const;
  // Two independent N(0,1) draws (Box-Muller) per block position.
  std::array<double, 2> normals(std::uint64_t position) const;

 private:
  Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
};

// Brownian increments for the particle systems. The increment of particle i at
// step s is a pure function of (seed, stream index of i, s): evaluation order
// and thread count do not matter. Two systems reading the same plan are
// synchronously coupled.
class NoisePlan {
 public:
  explicit NoisePlan(std::uint64_t master_seed);

  std::uint64_t seed() const { return seed_; }

  // Fills `out` with out.size() i.i.d. N(0, dt) values for (i, step).
  void increment(std::size_t particle, std::uint64_t step, double dt, std::span<double> out) const;

  // N x n row-major block of increments for all particles at one step.
  std::vector<double> increments(std::size_t n_particles, std::size_t noise_dim,
                                 std::uint64_t step, double dt) const;

  // Particle i reads substream map[i] instead of i. Used to permute particles
  // together with their noise.
  NoisePlan with_index_map(std::vector<std::size_t> map) const;

  // An independent plan, e.g. for a reference ensemble or replica r.
  NoisePlan fork(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  Key key_;
  std::vector<std::size_t> index_map_;
};

}  // namespace mfchaos::rng
