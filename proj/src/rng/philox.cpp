#include "mfchaos/rng/philox.hpp"

#include <cmath>
#include <numbers>

namespace mfchaos::rng {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

Key key_from(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

std::array<double, 2> box_muller(double u1, double u2) {
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace

Counter philox4x32(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag + 0x632BE59BD9B4E019ull));
}

double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  // 52 bits so that bits + 0.5 is exact and the result never rounds to 1.
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t stream)
    : key_(key_from(seed)),
      stream_lo_(static_cast<std::uint32_t>(stream)),
      stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

std::array<double, 2> CounterStream::uniforms(std::uint64_t position) const {
  const Counter out = philox4x32({static_cast<std::uint32_t>(position),
                                  static_cast<std::uint32_t>(position >> 32), stream_lo_,
                                  stream_hi_},
                                 key_);
  return {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
}

std::array<double, 2> CounterStream::normals(std::uint64_t position) const {
  const auto u = uniforms(position);
  return box_muller(u[0], u[1]);
}

NoisePlan::NoisePlan(std::uint64_t master_seed) : seed_(master_seed), key_(key_from(master_seed)) {}

void NoisePlan::increment(std::size_t particle, std::uint64_t step, double dt,
                          std::span<double> out) const {
  const std::size_t stream = index_map_.empty() ? particle : index_map_.at(particle);
  const double scale = std::sqrt(dt);
  // Counter layout: (block, step lo, step hi, particle). One block yields two
  // normals.
  for (std::size_t k = 0; k < out.size(); k += 2) {
    const Counter c = philox4x32({static_cast<std::uint32_t>(k / 2), static_cast<std::uint32_t>(step),
                                  static_cast<std::uint32_t>(step >> 32),
                                  static_cast<std::uint32_t>(stream)},
                                 key_);
    const auto z = box_muller(to_open_unit(c[0], c[1]), to_open_unit(c[2], c[3]));
    out[k] = scale * z[0];
    if (k + 1 < out.size()) out[k + 1] = scale * z[1];
  }
}

std::vector<double> NoisePlan::increments(std::size_t n_particles, std::size_t noise_dim,
                                          std::uint64_t step, double dt) const {
  std::vector<double> out(n_particles * noise_dim);
  for (std::size_t i = 0; i < n_particles; ++i) {
    increment(i, step, dt, std::span<double>(out).subspan(i * noise_dim, noise_dim));
  }
  return out;
}

NoisePlan NoisePlan::with_index_map(std::vector<std::size_t> map) const {
  NoisePlan p = *this;
  p.index_map_ = std::move(map);
  return p;
}

NoisePlan NoisePlan::fork(std::uint64_t tag) const { return NoisePlan(derive_seed(seed_, tag)); }

}  // namespace mfchaos::rng
