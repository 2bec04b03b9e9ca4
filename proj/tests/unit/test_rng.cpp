#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "mfchaos/rng/philox.hpp"
#include "mfchaos/util/parallel.hpp"

using namespace mfchaos;

TEST_CASE("Philox4x32-10 known answers") {
  using rng::Counter;
  CHECK(rng::philox4x32({0, 0, 0, 0}, {0, 0}) == Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(rng::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(rng::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniforms stay inside the open unit interval") {
  CHECK(rng::to_open_unit(0, 0) > 0.0);
  CHECK(rng::to_open_unit(0xffffffff, 0xffffffff) < 1.0);
}

TEST_CASE("normal increments have the right moments") {
  rng::NoisePlan plan(42);
  const double dt = 0.01;
  double s1 = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (std::uint64_t step = 0; step < 200; ++step) {
    const auto inc = plan.increments(100, 2, step, dt);
    for (double v : inc) {
      s1 += v;
      s2 += v * v;
      ++n;
    }
  }
  const double mean = s1 / n, var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 5.0 * std::sqrt(dt / n));
  CHECK(var == doctest::Approx(dt).epsilon(0.02));
}

TEST_CASE("increments are addressable and order-free") {
  rng::NoisePlan plan(7);
  const auto all = plan.increments(5, 3, 11, 0.1);
  std::vector<double> one(3);
  plan.increment(3, 11, 0.1, one);
  for (int k = 0; k < 3; ++k) CHECK(one[k] == all[9 + k]);
}

TEST_CASE("index maps permute particles and forks decorrelate") {
  rng::NoisePlan plan(9);
  const auto mapped = plan.with_index_map({2, 0, 1});
  std::vector<double> a(1), b(1);
  mapped.increment(0, 4, 1.0, a);
  plan.increment(2, 4, 1.0, b);
  CHECK(a[0] == b[0]);
  const auto f1 = plan.fork(1), f2 = plan.fork(2);
  CHECK(f1.seed() != f2.seed());
  f1.increment(0, 0, 1.0, a);
  f2.increment(0, 0, 1.0, b);
  CHECK(a[0] != b[0]);
  CHECK(plan.fork(1).seed() == f1.seed());
}

TEST_CASE("thread pool covers every index exactly once") {
  for (std::size_t threads : {1u, 3u, 8u}) {
    ThreadPool pool(threads);
    std::vector<int> hits(1001, 0);
    pool.parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) hits[i]++;
    });
    for (int h : hits) CHECK(h == 1);
  }
  ThreadPool pool(4);
  CHECK_THROWS(pool.parallel_for(10, [](std::size_t, std::size_t) { throw std::runtime_error("x"); }));
  CHECK(parse_thread_count("3") == 3);
  CHECK(parse_thread_count("auto") >= 1);
  CHECK_THROWS(parse_thread_count("zero"));
}
