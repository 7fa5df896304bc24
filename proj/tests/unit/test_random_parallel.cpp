#include "ensemble_ols/parallel.hpp"
#include "ensemble_ols/random.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

using namespace ensemble_ols;

TEST_CASE("mt19937_64 engine matches the standard's 10000th output") {
  // [rand.predef]: the 10000th invocation of a default-constructed
  // mt19937_64 yields 9981545732273789042.
  RandomStream rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("derived streams are reproducible and distinct") {
  auto a = RandomStream::derive(42, StreamTag::Instance, 7);
  auto b = RandomStream::derive(42, StreamTag::Instance, 7);
  auto c = RandomStream::derive(42, StreamTag::Instance, 8);
  auto d = RandomStream::derive(42, StreamTag::Subsets, 7);
  auto e = RandomStream::derive(43, StreamTag::Instance, 7);
  const auto va = a.next_u64();
  CHECK(va == b.next_u64());
  CHECK(va != c.next_u64());
  CHECK(va != d.next_u64());
  CHECK(va != e.next_u64());
}

TEST_CASE("uniform lies in [0, 1) with the right mean") {
  RandomStream rng(1);
  double sum = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / N - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / N));
}

TEST_CASE("normal draws have unit variance and light tails") {
  RandomStream rng(2);
  const int N = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  CHECK(std::abs(s1 / N) < 5.0 / std::sqrt(N));
  CHECK(std::abs(s2 / N - 1.0) < 5.0 * std::sqrt(2.0 / N));
  CHECK(std::abs(s4 / N - 3.0) < 5.0 * std::sqrt(96.0 / N));
}

TEST_CASE("below is unbiased over a non power of two range") {
  RandomStream rng(3);
  std::vector<int> counts(7, 0);
  const int N = 70000;
  for (int i = 0; i < N; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 5.0 * std::sqrt(10000.0 * 6.0 / 7.0));
}

TEST_CASE("fill_normal consumes the stream in storage order") {
  RandomStream a(11), b(11);
  Eigen::MatrixXd M(3, 2);
  a.fill_normal(M);
  for (Eigen::Index j = 0; j < 2; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(M(i, j) == b.normal());
}

TEST_CASE("parallel_for visits every index once for any thread count") {
  for (unsigned threads : {1u, 2u, 5u, 0u}) {
    std::vector<std::atomic<int>> hits(103);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  for (unsigned threads : {1u, 3u}) {
    try {
      parallel_for(50, threads, [](std::size_t i) {
        if (i == 17 || i == 31) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "17");
    }
  }
}

TEST_CASE("resolve_threads maps 0 to at least one worker") {
  CHECK(resolve_threads(0) >= 1);
  CHECK(resolve_threads(3) == 3);
}

TEST_CASE("pairwise_sum is accurate and order-deterministic") {
  std::vector<double> xs(100001);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 1.0 / static_cast<double>(i + 1);
  long double ref = 0.0L;
  for (double x : xs) ref += x;
  CHECK(std::abs(pairwise_sum(xs) - static_cast<double>(ref)) < 1e-12);
  CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
  const double once = pairwise_sum(xs);
  CHECK(pairwise_sum(xs) == once);
}
