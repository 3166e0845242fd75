#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "henonlab/parallel.hpp"
#include "henonlab/rng.hpp"
#include "henonlab/types.hpp"

namespace henon {

bool Point2C::finite() const {
  return std::isfinite(z1.real()) && std::isfinite(z1.imag()) && std::isfinite(z2.real()) &&
         std::isfinite(z2.imag());
}

Point2C operator-(const Point2C& a, const Point2C& b) { return {a.z1 - b.z1, a.z2 - b.z2}; }
Point2C operator+(const Point2C& a, const Point2C& b) { return {a.z1 + b.z1, a.z2 + b.z2}; }

namespace {
std::atomic<unsigned> g_threads{0};

constexpr std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

void set_thread_count(unsigned n) { g_threads = n; }

unsigned thread_count() {
  unsigned n = g_threads.load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), nchunks));
  auto run = [&](std::size_t c) { body(c, c * chunk, std::min(n, (c + 1) * chunk)); };
  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) run(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = next++; c < nchunks; c = next++) run(c);
      } catch (...) {
        errors[w] = std::current_exception();
        next = nchunks;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  parallel_chunks(n, std::max<std::size_t>(1, n / (8 * thread_count()) + 1),
                  [&](std::size_t, std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) body(i);
                  });
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return splitmix(splitmix(seed_ ^ splitmix(stream_)) ^ counter);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

int CounterRng::poisson1(std::uint64_t counter) const {
  // Inverse CDF; P(k > 20) is below 1e-19.
  double u = uniform(counter);
  double p = std::exp(-1.0);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 20) {
    ++k;
    p /= k;
    cdf += p;
  }
  return k;
}

CounterRng CounterRng::split(std::uint64_t sub) const { return CounterRng(splitmix(seed_ + 0x632be59bd9b4e019ULL * (stream_ + 1)), sub); }

}  // namespace henon
