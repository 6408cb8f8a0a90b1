#ifndef AVFLOW_COMMON_HPP
#define AVFLOW_COMMON_HPP

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace avflow {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------- errors

/// Bad user input (files, config, parameters). CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (solver divergence, NaN fields). CLI maps this to exit code 1.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------- vec3

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  if (n == 0.0) throw NumericalError("cannot normalize zero vector");
  return a / n;
}

// ---------------------------------------------------------------- reductions
//
// Blocked summations with a fixed combine order. Per-block partial sums may be
// computed by any worker, but blocks are always combined sequentially in index
// order, so the result is bit-identical regardless of thread count.

inline constexpr std::size_t kReduceBlock = 1024;

inline double blocked_dot(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double total = 0.0;
  for (std::size_t base = 0; base < n; base += kReduceBlock) {
    const std::size_t end = std::min(n, base + kReduceBlock);
    double part = 0.0;
    for (std::size_t i = base; i < end; ++i) part += a[i] * b[i];
    total += part;
  }
  return total;
}

inline double blocked_norm2(const std::vector<double>& a) { return std::sqrt(blocked_dot(a, a)); }

// ---------------------------------------------------------------- parallel_for
//
// Chunked element-range parallelism. Work is split into fixed chunks handed to
// std::thread workers; any state written by chunks must be disjoint (the caller
// merges in fixed order afterwards). threads <= 1 runs inline.

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 1 || n < 2048) {
    body(0, n);
    return;
  }
  const std::size_t nchunks = static_cast<std::size_t>(threads);
  const std::size_t chunk = (n + nchunks - 1) / nchunks;
  std::vector<std::thread> pool;
  pool.reserve(nchunks);
  for (std::size_t c = 0; c < nchunks; ++c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------- formatting

/// Locale-independent float to string with the given significant digits.
inline std::string format_sig(double v, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

/// Shortest representation that round-trips exactly.
inline std::string format_shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- hashing

/// FNV-1a 64-bit, used for config hashes and checkpoint integrity checks.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace avflow

#endif  // AVFLOW_COMMON_HPP
