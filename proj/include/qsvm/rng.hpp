#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>

namespace qsvm {

// Counter-based pseudo-random streams. A stream is (key, counter); output i is
// a strong 64-bit mix of key + i*golden. Streams derived from distinct
// (seed, path) tuples are independent for Monte-Carlo purposes, and a stream's
// output depends only on its key and counter, never on global state. This is
// what makes every run reproducible at any thread count: each unit of work
// owns a stream derived from the master seed and a named path.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// FNV-1a, used to turn short label strings into path words at compile time.
constexpr std::uint64_t tag(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (; *s; ++s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*s));
    h *= 0x100000001B3ULL;
  }
  return h;
}

struct Stream {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  std::uint64_t next_u64() {
    ++counter;
    return mix64(key + counter * kGolden);
  }

  // 53-bit mantissa uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // unbiased uniform draw from {0, ..., m-1}
  std::uint64_t next_below(std::uint64_t m) {
    if (m == 0) throw std::invalid_argument("next_below: m must be positive");
    const std::uint64_t threshold = -m % m;  // 2^64 mod m
    for (;;) {
      std::uint64_t u = next_u64();
      if (u >= threshold) return u % m;
    }
  }

  // standard normal via Box-Muller; consumes exactly two uniforms
  double next_normal() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }
};

inline std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t k = mix64(seed + kGolden);
  for (std::uint64_t w : path) k = mix64(k ^ mix64(w + kGolden));
  return k;
}

inline Stream substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Stream{derive_key(seed, path), 0};
}

namespace detail {

// Inverted-CDF search; valid while n*min(p,1-p) is small enough that
// (1-p)^n does not underflow (callers guarantee <= 30).
inline double binomial_inversion(double n, double p, Stream& rng) {
  const double q = 1.0 - p;
  const double s = p / q;
  const double a = (n + 1.0) * s;
  const double qn = std::exp(n * std::log(q));
  const double bound = std::min(n, 110.0);
  for (;;) {
    double r = qn;
    double u = rng.next_double();
    double x = 0.0;
    while (u > r) {
      u -= r;
      x += 1.0;
      if (x > bound) break;  // numerical tail guard; restart
      r *= (a / x - s);
    }
    if (x <= bound) return x;
  }
}

// BTPE rejection sampler (Kachitvichyanukul & Schmeiser 1988) for
// n*min(p,1-p) >= 30. Counts are carried in doubles so shot numbers far
// beyond 2^32 work; the acceptance test is exact up to floating-point
// rounding of the log-pmf.
inline double binomial_btpe(double n, double p, Stream& rng) {
  const double r = p;  // caller passes r = min(p, 1-p)
  const double q = 1.0 - r;
  const double fm = n * r + r;
  const double m = std::floor(fm);
  const double nrq = n * r * q;
  const double p1 = std::floor(2.195 * std::sqrt(nrq) - 4.6 * q) + 0.5;
  const double xm = m + 0.5;
  const double xl = xm - p1;
  const double xr = xm + p1;
  const double c = 0.134 + 20.5 / (15.3 + m);
  double al = (fm - xl) / (fm - xl * r);
  const double laml = al * (1.0 + 0.5 * al);
  al = (xr - fm) / (xr * q);
  const double lamr = al * (1.0 + 0.5 * al);
  const double p2 = p1 * (1.0 + 2.0 * c);
  const double p3 = p2 + c / laml;
  const double p4 = p3 + c / lamr;

  double y = 0.0;
  for (;;) {
    double u = rng.next_double() * p4;
    double v = rng.next_double();
    if (u <= p1) {  // triangular central region
      y = std::floor(xm - p1 * v + u);
      break;
    }
    if (u <= p2) {  // parallelogram
      const double x = xl + (u - p1) / c;
      v = v * c + 1.0 - std::fabs(m - x + 0.5) / p1;
      if (v > 1.0) continue;
      y = std::floor(x);
    } else if (u <= p3) {  // left exponential tail
      y = std::floor(xl + std::log(v) / laml);
      if (y < 0.0) continue;
      v = v * (u - p2) * laml;
    } else {  // right exponential tail
      y = std::floor(xr - std::log(v) / lamr);
      if (y > n) continue;
      v = v * (u - p3) * lamr;
    }

    const double k = std::fabs(y - m);
    if (k <= 20.0 || k >= nrq / 2.0 - 1.0) {
      // explicit pmf-ratio product
      const double s = r / q;
      const double aa = s * (n + 1.0);
      double big_f = 1.0;
      if (m < y) {
        for (double i = m + 1.0; i <= y; i += 1.0) big_f *= (aa / i - s);
      } else if (m > y) {
        for (double i = y + 1.0; i <= m; i += 1.0) big_f /= (aa / i - s);
      }
      if (v <= big_f) break;
      continue;
    }

    // squeeze around the log-pmf, then the full Stirling-corrected test
    const double rho =
        (k / nrq) * ((k * (k / 3.0 + 0.625) + 1.0 / 6.0) / nrq + 0.5);
    const double t = -k * k / (2.0 * nrq);
    const double big_a = std::log(v);
    if (big_a < t - rho) break;
    if (big_a > t + rho) continue;

    const double x1 = y + 1.0;
    const double f1 = m + 1.0;
    const double z = n + 1.0 - m;
    const double w = n - y + 1.0;
    const double z2 = z * z;
    const double x2 = x1 * x1;
    const double f2 = f1 * f1;
    const double w2 = w * w;
    const double rhs =
        xm * std::log(f1 / x1) + (n - m + 0.5) * std::log(z / w) +
        (y - m) * std::log(w * r / (x1 * q)) +
        (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / f2) / f2) / f2) / f2) / f1 / 166320.0 +
        (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / z2) / z2) / z2) / z2) / z / 166320.0 +
        (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / x2) / x2) / x2) / x2) / x1 / 166320.0 +
        (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / w2) / w2) / w2) / w2) / w / 166320.0;
    if (big_a <= rhs) break;
  }
  return y;
}

}  // namespace detail

// Draw from Binomial(n, p). Returns the count as a double (integral value);
// n may exceed 2^53, in which case the count is exact to double resolution,
// which is far below the binomial standard deviation for such n.
inline double binomial_draw(double n, double p, Stream& rng) {
  if (!(n >= 0.0) || std::isnan(p)) throw std::invalid_argument("binomial_draw: bad arguments");
  if (n == 0.0 || p <= 0.0) return 0.0;
  if (p >= 1.0) return n;
  const double r = std::min(p, 1.0 - p);
  double y;
  if (n * r <= 30.0)
    y = detail::binomial_inversion(n, r, rng);
  else
    y = detail::binomial_btpe(n, r, rng);
  return (p > 0.5) ? n - y : y;
}

}  // namespace qsvm
