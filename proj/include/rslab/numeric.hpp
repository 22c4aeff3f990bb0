#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace rslab {

using cd = std::complex<double>;

// splitmix64 (Steele, Lea, Flood 2014). Used both as a stream and as a key mixer.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // Uniform on [0,1) from the top 53 bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    // Uniform on (0,1].
    double uniform_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }
    // Standard normal via Box-Muller; no std distributions so values are platform-stable.
    double normal() {
        double u1 = uniform_pos(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    cd complex_normal() { return {normal() * std::numbers::sqrt2 / 2, normal() * std::numbers::sqrt2 / 2}; }

private:
    std::uint64_t state_;
};

// Derives an independent stream seed from a tuple of keys.
inline std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto k : keys) h = splitmix64_mix(h ^ splitmix64_mix(k));
    return h;
}

template <class T>
class Kahan {
public:
    void add(T x) {
        T y = x - c_;
        T t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    T value() const { return s_; }

private:
    T s_{};
    T c_{};
};

// exp(2 pi i j / ord), exact at multiples of a quarter turn.
inline cd root_of_unity(std::int64_t j, std::int64_t ord) {
    j %= ord;
    if (j < 0) j += ord;
    if ((4 * j) % ord == 0) {
        switch ((4 * j) / ord) {
            case 0: return {1, 0};
            case 1: return {0, 1};
            case 2: return {-1, 0};
            default: return {0, -1};
        }
    }
    return std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(ord));
}

// z^k by binary powering; cpow(0, 0) = 1.
inline cd cpow(cd z, int k) {
    cd r = 1;
    while (k > 0) {
        if (k & 1) r *= z;
        z *= z;
        k >>= 1;
    }
    return r;
}

inline std::vector<std::uint64_t> primes_up_to(std::uint64_t n) {
    std::vector<std::uint64_t> out;
    if (n < 2) return out;
    std::vector<bool> comp(n + 1, false);
    for (std::uint64_t i = 2; i <= n; ++i) {
        if (comp[i]) continue;
        out.push_back(i);
        for (std::uint64_t j = i * i; j <= n; j += i) comp[j] = true;
    }
    return out;
}

inline bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

// Trial-division factorization as (p, e) pairs with p ascending.
inline std::vector<std::pair<std::uint64_t, int>> factor_integer(std::uint64_t n) {
    std::vector<std::pair<std::uint64_t, int>> f;
    for (std::uint64_t p = 2; p * p <= n; ++p) {
        if (n % p) continue;
        int e = 0;
        while (n % p == 0) n /= p, ++e;
        f.emplace_back(p, e);
    }
    if (n > 1) f.emplace_back(n, 1);
    return f;
}

inline std::uint64_t powmod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
    unsigned __int128 r = 1 % m, x = b % m;
    while (e) {
        if (e & 1) r = r * x % m;
        x = x * x % m;
        e >>= 1;
    }
    return static_cast<std::uint64_t>(r);
}

inline std::uint64_t ipow(std::uint64_t b, int e) {
    std::uint64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

inline std::int64_t mod_floor(std::int64_t a, std::int64_t m) {
    std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

inline std::uint64_t gcd_u64(std::uint64_t a, std::uint64_t b) {
    while (b) {
        auto t = a % b;
        a = b;
        b = t;
    }
    return a;
}

// Kronecker symbol (a|n) for n >= 1.
inline int kronecker(std::int64_t a, std::uint64_t n) {
    int result = 1;
    while (n % 2 == 0) {
        n /= 2;
        std::int64_t r = mod_floor(a, 8);
        if (r % 2 == 0) return 0;
        if (r == 3 || r == 5) result = -result;
    }
    // Jacobi symbol for odd n.
    std::int64_t aa = mod_floor(a, static_cast<std::int64_t>(n));
    std::uint64_t nn = n;
    std::uint64_t x = static_cast<std::uint64_t>(aa);
    while (x != 0) {
        while (x % 2 == 0) {
            x /= 2;
            if (nn % 8 == 3 || nn % 8 == 5) result = -result;
        }
        std::swap(x, nn);
        if (x % 4 == 3 && nn % 4 == 3) result = -result;
        x %= nn;
    }
    return nn == 1 ? result : 0;
}

// Smallest nonnegative r with r^2 = a mod p, p prime; a must be a square mod p.
inline std::uint64_t sqrt_mod_prime(std::int64_t a_signed, std::uint64_t p) {
    std::uint64_t a = static_cast<std::uint64_t>(mod_floor(a_signed, static_cast<std::int64_t>(p)));
    if (p == 2 || a == 0) return a % p;
    // Tonelli-Shanks.
    std::uint64_t q = p - 1;
    int s = 0;
    while (q % 2 == 0) q /= 2, ++s;
    std::uint64_t z = 2;
    while (powmod(z, (p - 1) / 2, p) != p - 1) ++z;
    std::uint64_t m = s, c = powmod(z, q, p), t = powmod(a, q, p), r = powmod(a, (q + 1) / 2, p);
    while (t != 1) {
        std::uint64_t i = 0, tt = t;
        while (tt != 1) tt = static_cast<std::uint64_t>((unsigned __int128)tt * tt % p), ++i;
        std::uint64_t b = c;
        for (std::uint64_t j = 0; j + i + 1 < m; ++j) b = static_cast<std::uint64_t>((unsigned __int128)b * b % p);
        m = i;
        c = static_cast<std::uint64_t>((unsigned __int128)b * b % p);
        t = static_cast<std::uint64_t>((unsigned __int128)t * c % p);
        r = static_cast<std::uint64_t>((unsigned __int128)r * b % p);
    }
    return std::min(r, p - r);
}

}  // namespace rslab
