#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rslab/errors.hpp"
#include "rslab/numeric.hpp"

namespace rslab {

class NumberFieldSpec {
public:
    enum class Kind { rationals, quadratic };

    static NumberFieldSpec rationals() { return NumberFieldSpec(Kind::rationals, 1); }

    static NumberFieldSpec quadratic(std::int64_t d) {
        if (d == 0 || d == 1) throw UsageError("quadratic field needs squarefree d not in {0,1}");
        std::uint64_t a = static_cast<std::uint64_t>(d < 0 ? -d : d);
        for (std::uint64_t f = 2; f * f <= a; ++f)
            if (a % (f * f) == 0) throw UsageError("quadratic(" + std::to_string(d) + "): d is not squarefree");
        return NumberFieldSpec(Kind::quadratic, d);
    }

    Kind kind() const { return kind_; }
    std::int64_t d() const { return d_; }
    std::int64_t discriminant() const {
        if (kind_ == Kind::rationals) return 1;
        return mod_floor(d_, 4) == 1 ? d_ : 4 * d_;
    }
    int degree() const { return kind_ == Kind::rationals ? 1 : 2; }
    int real_places() const { return kind_ == Kind::rationals ? 1 : (d_ > 0 ? 2 : 0); }
    int complex_places() const { return kind_ == Kind::quadratic && d_ < 0 ? 1 : 0; }
    std::string name() const { return kind_ == Kind::rationals ? "rationals" : "quadratic(" + std::to_string(d_) + ")"; }

    // Integer tag carried by ideals so that mixing fields is detectable.
    std::int64_t tag() const { return kind_ == Kind::rationals ? 1 : d_; }

    bool operator==(const NumberFieldSpec&) const = default;

private:
    NumberFieldSpec(Kind k, std::int64_t d) : kind_(k), d_(d) {}
    Kind kind_;
    std::int64_t d_;
};

struct PrimeIdeal {
    std::uint64_t p = 0;
    int slot = 0;
    std::uint64_t norm = 0;

    auto key() const { return std::make_pair(p, slot); }
    bool operator==(const PrimeIdeal& o) const { return key() == o.key(); }
    bool operator<(const PrimeIdeal& o) const { return key() < o.key(); }
    std::string id() const { return std::to_string(p) + (slot ? "." + std::to_string(slot) : ""); }
};

enum class SplitType { split, inert, ramified };

inline const char* to_string(SplitType t) {
    switch (t) {
        case SplitType::split: return "split";
        case SplitType::inert: return "inert";
        default: return "ramified";
    }
}

struct Splitting {
    SplitType type;
    std::vector<PrimeIdeal> primes;
};

// Slot 0 of a split prime is the one attached to the smallest nonnegative root of x^2 = D mod p.
inline Splitting split_prime(const NumberFieldSpec& field, std::uint64_t p) {
    if (!is_prime(p)) throw UsageError("split_prime: " + std::to_string(p) + " is not prime");
    if (field.kind() == NumberFieldSpec::Kind::rationals) return {SplitType::split, {{p, 0, p}}};
    std::int64_t D = field.discriminant();
    int k = kronecker(D, p);
    if (k == 0) return {SplitType::ramified, {{p, 0, p}}};
    if (k == 1) return {SplitType::split, {{p, 0, p}, {p, 1, p}}};
    return {SplitType::inert, {{p, 0, p * p}}};
}

// The residue r in [0,p) attached to a split prime slot: the ideal (p, sqrt(D) - r) in the order of discriminant D.
inline std::uint64_t split_root(const NumberFieldSpec& field, const PrimeIdeal& P) {
    std::uint64_t r = sqrt_mod_prime(field.discriminant(), P.p);
    return P.slot == 0 ? r : (P.p - r) % P.p;
}

struct IdealIndex {
    std::int64_t field = 1;
    std::uint64_t norm = 1;
    std::vector<std::pair<PrimeIdeal, int>> factors;  // sorted by (p, slot), exponents >= 1

    bool is_unit() const { return factors.empty(); }
    bool is_prime() const { return factors.size() == 1 && factors[0].second == 1; }
    bool is_prime_power() const { return factors.size() == 1; }
    bool squarefree() const {
        return std::all_of(factors.begin(), factors.end(), [](const auto& f) { return f.second == 1; });
    }
    const PrimeIdeal& prime() const { return factors.at(0).first; }
    int exponent() const { return factors.at(0).second; }

    std::string id() const {
        if (factors.empty()) return "1";
        std::string s;
        for (const auto& [P, e] : factors) {
            if (!s.empty()) s += "*";
            s += P.id();
            if (e > 1) s += "^" + std::to_string(e);
        }
        return s;
    }

    // Canonical order: by norm, then lexicographically by (p, slot, exponent).
    friend bool operator<(const IdealIndex& a, const IdealIndex& b) {
        if (a.norm != b.norm) return a.norm < b.norm;
        std::size_t n = std::min(a.factors.size(), b.factors.size());
        for (std::size_t i = 0; i < n; ++i) {
            auto ka = std::make_tuple(a.factors[i].first.p, a.factors[i].first.slot, a.factors[i].second);
            auto kb = std::make_tuple(b.factors[i].first.p, b.factors[i].first.slot, b.factors[i].second);
            if (ka != kb) return ka < kb;
        }
        return a.factors.size() < b.factors.size();
    }
    friend bool operator==(const IdealIndex& a, const IdealIndex& b) {
        if (a.field != b.field || a.norm != b.norm || a.factors.size() != b.factors.size()) return false;
        for (std::size_t i = 0; i < a.factors.size(); ++i)
            if (!(a.factors[i].first == b.factors[i].first) || a.factors[i].second != b.factors[i].second) return false;
        return true;
    }
};

inline IdealIndex unit_ideal(const NumberFieldSpec& field) { return IdealIndex{field.tag(), 1, {}}; }

inline IdealIndex prime_power_ideal(const NumberFieldSpec& field, const PrimeIdeal& P, int e) {
    IdealIndex a{field.tag(), 1, {}};
    if (e <= 0) return a;
    a.factors.push_back({P, e});
    a.norm = ipow(P.norm, e);
    return a;
}

// The ideal n*Z for the rationals.
inline IdealIndex rational_ideal(std::uint64_t n) {
    if (n == 0) throw UsageError("the zero ideal is not indexed");
    IdealIndex a{1, n, {}};
    for (auto [p, e] : factor_integer(n)) a.factors.push_back({PrimeIdeal{p, 0, p}, e});
    return a;
}

inline void require_same_field(const IdealIndex& a, const IdealIndex& b, const char* op) {
    if (a.field != b.field) throw UsageError(std::string(op) + ": ideals from different fields");
}

namespace detail {

template <class Combine>
IdealIndex merge_factors(const IdealIndex& a, const IdealIndex& b, Combine comb) {
    IdealIndex out{a.field, 1, {}};
    std::size_t i = 0, j = 0;
    while (i < a.factors.size() || j < b.factors.size()) {
        PrimeIdeal P;
        int ea = 0, eb = 0;
        if (j == b.factors.size() || (i < a.factors.size() && a.factors[i].first < b.factors[j].first)) {
            P = a.factors[i].first, ea = a.factors[i++].second;
        } else if (i == a.factors.size() || b.factors[j].first < a.factors[i].first) {
            P = b.factors[j].first, eb = b.factors[j++].second;
        } else {
            P = a.factors[i].first, ea = a.factors[i++].second, eb = b.factors[j++].second;
        }
        int e = comb(ea, eb);
        if (e > 0) {
            out.factors.push_back({P, e});
            out.norm *= ipow(P.norm, e);
        }
    }
    return out;
}

}  // namespace detail

inline IdealIndex multiply(const IdealIndex& a, const IdealIndex& b) {
    require_same_field(a, b, "multiply");
    return detail::merge_factors(a, b, [](int x, int y) { return x + y; });
}

inline std::pair<IdealIndex, IdealIndex> gcd_lcm(const IdealIndex& a, const IdealIndex& b) {
    require_same_field(a, b, "gcd_lcm");
    return {detail::merge_factors(a, b, [](int x, int y) { return std::min(x, y); }),
            detail::merge_factors(a, b, [](int x, int y) { return std::max(x, y); })};
}

inline bool divides(const IdealIndex& d, const IdealIndex& n) {
    require_same_field(d, n, "divides");
    return gcd_lcm(d, n).first == d;
}

inline bool coprime(const IdealIndex& a, const IdealIndex& b) { return gcd_lcm(a, b).first.is_unit(); }

// Divisors with norm <= norm_bound, sorted canonically. norm_bound = 0 means unbounded.
inline std::vector<IdealIndex> divisors(const IdealIndex& a, std::uint64_t norm_bound = 0, bool squarefree_only = false) {
    std::vector<IdealIndex> out{IdealIndex{a.field, 1, {}}};
    for (const auto& [P, e] : a.factors) {
        int top = squarefree_only ? 1 : e;
        std::size_t base = out.size();
        for (std::size_t i = 0; i < base; ++i) {
            IdealIndex cur = out[i];
            for (int k = 1; k <= top; ++k) {
                if (norm_bound && cur.norm > norm_bound / P.norm) break;
                cur.norm *= P.norm;
                if (k == 1)
                    cur.factors.push_back({P, 1});
                else
                    cur.factors.back().second = k;
                out.push_back(cur);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Checks the norm/factorization invariant against the field's splitting data.
inline bool validate_ideal(const NumberFieldSpec& field, const IdealIndex& a) {
    if (a.field != field.tag()) return false;
    std::uint64_t n = 1;
    for (std::size_t i = 0; i < a.factors.size(); ++i) {
        const auto& [P, e] = a.factors[i];
        if (e < 1 || !is_prime(P.p)) return false;
        if (i > 0 && !(a.factors[i - 1].first < P)) return false;
        auto sp = split_prime(field, P.p);
        auto it = std::find(sp.primes.begin(), sp.primes.end(), P);
        if (it == sp.primes.end() || it->norm != P.norm) return false;
        n *= ipow(P.norm, e);
    }
    return n == a.norm;
}

// Number of ideals of norm <= bound, via sum_{d <= bound} chi_D(d) * floor(bound/d).
inline std::uint64_t count_ideals(const NumberFieldSpec& field, std::uint64_t bound) {
    if (field.kind() == NumberFieldSpec::Kind::rationals) return bound;
    std::int64_t D = field.discriminant();
    std::int64_t total = 0;
    for (std::uint64_t d = 1; d <= bound; ++d) total += kronecker(D, d) * static_cast<std::int64_t>(bound / d);
    return static_cast<std::uint64_t>(total);
}

inline constexpr std::uint64_t kDefaultIdealCeiling = 10'000'000;

inline std::vector<PrimeIdeal> prime_ideals_up_to(const NumberFieldSpec& field, std::uint64_t bound) {
    std::vector<PrimeIdeal> out;
    for (auto p : primes_up_to(bound))
        for (const auto& P : split_prime(field, p).primes)
            if (P.norm <= bound) out.push_back(P);
    return out;
}

inline std::vector<IdealIndex> enumerate_ideals(const NumberFieldSpec& field, std::uint64_t bound,
                                                std::uint64_t ceiling = kDefaultIdealCeiling) {
    if (bound < 1) throw UsageError("enumerate_ideals: bound must be >= 1");
    if (field.kind() == NumberFieldSpec::Kind::rationals ? bound > ceiling : count_ideals(field, bound) > ceiling)
        throw ResourceError("enumerate_ideals: more than the memory ceiling of " + std::to_string(ceiling) +
                            " ideals below norm " + std::to_string(bound));
    auto primes = prime_ideals_up_to(field, bound);
    std::vector<IdealIndex> out;
    IdealIndex cur{field.tag(), 1, {}};
    // Depth-first over prime ideals in increasing (p, slot) order.
    auto rec = [&](auto&& self, std::size_t start) -> void {
        out.push_back(cur);
        for (std::size_t i = start; i < primes.size(); ++i) {
            const auto& P = primes[i];
            if (P.p > bound / cur.norm) break;
            if (P.norm > bound / cur.norm) continue;
            std::uint64_t saved = cur.norm;
            cur.factors.push_back({P, 0});
            while (cur.norm <= bound / P.norm) {
                cur.norm *= P.norm;
                ++cur.factors.back().second;
                self(self, i + 1);
            }
            cur.factors.pop_back();
            cur.norm = saved;
        }
    };
    rec(rec, 0);
    std::sort(out.begin(), out.end());
    return out;
}

// Enumerated ideals with O(1) lookup by ideal.
class IdealSet {
public:
    IdealSet(const NumberFieldSpec& field, std::uint64_t bound, std::uint64_t ceiling = kDefaultIdealCeiling)
        : field_(field), bound_(bound), ideals_(enumerate_ideals(field, bound, ceiling)) {
        if (field_.kind() != NumberFieldSpec::Kind::rationals)
            for (std::size_t i = 0; i < ideals_.size(); ++i) index_.emplace(ideals_[i].id(), i);
    }

    const NumberFieldSpec& field() const { return field_; }
    std::uint64_t bound() const { return bound_; }
    std::size_t size() const { return ideals_.size(); }
    const IdealIndex& operator[](std::size_t i) const { return ideals_[i]; }
    const std::vector<IdealIndex>& ideals() const { return ideals_; }
    auto begin() const { return ideals_.begin(); }
    auto end() const { return ideals_.end(); }

    // Position of an ideal, or -1 if its norm exceeds the bound.
    std::ptrdiff_t find(const IdealIndex& a) const {
        if (a.norm > bound_) return -1;
        if (field_.kind() == NumberFieldSpec::Kind::rationals) return static_cast<std::ptrdiff_t>(a.norm - 1);
        auto it = index_.find(a.id());
        return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    }

private:
    NumberFieldSpec field_;
    std::uint64_t bound_;
    std::vector<IdealIndex> ideals_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace rslab
