#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rslab/errors.hpp"
#include "rslab/ideals.hpp"
#include "rslab/numeric.hpp"

namespace rslab {

// Exponent in the best known bound |alpha| <= Np^theta_n toward Ramanujan.
inline double theta_n(int n) { return 0.5 - 1.0 / (static_cast<double>(n) * n + 1.0); }

inline constexpr double kMagnitudeSlack = 1e-12;

struct LocalParameters {
    PrimeIdeal prime;
    std::vector<cd> alphas;
};

struct ArchimedeanPlace {
    int d = 1;  // 1 for a real place, 2 for a complex place
    std::vector<cd> mus;
};

struct ArchimedeanParameters {
    std::vector<ArchimedeanPlace> places;
};

struct DirichletCharacter {
    std::uint64_t modulus = 1;
    std::size_t index = 0;  // position among the primitive characters of this modulus
    std::vector<cd> table;  // table[n mod q]; zero when gcd(n, q) > 1

    cd operator()(std::uint64_t n) const { return table[n % modulus]; }
    bool odd() const { return modulus > 2 && table[modulus - 1].real() < 0; }
    std::string label() const { return "chi" + std::to_string(modulus) + "." + std::to_string(index); }
    DirichletCharacter conj() const {
        DirichletCharacter c = *this;
        for (auto& v : c.table) v = std::conj(v);
        return c;
    }
};

namespace detail {

struct CyclicFactor {
    std::uint64_t generator;
    std::uint64_t order;
};

inline std::uint64_t primitive_root_mod_prime(std::uint64_t p) {
    if (p == 2) return 1;
    auto fs = factor_integer(p - 1);
    for (std::uint64_t g = 2;; ++g) {
        bool ok = true;
        for (auto [f, e] : fs)
            if (powmod(g, (p - 1) / f, p) == 1) ok = false;
        if (ok) return g;
    }
}

// Generators and orders of (Z/p^a)^*.
inline std::vector<CyclicFactor> unit_group_generators(std::uint64_t p, int a) {
    std::uint64_t pa = ipow(p, a);
    if (p == 2) {
        if (a == 1) return {};
        if (a == 2) return {{3, 2}};
        return {{pa - 1, 2}, {5, pa / 4}};
    }
    std::uint64_t g = primitive_root_mod_prime(p);
    if (a >= 2 && powmod(g, p - 1, p * p) == 1) g += p;
    return {{g % pa, pa / p * (p - 1)}};
}

}  // namespace detail

// All characters mod q (not only primitive), in lexicographic order of generator exponents.
inline std::vector<DirichletCharacter> characters_mod(std::uint64_t q) {
    if (q == 0) throw UsageError("characters_mod: modulus must be >= 1");
    struct Comp {
        std::uint64_t pa;
        std::vector<detail::CyclicFactor> gens;
        std::vector<std::vector<std::uint64_t>> dlog;  // dlog[r] = exponents, empty if r not a unit
    };
    std::vector<Comp> comps;
    for (auto [p, a] : factor_integer(q)) {
        Comp c{ipow(p, a), detail::unit_group_generators(p, a), {}};
        c.dlog.assign(c.pa, {});
        std::vector<std::uint64_t> e(c.gens.size(), 0);
        // Walk all exponent tuples and record the residue each one reaches.
        while (true) {
            std::uint64_t r = 1 % c.pa;
            for (std::size_t i = 0; i < e.size(); ++i) r = static_cast<std::uint64_t>((unsigned __int128)r * powmod(c.gens[i].generator, e[i], c.pa) % c.pa);
            c.dlog[r] = e;
            std::size_t i = 0;
            for (; i < e.size(); ++i) {
                if (++e[i] < c.gens[i].order) break;
                e[i] = 0;
            }
            if (i == e.size()) break;
        }
        if (c.pa == 2) c.dlog[1] = {};
        comps.push_back(std::move(c));
    }
    std::vector<detail::CyclicFactor> all_gens;
    std::uint64_t L = 1;
    for (const auto& c : comps)
        for (const auto& g : c.gens) {
            all_gens.push_back(g);
            L = std::lcm(L, g.order);
        }
    std::vector<DirichletCharacter> out;
    std::vector<std::uint64_t> j(all_gens.size(), 0);
    while (true) {
        DirichletCharacter chi{q, out.size(), std::vector<cd>(q, cd(0, 0))};
        for (std::uint64_t n = 0; n < q; ++n) {
            if (gcd_u64(n, q) != 1) continue;
            std::uint64_t phase = 0;  // in units of 1/L turns
            std::size_t gi = 0;
            for (const auto& c : comps) {
                const auto& ex = c.dlog[n % c.pa];
                for (std::size_t i = 0; i < c.gens.size(); ++i, ++gi)
                    phase = (phase + j[gi] * ex[i] % c.gens[i].order * (L / c.gens[i].order)) % L;
            }
            chi.table[n] = root_of_unity(static_cast<std::int64_t>(phase), static_cast<std::int64_t>(L));
        }
        if (q == 1) chi.table[0] = 1;
        out.push_back(std::move(chi));
        std::size_t i = 0;
        for (; i < j.size(); ++i) {
            if (++j[i] < all_gens[i].order) break;
            j[i] = 0;
        }
        if (i == j.size()) break;
    }
    return out;
}

// chi is primitive iff for no prime p | q is it trivial on units n = 1 mod q/p.
inline bool is_primitive(const DirichletCharacter& chi) {
    std::uint64_t q = chi.modulus;
    for (auto [p, a] : factor_integer(q)) {
        std::uint64_t d = q / p;
        bool trivial = true;
        for (std::uint64_t n = 1; n < q + 1 && trivial; n += d)
            if (gcd_u64(n % q, q) == 1 && std::abs(chi(n) - cd(1, 0)) > 1e-9) trivial = false;
        if (trivial) return false;
    }
    return true;
}

inline std::vector<DirichletCharacter> primitive_characters_mod(std::uint64_t q) {
    std::vector<DirichletCharacter> out;
    for (auto& chi : characters_mod(q))
        if (is_primitive(chi)) {
            chi.index = out.size();
            out.push_back(std::move(chi));
        }
    return out;
}

// Smallest d | q such that chi is trivial on units n = 1 mod d.
inline std::uint64_t character_conductor(const DirichletCharacter& chi) {
    std::uint64_t q = chi.modulus;
    for (std::uint64_t d = 1; d <= q; ++d) {
        if (q % d) continue;
        bool trivial = true;
        for (std::uint64_t n = 1; n <= q && trivial; n += d)
            if (gcd_u64(n % q, q) == 1 && std::abs(chi(n) - cd(1, 0)) > 1e-9) trivial = false;
        if (trivial) return d;
    }
    return q;
}

enum class RepKind { trivial, dirichlet_character, hecke_gl2, synthetic };

inline const char* to_string(RepKind k) {
    switch (k) {
        case RepKind::trivial: return "trivial";
        case RepKind::dirichlet_character: return "dirichlet_character";
        case RepKind::hecke_gl2: return "hecke_gl2";
        default: return "synthetic";
    }
}

using LocalSource = std::function<std::vector<cd>(const PrimeIdeal&)>;

class Representation {
public:
    Representation(NumberFieldSpec field, int degree, IdealIndex conductor, ArchimedeanParameters arch, RepKind kind,
                   std::string label, LocalSource source, std::optional<DirichletCharacter> character = std::nullopt)
        : field_(field), degree_(degree), conductor_(std::move(conductor)), arch_(std::move(arch)), kind_(kind),
          label_(std::move(label)), character_(std::move(character)),
          source_(std::make_shared<LocalSource>(std::move(source))), cache_(std::make_shared<Cache>()) {
        if (degree_ < 1) throw UsageError("representation degree must be >= 1");
        for (const auto& v : arch_.places)
            for (auto mu : v.mus)
                if (mu.real() < -theta_n(degree_) - kMagnitudeSlack)
                    throw DataError(label_ + ": archimedean parameter with Re(mu) < -theta_n");
    }

    const NumberFieldSpec& field() const { return field_; }
    int degree() const { return degree_; }
    const IdealIndex& conductor() const { return conductor_; }
    const ArchimedeanParameters& arch() const { return arch_; }
    RepKind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    const std::optional<DirichletCharacter>& character() const { return character_; }

    bool ramified_at(const PrimeIdeal& P) const {
        for (const auto& [Q, e] : conductor_.factors)
            if (Q == P) return true;
        return false;
    }

    // Materializes the parameters at P on first use; concurrent callers see one validated entry.
    const LocalParameters& local(const PrimeIdeal& P) const {
        std::lock_guard<std::mutex> lock(cache_->mu);
        auto it = cache_->entries.find(P.key());
        if (it != cache_->entries.end()) return it->second;
        LocalParameters lp{P, (*source_)(P)};
        validate(lp);
        return cache_->entries.emplace(P.key(), std::move(lp)).first->second;
    }

    std::size_t materialized() const {
        std::lock_guard<std::mutex> lock(cache_->mu);
        return cache_->entries.size();
    }

    Representation contragredient() const {
        ArchimedeanParameters a = arch_;
        for (auto& v : a.places)
            for (auto& mu : v.mus) mu = std::conj(mu);
        auto src = source_;
        std::optional<DirichletCharacter> c;
        if (character_) c = character_->conj();
        std::string lab = label_.size() > 1 && label_.back() == '~' ? label_.substr(0, label_.size() - 1) : label_ + "~";
        return Representation(field_, degree_, conductor_, std::move(a), kind_, lab,
                              [src](const PrimeIdeal& P) {
                                  auto v = (*src)(P);
                                  for (auto& x : v) x = std::conj(x);
                                  return v;
                              },
                              std::move(c));
    }

private:
    struct Cache {
        std::mutex mu;
        std::map<std::pair<std::uint64_t, int>, LocalParameters> entries;
    };

    void validate(const LocalParameters& lp) const {
        if (static_cast<int>(lp.alphas.size()) != degree_)
            throw DataError(label_ + ": expected " + std::to_string(degree_) + " parameters at " + lp.prime.id());
        double ceiling = std::pow(static_cast<double>(lp.prime.norm), theta_n(degree_)) * (1 + kMagnitudeSlack);
        int nonzero = 0;
        for (auto a : lp.alphas) {
            if (std::abs(a) > ceiling)
                throw DataError(label_ + ": |alpha| exceeds Np^theta_n at " + lp.prime.id());
            if (a != cd(0, 0)) ++nonzero;
        }
        if (!ramified_at(lp.prime) && nonzero != degree_)
            throw DataError(label_ + ": zero parameter at unramified prime " + lp.prime.id());
    }

    NumberFieldSpec field_;
    int degree_;
    IdealIndex conductor_;
    ArchimedeanParameters arch_;
    RepKind kind_;
    std::string label_;
    std::optional<DirichletCharacter> character_;
    std::shared_ptr<LocalSource> source_;
    std::shared_ptr<Cache> cache_;
};

inline Representation contragredient(const Representation& r) { return r.contragredient(); }

inline ArchimedeanParameters zero_arch(const NumberFieldSpec& field, int n) {
    ArchimedeanParameters a;
    for (int i = 0; i < field.real_places(); ++i) a.places.push_back({1, std::vector<cd>(n, 0.0)});
    for (int i = 0; i < field.complex_places(); ++i) a.places.push_back({2, std::vector<cd>(n, 0.0)});
    return a;
}

inline Representation trivial_representation(const NumberFieldSpec& field = NumberFieldSpec::rationals()) {
    std::optional<DirichletCharacter> c;
    if (field.kind() == NumberFieldSpec::Kind::rationals) c = DirichletCharacter{1, 0, {cd(1, 0)}};
    return Representation(field, 1, unit_ideal(field), zero_arch(field, 1), RepKind::trivial, "trivial",
                          [](const PrimeIdeal&) { return std::vector<cd>{cd(1, 0)}; }, c);
}

inline Representation character_representation(const DirichletCharacter& chi) {
    if (chi.modulus == 1) return trivial_representation();
    ArchimedeanParameters a{{{1, {cd(chi.odd() ? 1.0 : 0.0, 0)}}}};
    auto table = std::make_shared<DirichletCharacter>(chi);
    return Representation(NumberFieldSpec::rationals(), 1, rational_ideal(chi.modulus), std::move(a),
                          RepKind::dirichlet_character, chi.label(),
                          [table](const PrimeIdeal& P) { return std::vector<cd>{(*table)(P.p)}; }, chi);
}

// D_F^n * N(q) * prod_v prod_j (3 + |it + mu_j(v)|^{d(v)}).
inline double analytic_conductor(const Representation& rep, double t) {
    double c = std::pow(static_cast<double>(std::abs(rep.field().discriminant())), rep.degree()) *
               static_cast<double>(rep.conductor().norm);
    for (const auto& v : rep.arch().places)
        for (auto mu : v.mus) c *= 3.0 + std::pow(std::abs(cd(0, t) + mu), v.d);
    return c;
}

struct Family {
    NumberFieldSpec field = NumberFieldSpec::rationals();
    std::vector<Representation> members;
    std::string description;

    double Q() const {
        double q = 0;
        for (const auto& m : members) q = std::max(q, analytic_conductor(m, 0));
        return q;
    }
    std::size_t size() const { return members.size(); }
    int max_degree() const {
        int n = 0;
        for (const auto& m : members) n = std::max(n, m.degree());
        return n;
    }
};

// Primitive characters with analytic conductor q(3 + mu) <= Q_max.
inline Family dirichlet_character_family(std::uint64_t Q_max) {
    if (Q_max < 1) throw UsageError("dirichlet_character_family: Q_max must be >= 1");
    Family f{NumberFieldSpec::rationals(), {}, "gl1-conductor<=" + std::to_string(Q_max)};
    for (std::uint64_t q = 1; 3 * q <= Q_max; ++q)
        for (const auto& chi : primitive_characters_mod(q)) {
            auto rep = character_representation(chi);
            if (analytic_conductor(rep, 0) <= static_cast<double>(Q_max)) f.members.push_back(std::move(rep));
        }
    return f;
}

// Primitive characters of modulus q <= q_max, the family of the classical large sieve.
inline Family dirichlet_modulus_family(std::uint64_t q_max) {
    if (q_max < 1) throw UsageError("dirichlet_modulus_family: q_max must be >= 1");
    Family f{NumberFieldSpec::rationals(), {}, "gl1-modulus<=" + std::to_string(q_max)};
    for (std::uint64_t q = 1; q <= q_max; ++q)
        for (const auto& chi : primitive_characters_mod(q)) f.members.push_back(character_representation(chi));
    return f;
}

struct SyntheticModel {
    enum class Kind { grc, planted } kind = Kind::grc;
    std::uint64_t p = 2;
    double theta = 0;
    int violators = 1;  // members 0 .. violators-1 carry the planted parameter

    static SyntheticModel grc() { return {}; }
    static SyntheticModel planted(std::uint64_t p, double theta, int violators = 1) {
        return {Kind::planted, p, theta, violators};
    }
};

// Unit-circle parameters in conjugate pairs (plus a sign when n is odd), drawn from
// splitmix64 keyed by (seed, member, p, slot). The planted model scales the first pair
// at the slot-0 prime above p to {Np^theta e^{i phi}, Np^-theta e^{-i phi}}.
inline std::vector<cd> synthetic_parameters(int n, std::uint64_t seed, std::size_t member, const PrimeIdeal& P,
                                            const SyntheticModel& model) {
    SplitMix64 rng(mix_keys({seed, member, P.p, static_cast<std::uint64_t>(P.slot)}));
    std::vector<cd> a;
    for (int j = 0; j < n / 2; ++j) {
        double phi = 2.0 * std::numbers::pi * rng.uniform();
        a.push_back(std::polar(1.0, phi));
        a.push_back(std::polar(1.0, -phi));
    }
    if (n % 2) a.push_back((rng.next() >> 63) ? cd(-1, 0) : cd(1, 0));
    bool plant = model.kind == SyntheticModel::Kind::planted && P.p == model.p && P.slot == 0 &&
                 member < static_cast<std::size_t>(model.violators) && n >= 2;
    if (plant) {
        double r = std::pow(static_cast<double>(P.norm), model.theta);
        a[0] *= r;
        a[1] /= r;
    }
    return a;
}

inline Family synthetic_family(const NumberFieldSpec& field, int n, std::size_t count, std::uint64_t seed,
                               const SyntheticModel& model) {
    if (n < 1) throw UsageError("synthetic_family: degree must be >= 1");
    if (count < 1) throw UsageError("synthetic_family: count must be >= 1");
    if (model.kind == SyntheticModel::Kind::planted) {
        if (!is_prime(model.p)) throw UsageError("synthetic_family: planted prime " + std::to_string(model.p) + " is not prime");
        if (model.theta < 0 || model.theta > theta_n(n) + kMagnitudeSlack)
            throw UsageError("synthetic_family: theta must lie in [0, 1/2 - 1/(n^2+1)] = [0, " +
                             std::to_string(theta_n(n)) + "] for n = " + std::to_string(n));
        if (model.violators < 0 || static_cast<std::size_t>(model.violators) > count)
            throw UsageError("synthetic_family: violators must lie in [0, count]");
    }
    Family f{field, {}, ""};
    std::ostringstream d;
    d << "synthetic(n=" << n << ",count=" << count << ",seed=" << seed << ","
      << (model.kind == SyntheticModel::Kind::grc ? "grc" : "planted") << ")";
    f.description = d.str();
    for (std::size_t m = 0; m < count; ++m) {
        f.members.emplace_back(field, n, unit_ideal(field), zero_arch(field, n), RepKind::synthetic,
                               "syn" + std::to_string(n) + "." + std::to_string(seed) + "." + std::to_string(m),
                               [n, seed, m, model](const PrimeIdeal& P) { return synthetic_parameters(n, seed, m, P, model); });
    }
    return f;
}

inline Family synthetic_family(int n, std::size_t count, std::uint64_t seed, const SyntheticModel& model) {
    return synthetic_family(NumberFieldSpec::rationals(), n, count, seed, model);
}

// Satake pair of lambda at an unramified prime: the roots of x^2 - lambda x + 1.
inline std::vector<cd> satake_pair(double lambda) {
    cd disc = std::sqrt(cd(lambda * lambda - 4.0, 0));
    return {(lambda + disc) / 2.0, (lambda - disc) / 2.0};
}

// Reads "p,a_p" rows (header optional, p prime and ascending) of a holomorphic newform with
// trivial nebentypus and returns the unitarily normalized GL2 representation.
inline Representation ingest_hecke_eigenvalues(const std::string& path, int weight, std::uint64_t level) {
    if (weight < 2 || weight % 2) throw UsageError("ingest: weight must be an even integer >= 2");
    if (level < 1) throw UsageError("ingest: level must be >= 1");
    std::ifstream in(path);
    if (!in) throw IoError("cannot open eigenvalue file " + path);
    auto values = std::make_shared<std::map<std::uint64_t, double>>();
    std::string line;
    long lineno = 0;
    std::uint64_t last = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(path, lineno, "expected \"p,a_p\"");
        std::string ps = line.substr(0, comma), as = line.substr(comma + 1);
        if (lineno == 1 && !ps.empty() && !std::isdigit(static_cast<unsigned char>(ps[0]))) continue;
        std::uint64_t p;
        long double ap;
        try {
            std::size_t used = 0;
            p = std::stoull(ps, &used);
            if (used != ps.size()) throw std::invalid_argument("p");
            ap = std::stold(as, &used);
            if (used != as.size()) throw std::invalid_argument("a_p");
            if (as.find_first_of(".eE") != std::string::npos) throw std::invalid_argument("a_p");
        } catch (const std::exception&) {
            throw ParseError(path, lineno, "expected integers \"p,a_p\"");
        }
        if (!is_prime(p)) throw ParseError(path, lineno, std::to_string(p) + " is not prime");
        if (p <= last) throw ParseError(path, lineno, "primes must be strictly ascending");
        last = p;
        double lambda = static_cast<double>(ap / std::pow(static_cast<long double>(p), (weight - 1) / 2.0L));
        double th = std::pow(static_cast<double>(p), theta_n(2));
        double ceiling = level % p ? th + 1.0 / th : th;
        if (std::abs(lambda) > ceiling * (1 + kMagnitudeSlack))
            throw DataError(path + ":" + std::to_string(lineno) + ": |lambda(" + std::to_string(p) +
                            ")| = " + std::to_string(std::abs(lambda)) + " exceeds the theta_2 ceiling");
        (*values)[p] = lambda;
    }
    ArchimedeanParameters arch{{{1, {cd((weight - 1) / 2.0, 0), cd((weight + 1) / 2.0, 0)}}}};
    std::string label = "hecke(k=" + std::to_string(weight) + ",N=" + std::to_string(level) + ")";
    return Representation(NumberFieldSpec::rationals(), 2, rational_ideal(level), std::move(arch), RepKind::hecke_gl2,
                          label, [values, level, path](const PrimeIdeal& P) -> std::vector<cd> {
                              auto it = values->find(P.p);
                              if (it == values->end())
                                  throw DataError(path + ": no eigenvalue for p = " + std::to_string(P.p));
                              if (level % P.p == 0) return {cd(it->second, 0), cd(0, 0)};
                              return satake_pair(it->second);
                          });
}

}  // namespace rslab
