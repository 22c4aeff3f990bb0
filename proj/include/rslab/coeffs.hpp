#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rslab/errors.hpp"
#include "rslab/ideals.hpp"
#include "rslab/localdata.hpp"
#include "rslab/numeric.hpp"
#include "rslab/parallel.hpp"

namespace rslab {

inline constexpr int kPartitionCap = 64;

// h_0 .. h_kmax of the given parameters.
inline std::vector<cd> complete_homogeneous(const std::vector<cd>& alphas, int kmax) {
    std::vector<cd> h(kmax + 1, cd(0, 0));
    h[0] = 1;
    for (auto a : alphas)
        for (int k = 1; k <= kmax; ++k) h[k] += a * h[k - 1];
    return h;
}

inline cd local_lambda(const LocalParameters& params, int k) {
    if (k < 0) throw UsageError("local_lambda: k must be >= 0");
    return complete_homogeneous(params.alphas, k)[k];
}

// Signed elementary symmetric functions: coefficients of prod (1 - a x).
inline std::vector<cd> inverse_polynomial(const std::vector<cd>& alphas) {
    std::vector<cd> c(alphas.size() + 1, cd(0, 0));
    c[0] = 1;
    for (std::size_t i = 0; i < alphas.size(); ++i)
        for (std::size_t k = i + 1; k >= 1; --k) c[k] -= alphas[i] * c[k - 1];
    return c;
}

inline cd power_sum(const std::vector<cd>& alphas, int l) {
    cd s = 0;
    for (auto a : alphas) s += cpow(a, l);
    return s;
}

using Partition = std::vector<int>;

// Partitions of k with at most max_parts parts, in reverse lexicographic order.
inline std::vector<Partition> partitions(int k, int max_parts) {
    if (k > kPartitionCap) throw UsageError("partitions: |lambda| = " + std::to_string(k) + " exceeds the cap of 64");
    std::vector<Partition> out;
    Partition cur;
    auto rec = [&](auto&& self, int rest, int largest) -> void {
        if (rest == 0) {
            out.push_back(cur);
            return;
        }
        if (static_cast<int>(cur.size()) == max_parts) return;
        for (int part = std::min(rest, largest); part >= 1; --part) {
            cur.push_back(part);
            self(self, rest - part, part);
            cur.pop_back();
        }
    };
    rec(rec, k, k);
    return out;
}

inline cd determinant(std::vector<cd> m, int n) {
    cd det = 1;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
        if (m[piv * n + c] == cd(0, 0)) return 0;
        if (piv != c) {
            for (int j = 0; j < n; ++j) std::swap(m[c * n + j], m[piv * n + j]);
            det = -det;
        }
        det *= m[c * n + c];
        for (int r = c + 1; r < n; ++r) {
            cd f = m[r * n + c] / m[c * n + c];
            for (int j = c; j < n; ++j) m[r * n + j] -= f * m[c * n + j];
        }
    }
    return det;
}

// Jacobi-Trudi: s_lambda = det[h_{lambda_i - i + j}], safe at repeated parameters.
inline cd schur_from_h(const std::vector<cd>& h, const Partition& lambda) {
    int l = static_cast<int>(lambda.size());
    if (l == 0) return 1;
    std::vector<cd> m(l * l);
    for (int i = 0; i < l; ++i)
        for (int j = 0; j < l; ++j) {
            int idx = lambda[i] - i + j;
            m[i * l + j] = idx < 0 ? cd(0, 0) : h.at(idx);
        }
    return determinant(std::move(m), l);
}

// s_lambda(alphas) for every partition of k with at most max_parts parts; exactly zero when
// the partition is longer than the number of parameters.
inline std::vector<cd> schur_vector(const std::vector<cd>& alphas, int k, int max_parts) {
    auto parts = partitions(k, max_parts);
    auto h = complete_homogeneous(alphas, k + max_parts);
    std::vector<cd> s(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i)
        s[i] = parts[i].size() > alphas.size() ? cd(0, 0) : schur_from_h(h, parts[i]);
    return s;
}

enum class RamifiedModel { product, gl1_exact };

inline const char* to_string(RamifiedModel m) { return m == RamifiedModel::product ? "product" : "gl1_exact"; }

// The GL1 model is exact whenever both representations carry character tables.
inline RamifiedModel default_model(const Representation& a, const Representation& b) {
    return a.character() && b.character() ? RamifiedModel::gl1_exact : RamifiedModel::product;
}

// Value at p of the primitive character inducing x * conj(y).
inline cd gl1_psi(const DirichletCharacter& x, const DirichletCharacter& y, std::uint64_t p) {
    auto split = [p](const DirichletCharacter& c) {
        std::uint64_t q = c.modulus, pa = 1;
        while (q % p == 0) q /= p, pa *= p;
        return std::make_pair(pa, q);
    };
    auto [pa, m] = split(x);
    auto [pb, mb] = split(y);
    if (pa == 1 && pb == 1) return x(p) * std::conj(y(p));
    // n mod P*mm with n = r mod P and n = s mod mm.
    auto crt = [](std::uint64_t r, std::uint64_t P, std::uint64_t s, std::uint64_t mm) {
        for (std::uint64_t t = 0; t < mm; ++t)
            if ((r + t * P) % mm == s % mm) return r + t * P;
        return r;
    };
    std::uint64_t top = std::max(pa, pb);
    for (std::uint64_t r = 1; r < top; ++r) {
        if (r % p == 0) continue;
        cd vx = x(crt(r % pa, pa, 1, m));
        cd vy = y(crt(r % pb, pb, 1, mb));
        if (std::abs(vx - vy) > 1e-9) return 0;
    }
    return x(crt(1 % pa, pa, p % m, m)) * std::conj(y(crt(1 % pb, pb, p % mb, mb)));
}

// Local data of L(s, a x b~) at one prime: lambda(P^k), mu(P^k) and Lambda(P^l)/log NP.
struct LocalPair {
    std::vector<cd> lambda;  // k = 0 .. kmax
    std::vector<cd> mu;      // coefficients of the inverse local factor
    std::vector<cd> psum;    // l = 0 .. kmax, psum[l] = p_l(alpha) conj(p_l(beta)); psum[0] unused
};

inline void require_gl1(const Representation& a, const Representation& b) {
    if (!a.character() || !b.character() || a.degree() != 1 || b.degree() != 1)
        throw UsageError("gl1_exact model needs two degree-1 representations with character data (" + a.label() +
                         ", " + b.label() + ")");
}

inline cd rankin_selberg_local(const LocalParameters& a, const LocalParameters& b, int k) {
    if (!(a.prime == b.prime)) throw UsageError("rankin_selberg_local: parameters at different primes");
    if (k < 0) throw UsageError("rankin_selberg_local: k must be >= 0");
    int parts = static_cast<int>(std::min(a.alphas.size(), b.alphas.size()));
    auto sa = schur_vector(a.alphas, k, parts);
    auto sb = schur_vector(b.alphas, k, parts);
    Kahan<cd> acc;
    for (std::size_t i = 0; i < sa.size(); ++i) acc.add(sa[i] * std::conj(sb[i]));
    return acc.value();
}

inline cd rankin_selberg_local(const Representation& a, const Representation& b, const PrimeIdeal& P, int k,
                               RamifiedModel model) {
    if (model == RamifiedModel::gl1_exact) {
        require_gl1(a, b);
        return cpow(gl1_psi(*a.character(), *b.character(), P.p), k);
    }
    return rankin_selberg_local(a.local(P), b.local(P), k);
}

inline std::vector<cd> product_multiset(const std::vector<cd>& a, const std::vector<cd>& b) {
    std::vector<cd> out;
    for (auto x : a)
        for (auto y : b) out.push_back(x * std::conj(y));
    return out;
}

inline LocalPair local_pair(const Representation& a, const Representation& b, const PrimeIdeal& P, int kmax,
                            RamifiedModel model) {
    LocalPair lp;
    if (model == RamifiedModel::gl1_exact) {
        require_gl1(a, b);
        cd psi = gl1_psi(*a.character(), *b.character(), P.p);
        lp.mu = {1, -psi};
        for (int k = 0; k <= kmax; ++k) {
            lp.lambda.push_back(cpow(psi, k));
            lp.psum.push_back(cpow(psi, k));
        }
        return lp;
    }
    const auto& la = a.local(P);
    const auto& lb = b.local(P);
    for (int k = 0; k <= kmax; ++k) lp.lambda.push_back(rankin_selberg_local(la, lb, k));
    lp.mu = inverse_polynomial(product_multiset(la.alphas, lb.alphas));
    for (int l = 0; l <= kmax; ++l) lp.psum.push_back(power_sum(la.alphas, l) * std::conj(power_sum(lb.alphas, l)));
    return lp;
}

enum class SeriesKind { lambda, mu, biglambda, logl };

inline const char* to_string(SeriesKind k) {
    switch (k) {
        case SeriesKind::lambda: return "lambda";
        case SeriesKind::mu: return "mu";
        case SeriesKind::biglambda: return "biglambda";
        default: return "logl";
    }
}

struct CoefficientSeries {
    NumberFieldSpec field = NumberFieldSpec::rationals();
    SeriesKind kind = SeriesKind::lambda;
    std::uint64_t bound = 0;
    std::shared_ptr<const IdealSet> ideals;
    std::vector<cd> values;
    bool exact = true;  // false when a ramified prime used the product model
    std::string label;

    std::size_t size() const { return values.size(); }
    cd at(const IdealIndex& n) const {
        auto i = ideals->find(n);
        if (i < 0) throw UsageError("coefficient requested beyond the series bound");
        return values[static_cast<std::size_t>(i)];
    }

    // Rows "norm,ideal_id,re,im" with 17 significant digits.
    void write_csv(std::ostream& os) const {
        os << "norm,ideal_id,re,im\n";
        char buf[64];
        for (std::size_t i = 0; i < values.size(); ++i) {
            os << (*ideals)[i].norm << ',' << (*ideals)[i].id();
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", values[i].real(), values[i].imag());
            os << buf;
        }
    }
};

// Largest exponent e with NP^e <= N.
inline int max_exponent(std::uint64_t norm, std::uint64_t N) {
    int e = 0;
    for (std::uint64_t v = 1; v <= N / norm; v *= norm) ++e;
    return e;
}

// Coefficients of L(s, a x b~) (b omitted: the standard L-function of a) over a shared index set.
inline CoefficientSeries expand_global(const Representation& a, const std::optional<Representation>& b,
                                       std::shared_ptr<const IdealSet> ideals, SeriesKind kind,
                                       std::optional<RamifiedModel> model = std::nullopt) {
    Representation bb = b ? *b : trivial_representation(a.field());
    if (!(a.field() == bb.field()) || !(a.field() == ideals->field()))
        throw UsageError("expand_global: representations and index set over different fields");
    RamifiedModel m = model ? *model : default_model(a, bb);
    CoefficientSeries s{ideals->field(), kind, ideals->bound(), ideals, std::vector<cd>(ideals->size()), true,
                        std::string(to_string(kind)) + "[" + a.label() + " x " + bb.label() + "~]"};
    std::map<std::pair<std::uint64_t, int>, LocalPair> cache;
    auto local = [&](const PrimeIdeal& P) -> const LocalPair& {
        auto it = cache.find(P.key());
        if (it != cache.end()) return it->second;
        if (m == RamifiedModel::product && (a.ramified_at(P) || bb.ramified_at(P))) s.exact = false;
        return cache.emplace(P.key(), local_pair(a, bb, P, max_exponent(P.norm, ideals->bound()), m)).first->second;
    };
    for (std::size_t i = 0; i < ideals->size(); ++i) {
        const auto& n = (*ideals)[i];
        cd v = 0;
        switch (kind) {
            case SeriesKind::lambda:
                v = 1;
                for (const auto& [P, e] : n.factors) v *= local(P).lambda[e];
                break;
            case SeriesKind::mu:
                v = 1;
                for (const auto& [P, e] : n.factors) {
                    const auto& mu = local(P).mu;
                    v *= e < static_cast<int>(mu.size()) ? mu[e] : cd(0, 0);
                }
                break;
            case SeriesKind::biglambda:
                if (n.is_prime_power()) v = local(n.prime()).psum[n.exponent()] * std::log(static_cast<double>(n.prime().norm));
                break;
            case SeriesKind::logl:
                if (n.is_prime_power()) v = local(n.prime()).psum[n.exponent()] / static_cast<double>(n.exponent());
                break;
        }
        s.values[i] = v;
    }
    return s;
}

inline CoefficientSeries expand_global(const Representation& a, const std::optional<Representation>& b, std::uint64_t N,
                                       SeriesKind kind, std::optional<RamifiedModel> model = std::nullopt) {
    return expand_global(a, b, std::make_shared<const IdealSet>(a.field(), N), kind, model);
}

// Dirichlet convolution up to norm N with compensated accumulation.
inline CoefficientSeries dirichlet_convolve(const CoefficientSeries& a, const CoefficientSeries& b, std::uint64_t N) {
    if (!(a.field == b.field)) throw UsageError("dirichlet_convolve: series over different fields");
    if (a.bound < N || b.bound < N) throw UsageError("dirichlet_convolve: input bounds below N");
    auto ideals = a.bound == N ? a.ideals : std::make_shared<const IdealSet>(a.field, N);
    std::vector<Kahan<cd>> acc(ideals->size());
    const auto& I = *ideals;
    bool rational = a.field.kind() == NumberFieldSpec::Kind::rationals;
    for (std::size_t i = 0; i < I.size(); ++i) {
        const auto& x = I[i];
        cd va = a.at(x);
        if (va == cd(0, 0)) continue;
        for (std::size_t j = 0; j < I.size() && I[j].norm <= N / x.norm; ++j) {
            cd vb = b.at(I[j]);
            if (vb == cd(0, 0)) continue;
            auto k = rational ? static_cast<std::ptrdiff_t>(x.norm * I[j].norm - 1) : I.find(multiply(x, I[j]));
            acc[static_cast<std::size_t>(k)].add(va * vb);
        }
    }
    CoefficientSeries out{a.field, a.kind, N, ideals, std::vector<cd>(I.size()), a.exact && b.exact,
                          "(" + a.label + " * " + b.label + ")"};
    for (std::size_t i = 0; i < I.size(); ++i) out.values[i] = acc[i].value();
    return out;
}

// Sum_{Nn <= X} lambda_{pi x pi~}(n)/Nn.
inline double mertens_sum(const Representation& rep, std::uint64_t X) {
    if (X < 3) throw UsageError("mertens_sum: X must be >= 3");
    auto s = expand_global(rep, rep, X, SeriesKind::lambda);
    Kahan<double> acc;
    for (std::size_t i = 0; i < s.size(); ++i) acc.add(s.values[i].real() / static_cast<double>((*s.ideals)[i].norm));
    return acc.value();
}

struct PointwiseSlack {
    double mu_slack = 0;       // min of lambda_{a x a~} lambda_{b x b~} - |mu_{a x b}|^2
    double brumley_slack = 0;  // min of (Lambda_{a x a~} + Lambda_{b x b~})/2 - |Lambda_{a x b}|
    IdealIndex mu_worst, brumley_worst;
};

namespace detail {
inline void pointwise_fold(PointwiseSlack& out, const IdealSet& ideals, const CoefficientSeries& laa,
                           const CoefficientSeries& lbb, const CoefficientSeries& Laa, const CoefficientSeries& Lbb,
                           const CoefficientSeries& mab, const CoefficientSeries& Lab) {
    for (std::size_t i = 0; i < ideals.size(); ++i) {
        double ms = laa.values[i].real() * lbb.values[i].real() - std::norm(mab.values[i]);
        double bs = 0.5 * (Laa.values[i].real() + Lbb.values[i].real()) - std::abs(Lab.values[i]);
        if (ms < out.mu_slack) out.mu_slack = ms, out.mu_worst = ideals[i];
        if (bs < out.brumley_slack) out.brumley_slack = bs, out.brumley_worst = ideals[i];
    }
}
}  // namespace detail

// The two pointwise Rankin-Selberg bounds over every ideal of the index set.
inline PointwiseSlack pointwise_bounds(const Representation& a, const Representation& b,
                                       std::shared_ptr<const IdealSet> ideals) {
    auto bc = b.contragredient();
    PointwiseSlack out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), {}, {}};
    detail::pointwise_fold(out, *ideals, expand_global(a, a, ideals, SeriesKind::lambda),
                           expand_global(b, b, ideals, SeriesKind::lambda), expand_global(a, a, ideals, SeriesKind::biglambda),
                           expand_global(b, b, ideals, SeriesKind::biglambda), expand_global(a, bc, ideals, SeriesKind::mu),
                           expand_global(a, bc, ideals, SeriesKind::biglambda));
    return out;
}

// Worst slack over all ordered pairs of reps; diagonal series are expanded once.
inline PointwiseSlack pointwise_bounds(const std::vector<Representation>& reps, std::shared_ptr<const IdealSet> ideals) {
    std::vector<CoefficientSeries> lam, big;
    for (const auto& r : reps) {
        lam.push_back(expand_global(r, r, ideals, SeriesKind::lambda));
        big.push_back(expand_global(r, r, ideals, SeriesKind::biglambda));
    }
    std::vector<PointwiseSlack> per(reps.size());
    parallel_for(reps.size(), [&](std::size_t i) {
        per[i] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), {}, {}};
        for (std::size_t j = 0; j < reps.size(); ++j) {
            auto bc = reps[j].contragredient();
            detail::pointwise_fold(per[i], *ideals, lam[i], lam[j], big[i], big[j],
                                   expand_global(reps[i], bc, ideals, SeriesKind::mu),
                                   expand_global(reps[i], bc, ideals, SeriesKind::biglambda));
        }
    });
    PointwiseSlack out = per.empty() ? PointwiseSlack{} : per[0];
    for (const auto& p : per) {
        if (p.mu_slack < out.mu_slack) out.mu_slack = p.mu_slack, out.mu_worst = p.mu_worst;
        if (p.brumley_slack < out.brumley_slack) out.brumley_slack = p.brumley_slack, out.brumley_worst = p.brumley_worst;
    }
    return out;
}

}  // namespace rslab
