#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rslab/coeffs.hpp"
#include "rslab/errors.hpp"
#include "rslab/ideals.hpp"
#include "rslab/localdata.hpp"
#include "rslab/parallel.hpp"

namespace rslab {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// lambda, mu, biglambda and logl are coefficient kinds of L(s, pi x pi'~); remark2 is
// lambda_{pi x pi'~} - lambda_pi conj(lambda_pi').
enum class MatrixKind { lambda, mu, biglambda, logl, remark2 };

inline const char* to_string(MatrixKind k) {
    switch (k) {
        case MatrixKind::lambda: return "lambda";
        case MatrixKind::mu: return "mu";
        case MatrixKind::biglambda: return "biglambda";
        case MatrixKind::logl: return "logl";
        default: return "remark2";
    }
}

// Per-prime-power coefficient tables of all pairs of a family, filled on first use.
class FamilyCoefficients {
public:
    FamilyCoefficients(const Family& family, std::uint64_t N) : family_(family), N_(N) {}

    const Family& family() const { return family_; }
    std::size_t size() const { return family_.size(); }
    std::uint64_t bound() const { return N_; }
    // False once any ramified prime has been evaluated with the product model.
    bool exact() const { return exact_; }

    // Fills every prime table needed for ideals up to the bound; afterwards reads are thread-safe.
    void prepare(const IdealSet& ideals) {
        for (const auto& P : prime_ideals_up_to(ideals.field(), ideals.bound())) tables(P);
    }

    Matrix matrix(const IdealIndex& n, MatrixKind kind) {
        std::size_t s = size();
        if (kind == MatrixKind::remark2) {
            Vector l = standard(n);
            return matrix(n, MatrixKind::lambda) - l * l.adjoint();
        }
        if (kind == MatrixKind::biglambda || kind == MatrixKind::logl) {
            if (!n.is_prime_power()) return Matrix::Zero(s, s);
            const auto& t = tables(n.prime());
            double scale = kind == MatrixKind::biglambda ? std::log(static_cast<double>(n.prime().norm))
                                                         : 1.0 / n.exponent();
            return t.psum[n.exponent()] * scale;
        }
        Matrix m = Matrix::Ones(s, s);
        for (const auto& [P, e] : n.factors) {
            const auto& t = tables(P);
            const auto& src = kind == MatrixKind::lambda ? t.lambda : t.mu;
            if (e >= static_cast<int>(src.size())) return Matrix::Zero(s, s);
            m = m.cwiseProduct(src[e]);
        }
        return m;
    }

    // lambda_pi(n) for every member.
    Vector standard(const IdealIndex& n) {
        Vector v = Vector::Ones(size());
        for (const auto& [P, e] : n.factors) v = v.cwiseProduct(tables(P).standard[e]);
        return v;
    }

private:
    struct Tables {
        std::vector<Matrix> lambda, mu, psum;
        std::vector<Vector> standard;
    };

    const Tables& tables(const PrimeIdeal& P) {
        auto it = cache_.find(P.key());
        if (it != cache_.end()) return it->second;
        std::size_t s = size();
        int kmax = max_exponent(P.norm, N_);
        Tables t;
        t.lambda.assign(kmax + 1, Matrix::Zero(s, s));
        t.psum.assign(kmax + 1, Matrix::Zero(s, s));
        t.standard.assign(kmax + 1, Vector::Zero(s));
        auto triv = trivial_representation(family_.field);
        for (std::size_t i = 0; i < s; ++i) {
            const auto& a = family_.members[i];
            auto sl = local_pair(a, triv, P, kmax, default_model(a, triv));
            for (int e = 0; e <= kmax; ++e) t.standard[e](i) = sl.lambda[e];
            for (std::size_t j = 0; j < s; ++j) {
                const auto& b = family_.members[j];
                auto model = default_model(a, b);
                if (model == RamifiedModel::product && (a.ramified_at(P) || b.ramified_at(P))) exact_ = false;
                auto lp = local_pair(a, b, P, kmax, model);
                if (t.mu.size() < lp.mu.size()) t.mu.resize(lp.mu.size(), Matrix::Zero(s, s));
                for (int e = 0; e <= kmax; ++e) {
                    t.lambda[e](i, j) = lp.lambda[e];
                    t.psum[e](i, j) = lp.psum[e];
                }
                for (std::size_t e = 0; e < lp.mu.size(); ++e) t.mu[e](i, j) = lp.mu[e];
            }
        }
        return cache_.emplace(P.key(), std::move(t)).first->second;
    }

    const Family& family_;
    std::uint64_t N_;
    bool exact_ = true;
    std::map<std::pair<std::uint64_t, int>, Tables> cache_;
};

struct CoefficientMatrix {
    IdealIndex ideal;
    MatrixKind kind = MatrixKind::lambda;
    Matrix entries;
    bool margin_form = false;  // true for the margin matrix built against pi0
};

// The target coefficients of L(s, pi x pi0) for each member, kind in {lambda, mu, logl}.
inline Vector target_vector(const Family& family, const Representation& pi0, const IdealIndex& n, MatrixKind kind) {
    Vector v(family.size());
    auto pi0c = pi0.contragredient();
    SeriesKind sk = kind == MatrixKind::mu ? SeriesKind::mu : kind == MatrixKind::logl ? SeriesKind::logl
                                                                                         : SeriesKind::lambda;
    if (kind == MatrixKind::biglambda) sk = SeriesKind::biglambda;
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto& a = family.members[i];
        auto model = default_model(a, pi0c);
        cd val = 0;
        if (sk == SeriesKind::lambda || sk == SeriesKind::mu) {
            val = 1;
            for (const auto& [P, e] : n.factors) {
                auto lp = local_pair(a, pi0c, P, e, model);
                const auto& src = sk == SeriesKind::lambda ? lp.lambda : lp.mu;
                val *= e < static_cast<int>(src.size()) ? src[e] : cd(0, 0);
            }
        } else if (n.is_prime_power()) {
            auto lp = local_pair(a, pi0c, n.prime(), n.exponent(), model);
            val = lp.psum[n.exponent()] * (sk == SeriesKind::biglambda ? std::log(static_cast<double>(n.prime().norm))
                                                                       : 1.0 / n.exponent());
        }
        v(i) = val;
    }
    return v;
}

inline double diagonal_coefficient(const Representation& pi0, const IdealIndex& n) {
    cd val = 1;
    auto model = default_model(pi0, pi0);
    for (const auto& [P, e] : n.factors) val *= local_pair(pi0, pi0, P, e, model).lambda[e];
    return val.real();
}

// Without pi0: entries (pi, pi') are the kind-coefficients of L(s, pi x pi'~) at n.
// With pi0: the margin matrix lambda_{pi0 x pi0~}(n) [lambda_{pi x pi'~}(n)] - v v^*, where
// v_pi is the kind-coefficient of L(s, pi x pi0); w^T M conj(w) is the margin for weights w.
inline CoefficientMatrix coefficient_matrix(FamilyCoefficients& fc, const IdealIndex& n, MatrixKind kind,
                                            const std::optional<Representation>& pi0 = std::nullopt) {
    if (!pi0) return {n, kind, fc.matrix(n, kind), false};
    if (kind == MatrixKind::remark2) throw UsageError("coefficient_matrix: remark2 takes no pi0");
    Vector v = target_vector(fc.family(), *pi0, n, kind);
    Matrix m = diagonal_coefficient(*pi0, n) * fc.matrix(n, MatrixKind::lambda) - v * v.adjoint();
    return {n, kind, m, true};
}

inline CoefficientMatrix coefficient_matrix(const Family& family, const IdealIndex& n, MatrixKind kind,
                                            const std::optional<Representation>& pi0 = std::nullopt) {
    FamilyCoefficients fc(family, std::max<std::uint64_t>(n.norm, 1));
    return coefficient_matrix(fc, n, kind, pi0);
}

struct PsdResult {
    double min_eigenvalue = 0;
    double spectral_norm = 0;
    bool verdict = true;
};

inline constexpr double kPsdTolerance = 1e-9;

inline double hermitian_defect(const Matrix& m) {
    if (m.size() == 0) return 0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

// The verdict allows -tol * max(spectral norm, scale); scale covers matrices that are differences
// of larger ones and may cancel to rounding noise.
inline PsdResult psd_check(const Matrix& m, double tol = kPsdTolerance, double scale_hint = 0) {
    if (m.rows() != m.cols()) throw UsageError("psd_check: matrix is not square");
    if (m.size() == 0) return {0, 0, true};
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (hermitian_defect(m) > 1e-6 * scale)
        throw DataError("psd_check: matrix is not Hermitian (defect " + std::to_string(hermitian_defect(m)) + ")");
    Matrix h = (m + m.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    double lo = ev(0), hi = ev(ev.size() - 1);
    double norm = std::max(std::abs(lo), std::abs(hi));
    return {lo, norm, lo >= -tol * std::max(norm, scale_hint)};
}

inline PsdResult psd_check(const CoefficientMatrix& m, double tol = kPsdTolerance) { return psd_check(m.entries, tol); }

struct PsdRow {
    IdealIndex ideal;
    MatrixKind kind;
    PsdResult result;
};

// PSD verdicts for every ideal up to N (optionally only ideals coprime to all conductors).
inline std::vector<PsdRow> psd_sweep(const Family& family, std::uint64_t N, MatrixKind kind, double tol = kPsdTolerance,
                                     bool unramified_only = false) {
    IdealSet ideals(family.field, N);
    FamilyCoefficients fc(family, N);
    fc.prepare(ideals);
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < ideals.size(); ++i) {
        bool ok = true;
        if (unramified_only)
            for (const auto& m : family.members)
                if (!coprime(ideals[i], m.conductor())) ok = false;
        if (ok) picked.push_back(i);
    }
    std::vector<PsdRow> rows(picked.size());
    parallel_for(picked.size(), [&](std::size_t k) {
        const auto& n = ideals[picked[k]];
        double hint = kind == MatrixKind::remark2 ? fc.matrix(n, MatrixKind::lambda).norm() : 0.0;
        rows[k] = {n, kind, psd_check(fc.matrix(n, kind), tol, hint)};
    });
    return rows;
}

inline double margin(const Matrix& m, const Vector& w) { return (w.transpose() * m * w.conjugate())(0, 0).real(); }

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

// Trial 0 is the normalized all-ones vector, trials 1..s the spikes, then seeded complex Gaussians.
inline Vector trial_weights(std::size_t s, std::size_t trial, std::uint64_t seed, const IdealIndex& n) {
    Vector w = Vector::Zero(s);
    if (trial == 0) {
        w.setOnes();
    } else if (trial <= s) {
        w(trial - 1) = 1;
    } else {
        SplitMix64 rng(mix_keys({seed, fnv1a(n.id()), trial}));
        for (std::size_t i = 0; i < s; ++i) w(i) = rng.complex_normal();
    }
    double nw = w.norm();
    return nw > 0 ? Vector(w / nw) : w;
}

enum class CoverTarget { lambda, mu, log };

inline MatrixKind target_kind(CoverTarget t) {
    return t == CoverTarget::lambda ? MatrixKind::lambda : t == CoverTarget::mu ? MatrixKind::mu : MatrixKind::logl;
}

inline const char* to_string(CoverTarget t) {
    return t == CoverTarget::lambda ? "lambda" : t == CoverTarget::mu ? "mu" : "log";
}

struct BilinearResult {
    IdealIndex ideal;
    double worst_margin = 0;   // min over the sampled weight vectors
    Vector argmin;             // the minimizing weights
    double exact_min = 0;      // min eigenvalue of the margin matrix (worst unit weights)
    double scale = 0;          // spectral norm of the margin matrix
    std::size_t trials = 0;
};

inline BilinearResult bilinear_inequality_check(FamilyCoefficients& fc, CoverTarget target, const Representation& pi0,
                                                const IdealIndex& n, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw UsageError("bilinear_inequality_check: trials must be >= 1");
    auto cm = coefficient_matrix(fc, n, target_kind(target), pi0);
    std::size_t s = fc.size();
    BilinearResult r{n, 0, Vector::Zero(s), 0, 0, 0};
    std::size_t total = trials + s + 1;
    for (std::size_t t = 0; t < total; ++t) {
        Vector w = trial_weights(s, t, seed, n);
        double mg = margin(cm.entries, w);
        if (t == 0 || mg < r.worst_margin) {
            r.worst_margin = mg;
            r.argmin = w;
        }
    }
    r.trials = total;
    auto pr = psd_check(cm.entries, 0);
    r.exact_min = pr.min_eigenvalue;
    r.scale = pr.spectral_norm;
    return r;
}

inline BilinearResult bilinear_inequality_check(CoverTarget target, const Family& family, const Representation& pi0,
                                                const IdealIndex& n, std::size_t trials, std::uint64_t seed) {
    FamilyCoefficients fc(family, n.norm);
    return bilinear_inequality_check(fc, target, pi0, n, trials, seed);
}

inline std::vector<BilinearResult> bilinear_sweep(const Family& family, CoverTarget target, const Representation& pi0,
                                                  std::uint64_t N, std::size_t trials, std::uint64_t seed,
                                                  bool unramified_only = false) {
    IdealSet ideals(family.field, N);
    FamilyCoefficients fc(family, N);
    fc.prepare(ideals);
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < ideals.size(); ++i) {
        bool ok = true;
        if (unramified_only) {
            for (const auto& m : family.members)
                if (!coprime(ideals[i], m.conductor())) ok = false;
            if (!coprime(ideals[i], pi0.conductor())) ok = false;
        }
        if (ok) picked.push_back(i);
    }
    std::vector<BilinearResult> rows(picked.size());
    parallel_for(picked.size(),
                 [&](std::size_t k) { rows[k] = bilinear_inequality_check(fc, target, pi0, ideals[picked[k]], trials, seed); });
    return rows;
}

// A rank-one-sum realization: covered(x,y) = sum d_j u_j(x) conj(u_j(y)) N(n_j)^-s and
// cover(x,y) = sum u_j(x) conj(u_j(y)) N(n_j)^-s.
struct CoverTerm {
    cd d;
    IdealIndex ideal;
    Vector u;
};

struct CoverDecomposition {
    std::vector<CoverTerm> terms;
    std::size_t members = 0;
    std::int64_t field = 1;

    void validate() const {
        for (const auto& t : terms) {
            if (std::abs(t.d) > 1 + 1e-12) throw InvariantError("cover term with |d| > 1");
            if (static_cast<std::size_t>(t.u.size()) != members) throw InvariantError("cover term of wrong length");
        }
    }

    Matrix covered(const IdealIndex& n) const { return accumulate(n, true); }
    Matrix cover(const IdealIndex& n) const { return accumulate(n, false); }

private:
    Matrix accumulate(const IdealIndex& n, bool with_d) const {
        Matrix m = Matrix::Zero(members, members);
        for (const auto& t : terms)
            if (t.ideal == n) m += (with_d ? t.d : cd(1, 0)) * t.u * t.u.adjoint();
        return m;
    }
};

// Entry (x,y) of a decomposition equals u(x) conj(u(y)); the Dirichlet series convention above
// is preserved by each operation below.
inline CoverDecomposition cover_scale(const CoverDecomposition& a, cd z) {
    CoverDecomposition out{{}, a.members, a.field};
    if (z == cd(0, 0)) return out;
    double r = std::abs(z);
    for (const auto& t : a.terms) out.terms.push_back({t.d * z / r, t.ideal, t.u * std::sqrt(r)});
    out.validate();
    return out;
}

inline CoverDecomposition cover_add(const CoverDecomposition& a, const CoverDecomposition& b) {
    if (a.members != b.members) throw UsageError("cover_add: decompositions over different families");
    CoverDecomposition out = a;
    out.terms.insert(out.terms.end(), b.terms.begin(), b.terms.end());
    out.validate();
    return out;
}

inline CoverDecomposition cover_mul(const CoverDecomposition& a, const CoverDecomposition& b, std::uint64_t truncation) {
    if (a.members != b.members) throw UsageError("cover_mul: decompositions over different families");
    if (truncation < 1) throw UsageError("cover_mul: truncation must be >= 1");
    CoverDecomposition out{{}, a.members, a.field};
    for (const auto& s : a.terms)
        for (const auto& t : b.terms) {
            if (s.ideal.norm > truncation / t.ideal.norm) continue;
            out.terms.push_back({s.d * t.d, multiply(s.ideal, t.ideal), s.u.cwiseProduct(t.u)});
        }
    if (out.terms.empty() && !a.terms.empty() && !b.terms.empty())
        throw UsageError("cover_mul: truncation " + std::to_string(truncation) + " keeps no product term");
    out.validate();
    return out;
}

// exp(A) = sum_k A^k / k!, truncated at the norm bound; A must have no unit-ideal term.
inline CoverDecomposition cover_exp(const CoverDecomposition& a, std::uint64_t truncation) {
    if (truncation < 1) throw UsageError("cover_exp: truncation must be >= 1");
    for (const auto& t : a.terms)
        if (t.ideal.is_unit()) throw UsageError("cover_exp: the series has a unit-ideal term");
    CoverDecomposition out{{}, a.members, a.field};
    IdealIndex one{a.field, 1, {}};
    out.terms.push_back({1, one, Vector::Ones(a.members)});
    CoverDecomposition power{{{1, one, Vector::Ones(a.members)}}, a.members, a.field};
    double fact = 1;
    for (int k = 1;; ++k) {
        CoverDecomposition next{{}, a.members, a.field};
        for (const auto& s : power.terms)
            for (const auto& t : a.terms)
                if (s.ideal.norm <= truncation / t.ideal.norm)
                    next.terms.push_back({s.d * t.d, multiply(s.ideal, t.ideal), s.u.cwiseProduct(t.u)});
        if (next.terms.empty()) break;
        fact *= k;
        power = next;
        out = cover_add(out, cover_scale(power, 1.0 / fact));
    }
    return out;
}

enum class CoverOp { scale, add, mul, exp };

inline CoverDecomposition cover_ops(const CoverDecomposition& a, const std::optional<CoverDecomposition>& b, CoverOp op,
                                    std::uint64_t truncation, cd z = 1) {
    switch (op) {
        case CoverOp::scale: return cover_scale(a, z);
        case CoverOp::add:
            if (!b) throw UsageError("cover_ops(add) needs a second decomposition");
            return cover_add(a, *b);
        case CoverOp::mul:
            if (!b) throw UsageError("cover_ops(mul) needs a second decomposition");
            return cover_mul(a, *b, truncation);
        default: return cover_exp(a, truncation);
    }
}

// The log L term of the characters at p^f: u(chi) = chi(p)^f / sqrt(f), d = 1.
inline CoverTerm gl1_log_term(const Family& family, std::uint64_t p, int f) {
    for (const auto& m : family.members) {
        if (m.degree() != 1 || !m.character()) throw UsageError("gl1_log_decomposition: family member is not GL1");
        if (m.character()->modulus % p == 0)
            throw UnsupportedError("log-cover term at the ramified prime " + std::to_string(p) + " for " + m.label());
    }
    Vector u(family.size());
    for (std::size_t i = 0; i < family.size(); ++i) u(i) = cpow((*family.members[i].character())(p), f) / std::sqrt(f);
    return {1, rational_ideal(ipow(p, f)), u};
}

inline CoverDecomposition gl1_log_decomposition(const Family& family, std::uint64_t bound) {
    CoverDecomposition d{{}, family.size(), 1};
    for (auto p : primes_up_to(bound)) {
        bool ramified = false;
        for (const auto& m : family.members)
            if (m.character() && m.character()->modulus % p == 0) ramified = true;
        if (ramified) continue;
        std::uint64_t q = p;
        for (int f = 1;; ++f) {
            d.terms.push_back(gl1_log_term(family, p, f));
            if (q > bound / p) break;
            q *= p;
        }
    }
    d.validate();
    return d;
}

// Max entrywise gap between a decomposition and reference matrices over the given ideals.
template <class Reference>
double reconstruction_residual(const CoverDecomposition& d, const std::vector<IdealIndex>& ideals, Reference ref,
                               bool cover_side = false) {
    double worst = 0;
    for (const auto& n : ideals) {
        Matrix got = cover_side ? d.cover(n) : d.covered(n);
        Matrix want = ref(n);
        if (want.size() == 0) continue;
        worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace rslab
