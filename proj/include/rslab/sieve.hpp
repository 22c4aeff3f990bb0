#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "rslab/coeffs.hpp"
#include "rslab/covers.hpp"
#include "rslab/errors.hpp"
#include "rslab/ideals.hpp"
#include "rslab/localdata.hpp"
#include "rslab/parallel.hpp"

namespace rslab {

// Large sieve constant

inline constexpr std::size_t kGramBlock = 1024;

inline SeriesKind series_kind(CoverTarget t) {
    return t == CoverTarget::lambda ? SeriesKind::lambda : t == CoverTarget::mu ? SeriesKind::mu : SeriesKind::logl;
}

struct SieveMatrix {
    Matrix A;                         // rows: members, columns: kept ideals
    std::vector<IdealIndex> columns;
    double max_scale = 1;             // largest column scaling applied
    bool exact = true;
};

// Rows are the coefficients of L(s, pi x pi0) (standard coefficients without pi0); with the weighted
// norm each column is divided by sqrt(lambda_{pi0 x pi0~}(n)) and zero-weight columns are dropped.
inline SieveMatrix sieve_matrix(const Family& family, std::uint64_t N, const std::optional<Representation>& pi0,
                                CoverTarget kind, bool weighted) {
    if (family.size() == 0) throw UsageError("sieve_constant: empty family");
    auto ideals = std::make_shared<const IdealSet>(family.field, N);
    std::optional<Representation> partner;
    if (pi0) partner = pi0->contragredient();
    std::vector<CoefficientSeries> rows;
    for (const auto& m : family.members) rows.push_back(expand_global(m, partner, ideals, series_kind(kind)));
    std::vector<double> scale(ideals->size(), 1.0);
    if (weighted && pi0) {
        auto d = expand_global(*pi0, *pi0, ideals, SeriesKind::lambda);
        for (std::size_t k = 0; k < ideals->size(); ++k) scale[k] = d.values[k].real();
    }
    SieveMatrix out;
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < ideals->size(); ++k)
        if (scale[k] > 0) keep.push_back(k);
    out.A.resize(static_cast<Eigen::Index>(family.size()), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        double s = 1 / std::sqrt(scale[keep[c]]);
        out.max_scale = std::max(out.max_scale, s);
        out.columns.push_back((*ideals)[keep[c]]);
        for (std::size_t r = 0; r < rows.size(); ++r) out.A(r, c) = rows[r].values[keep[c]] * s;
    }
    for (const auto& r : rows) out.exact = out.exact && r.exact;
    return out;
}

// A A^* summed over fixed column blocks, reduced in block order.
inline Matrix gram(const Matrix& A) {
    std::size_t cols = static_cast<std::size_t>(A.cols());
    std::size_t blocks = (cols + kGramBlock - 1) / kGramBlock;
    std::vector<Matrix> part(blocks);
    parallel_for(blocks, [&](std::size_t b) {
        auto start = static_cast<Eigen::Index>(b * kGramBlock);
        auto width = static_cast<Eigen::Index>(std::min(kGramBlock, cols - b * kGramBlock));
        const auto blk = A.middleCols(start, width);
        part[b] = blk * blk.adjoint();
    });
    Matrix G = Matrix::Zero(A.rows(), A.rows());
    for (const auto& p : part) G += p;
    return G;
}

inline double largest_eigenvalue(const Matrix& G) {
    if (G.size() == 0) return 0;
    Matrix h = (G + G.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

struct PowerIteration {
    double value = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

// Starts from the best of `starts` seeded random unit vectors, then iterates the Rayleigh quotient.
inline PowerIteration power_iteration(const Matrix& G, std::size_t starts = 200, std::uint64_t seed = 1,
                                      double tol = 1e-10, std::size_t cap = 100000) {
    Eigen::Index s = G.rows();
    if (s == 0) return {0, 0, true};
    Vector best;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < starts; ++t) {
        SplitMix64 rng(mix_keys({seed, t}));
        Vector v(s);
        for (Eigen::Index i = 0; i < s; ++i) v(i) = rng.complex_normal();
        v.normalize();
        double q = (v.adjoint() * G * v)(0, 0).real();
        if (q > best_q) best_q = q, best = v;
    }
    PowerIteration out{best_q, 0, false};
    Vector v = best;
    for (std::size_t it = 1; it <= cap; ++it) {
        Vector w = G * v;
        double nw = w.norm();
        if (nw == 0) return {0, it, true};
        v = w / nw;
        double q = (v.adjoint() * G * v)(0, 0).real();
        out.iterations = it;
        if (std::abs(q - out.value) <= tol * std::max(1.0, std::abs(q))) {
            out.value = std::max(out.value, q);
            out.converged = true;
            return out;
        }
        out.value = std::max(out.value, q);
    }
    return out;
}

struct SieveConstant {
    double value = 0;
    bool zero_matrix = false;
    std::size_t columns = 0;
    double max_scale = 1;
    double frobenius2 = 0;  // trace of the Gram matrix, the trivial upper bound
    bool exact = true;
};

inline SieveConstant sieve_constant(const Family& family, std::uint64_t N, const std::optional<Representation>& pi0 = std::nullopt,
                                    CoverTarget kind = CoverTarget::lambda, bool weighted = true) {
    auto sm = sieve_matrix(family, N, pi0, kind, weighted);
    SieveConstant out;
    out.columns = static_cast<std::size_t>(sm.A.cols());
    out.max_scale = sm.max_scale;
    out.exact = sm.exact;
    if (sm.A.size() == 0 || sm.A.cwiseAbs().maxCoeff() == 0) {
        out.zero_matrix = true;
        return out;
    }
    Matrix G = gram(sm.A);
    out.frobenius2 = G.trace().real();
    out.value = largest_eigenvalue(G);
    return out;
}

struct BoundRow {
    std::uint64_t N = 0;
    double measured = 0;
    double trivial = 0;    // sum of squared entries; N |S| when every entry has modulus one
    double thm = 0;        // N + Q^n |S|
    double dk = 0;         // N + sqrt(N) Q^(n/2) |S|
    double tz = 0;         // N + Q^(4 theta n^2 + n) |S|
    double jiang = 0;      // N + N^(1/2 + theta) Q^(n(1/2 - theta)) |S|
};

inline const std::vector<std::string>& bound_columns() {
    static const std::vector<std::string> cols{"N", "measured", "trivial", "thm_shape", "dk_shape", "tz_shape", "jiang_shape"};
    return cols;
}

// The last four columns drop the o(1) factors and implied constants, so they are shapes only.
inline std::vector<BoundRow> bound_table(const Family& family, const std::vector<std::uint64_t>& Ns,
                                         const std::optional<Representation>& pi0 = std::nullopt) {
    double Q = family.Q(), S = static_cast<double>(family.size());
    int n = family.max_degree();
    double th = theta_n(n);
    std::vector<BoundRow> rows;
    for (auto N : Ns) {
        auto c = sieve_constant(family, N, pi0);
        double x = static_cast<double>(N);
        rows.push_back({N, c.value, c.frobenius2, x + std::pow(Q, n) * S,
                        x + std::sqrt(x) * std::pow(Q, n / 2.0) * S, x + std::pow(Q, 4 * th * n * n + n) * S,
                        x + std::pow(x, 0.5 + th) * std::pow(Q, n * (0.5 - th)) * S});
    }
    return rows;
}

// Selberg sieve

struct GFactor {
    double value = 1;
    std::vector<PrimeIdeal> vanishing;  // primes whose local factor is 1, so g = 0 there
};

// g(d) = prod_{p | d} (1 - L(1, pi_p x pi_p~)^-1), with the local factor of the Rankin-Selberg model in use.
inline double g_prime(const Representation& rep, const PrimeIdeal& P) {
    auto lp = local_pair(rep, rep, P, 1, default_model(rep, rep));
    Kahan<cd> acc;
    double x = 1;
    for (std::size_t k = 1; k < lp.mu.size(); ++k) {
        x /= static_cast<double>(P.norm);
        acc.add(-lp.mu[k] * x);
    }
    return acc.value().real();
}

inline GFactor g_factor(const Representation& rep, const IdealIndex& d) {
    if (!d.squarefree()) throw UsageError("g_factor: ideal " + d.id() + " is not squarefree");
    GFactor out;
    for (const auto& [P, e] : d.factors) {
        double g = g_prime(rep, P);
        if (g == 0) out.vanishing.push_back(P);
        out.value *= g;
    }
    return out;
}

struct SieveWeights {
    std::string rep;
    double z = 1;
    std::vector<IdealIndex> support;   // squarefree d | P with Nd <= z, canonical order
    std::vector<double> rho;
    std::vector<PrimeIdeal> P;         // primes with Np <= z and g(p) != 0
    std::vector<PrimeIdeal> excluded;  // primes with Np <= z and g(p) = 0
    std::vector<double> g;             // g(d) over the support
    double G = 1;                      // sum over the support of prod g/(1-g)

    double closed_form_diagonal() const { return 1 / G; }

    double at(const IdealIndex& d) const {
        for (std::size_t i = 0; i < support.size(); ++i)
            if (support[i] == d) return rho[i];
        return 0;
    }
};

inline SieveWeights selberg_weights(const Representation& rep, double z) {
    if (!(z >= 1)) throw UsageError("selberg_weights: z must be >= 1");
    auto bound = static_cast<std::uint64_t>(std::floor(z));
    SieveWeights w;
    w.rep = rep.label();
    w.z = z;
    std::map<std::pair<std::uint64_t, int>, double> gp;
    for (const auto& P : prime_ideals_up_to(rep.field(), bound)) {
        double g = g_prime(rep, P);
        if (g >= 1) throw InvariantError("selberg_weights: g(p) >= 1 at " + P.id());
        if (g == 0) {
            w.excluded.push_back(P);
        } else {
            w.P.push_back(P);
            gp[P.key()] = g;
        }
    }
    IdealSet ideals(rep.field(), bound);
    std::vector<double> h;
    for (const auto& d : ideals) {
        if (!d.squarefree()) continue;
        bool in = true;
        double g = 1, hd = 1;
        for (const auto& [P, e] : d.factors) {
            auto it = gp.find(P.key());
            if (it == gp.end()) {
                in = false;
                break;
            }
            g *= it->second;
            hd *= it->second / (1 - it->second);
        }
        if (!in) continue;
        w.support.push_back(d);
        w.g.push_back(g);
        h.push_back(hd);
    }
    Kahan<double> G;
    for (double x : h) G.add(x);
    w.G = G.value();
    // rho(d) = mu(d) prod_{p|d} (1-g(p))^-1 G_d(z/Nd) / G(z), G_d restricted to e coprime to d.
    w.rho.resize(w.support.size());
    for (std::size_t i = 0; i < w.support.size(); ++i) {
        const auto& d = w.support[i];
        double lim = z / static_cast<double>(d.norm);
        Kahan<double> Gd;
        for (std::size_t j = 0; j < w.support.size() && static_cast<double>(w.support[j].norm) <= lim; ++j)
            if (coprime(w.support[j], d)) Gd.add(h[j]);
        double f = d.factors.size() % 2 ? -1.0 : 1.0;
        for (const auto& [P, e] : d.factors) f /= 1 - gp[P.key()];
        w.rho[i] = f * Gd.value() / w.G;
    }
    return w;
}

// Sum_{d, d'} rho(d) rho(d') g([d, d']) by brute force over the support.
inline double diagonal_brute_force(const Representation& rep, const SieveWeights& w) {
    std::map<std::pair<std::uint64_t, int>, double> gp;
    for (const auto& P : w.P) gp[P.key()] = g_prime(rep, P);
    Kahan<double> acc;
    for (std::size_t i = 0; i < w.support.size(); ++i)
        for (std::size_t j = 0; j < w.support.size(); ++j) {
            double g = 1;
            auto l = gcd_lcm(w.support[i], w.support[j]).second;
            for (const auto& [P, e] : l.factors) g *= gp.at(P.key());
            acc.add(w.rho[i] * w.rho[j] * g);
        }
    return acc.value();
}

// Test function

// phi(y) = e^(1/3) exp(1 - 1/(1 - y^2/4)) on (-2, 2); phi >= 1 on [0, 1] with equality at y = 1.
struct BumpFunction {
    static constexpr double kScale = 1.3956124250860895;  // e^(1/3)

    double operator()(double y) const {
        if (std::abs(y) >= 2) return 0;
        double u = 1 - y * y / 4;
        return kScale * std::exp(1 - 1 / u);
    }

    // hat(s) = int phi(y) e^(s y) dy
    double hat(double s) const {
        boost::math::quadrature::tanh_sinh<double> integrator;
        auto f = [&](double y) { return (*this)(y)*std::exp(s * y); };
        return integrator.integrate(f, -2.0, 2.0, 1e-12);
    }
};

struct SmoothSum {
    double lhs = 0;
    double main = 0;
    double diff = 0;
    bool shape_only = false;  // residue unknown
    double residue = 0;
};

// Residue at s = 1 of L(s, a x b~) where it is known in closed form: pairs of characters over Q.
inline std::optional<double> known_residue(const Representation& a, const Representation& b) {
    if (!(a.field() == NumberFieldSpec::rationals()) || !(b.field() == NumberFieldSpec::rationals())) return std::nullopt;
    bool ta = a.kind() == RepKind::trivial || a.character(), tb = b.kind() == RepKind::trivial || b.character();
    if (!ta || !tb) return std::nullopt;
    auto chi = [](const Representation& r) {
        return r.character() ? *r.character() : DirichletCharacter{1, 0, {cd(1, 0)}};
    };
    auto x = chi(a), y = chi(b);
    // The pole survives exactly when x conj(y) is induced by the principal character.
    std::uint64_t L = std::lcm(x.modulus, y.modulus);
    for (std::uint64_t n = 1; n <= L; ++n)
        if (gcd_u64(n, L) == 1 && std::abs(x(n) * std::conj(y(n)) - cd(1, 0)) > 1e-9) return 0.0;
    return 1.0;
}

inline SmoothSum smooth_sum_residue(const Representation& a, const Representation& b, double x, double T,
                                    const IdealIndex& d, const BumpFunction& phi = {},
                                    std::optional<double> residue = std::nullopt) {
    if (!(x >= 1) || !(T >= 1)) throw UsageError("smooth_sum_residue: x and T must be >= 1");
    auto limit = static_cast<std::uint64_t>(std::floor(x * std::exp(2 / T)));
    auto ideals = std::make_shared<const IdealSet>(a.field(), std::max<std::uint64_t>(limit, 1));
    auto s = expand_global(a, b, ideals, SeriesKind::lambda);
    Kahan<double> lhs;
    for (std::size_t i = 0; i < ideals->size(); ++i) {
        const auto& n = (*ideals)[i];
        if (!divides(d, n)) continue;
        lhs.add(phi(T * std::log(static_cast<double>(n.norm) / x)) * s.values[i].real());
    }
    SmoothSum out;
    out.lhs = lhs.value();
    auto res = residue ? residue : known_residue(a, b);
    if (!res) {
        out.shape_only = true;
        out.main = out.diff = std::nan("");
        return out;
    }
    out.residue = *res;
    out.main = g_factor(a, d).value * x * phi.hat(1 / T) / T * *res;
    out.diff = out.lhs - out.main;
    return out;
}

// Weight vectors

struct WeightVector {
    std::vector<std::pair<IdealIndex, cd>> values;  // canonical ideal order

    cd at(const IdealIndex& n) const {
        for (const auto& [m, v] : values)
            if (m == n) return v;
        return 0;
    }
    double norm2() const {
        Kahan<double> acc;
        for (const auto& [n, v] : values) acc.add(std::norm(v));
        return std::sqrt(acc.value());
    }
    // ||a||_{2,pi0}^2 = sum lambda_{pi0 x pi0~}(n) |a(n)|^2
    double weighted_norm2(const Representation& pi0) const {
        Kahan<double> acc;
        for (const auto& [n, v] : values) acc.add(diagonal_coefficient(pi0, n) * std::norm(v));
        return std::sqrt(acc.value());
    }

    // a(n) = 1 on the ideals with Nn in (x, e^{1/T} x].
    static WeightVector ones(const NumberFieldSpec& field, double x, double T) {
        WeightVector w;
        auto hi = static_cast<std::uint64_t>(std::floor(x * std::exp(1 / T)));
        for (const auto& n : IdealSet(field, hi))
            if (static_cast<double>(n.norm) > x) w.values.push_back({n, 1});
        return w;
    }
};

inline bool sifted(const IdealIndex& n, double z) {
    for (const auto& [P, e] : n.factors)
        if (static_cast<double>(P.norm) <= z) return false;
    return true;
}

struct SiftedCheck {
    double lhs = 0;
    double rhs_shape = 0;        // (1/log z)(x/T + shape) sum |a|^2 lambda_{pi0 x pi0~}, constants omitted
    double single_lhs = 0;       // sum over sifted n of lambda_{pi0 x pi0~}(n)
    double single_rhs_shape = 0;
    std::size_t sifted_count = 0;
};

inline SiftedCheck sifted_sum_check(const Family& family, const Representation& pi0, double x, double T, double z,
                                    const WeightVector& a, CoverTarget kind = CoverTarget::lambda) {
    if (!(z >= 1)) throw UsageError("sifted_sum_check: z must be >= 1");
    double hi = x * std::exp(1 / T);
    std::vector<std::pair<IdealIndex, cd>> kept;
    for (const auto& [n, v] : a.values)
        if (static_cast<double>(n.norm) > x && static_cast<double>(n.norm) <= hi && sifted(n, z)) kept.push_back({n, v});
    SiftedCheck out;
    out.sifted_count = kept.size();
    auto pi0c = pi0.contragredient();
    for (const auto& m : family.members) {
        Kahan<cd> acc;
        for (const auto& [n, v] : kept) acc.add(v * target_vector(Family{family.field, {m}, ""}, pi0, n, target_kind(kind))(0));
        out.lhs += std::norm(acc.value());
    }
    Kahan<double> wn, single;
    for (const auto& [n, v] : kept) wn.add(std::norm(v) * diagonal_coefficient(pi0, n));
    for (const auto& n : IdealSet(pi0.field(), static_cast<std::uint64_t>(std::floor(hi))))
        if (static_cast<double>(n.norm) > x && sifted(n, z)) single.add(diagonal_coefficient(pi0, n));
    out.single_lhs = single.value();
    double DF = static_cast<double>(std::abs(family.field.discriminant()));
    double deg = family.field.degree();
    int n = family.max_degree(), n0 = pi0.degree();
    double Q = family.Q(), lz = std::log(std::max(z, std::numbers::e));
    double shape = std::pow(DF, -n * n / 2.0) * std::pow(Q, n) * std::pow(z, 2.0 * n * n + 2) *
                   std::pow(T, deg * n * n / 2) * static_cast<double>(family.size());
    out.rhs_shape = (x / T + shape) / lz * wn.value();
    out.single_rhs_shape = x / (T * lz) + std::pow(DF, -n0 * n0 / 2.0) * std::pow(analytic_conductor(pi0, 0), n0) *
                                              std::pow(z, 2.0 * n0 * n0 + 2) * std::pow(T, deg * n0 * n0 / 2);
    return out;
}

struct DiagonalRatio {
    double ratio = 0;
    double sum = 0;
    bool log_zero = false;   // z = 1
    bool shape_only = false; // residue unknown
};

// (sum_{Nn <= z} lambda_{pi x pi~}(n)/Nn) / ((log z) Res).
inline DiagonalRatio diagonal_lower_bound_check(const Representation& rep, double z, std::optional<double> residue = std::nullopt) {
    if (!(z >= 1)) throw UsageError("diagonal_lower_bound_check: z must be >= 1");
    auto bound = static_cast<std::uint64_t>(std::floor(z));
    auto s = expand_global(rep, rep, bound, SeriesKind::lambda);
    Kahan<double> acc;
    for (std::size_t i = 0; i < s.size(); ++i) acc.add(s.values[i].real() / static_cast<double>((*s.ideals)[i].norm));
    DiagonalRatio out;
    out.sum = acc.value();
    auto res = residue ? residue : known_residue(rep, rep);
    if (z == 1) {
        out.log_zero = true;
        out.ratio = out.sum;
        return out;
    }
    if (!res) {
        out.shape_only = true;
        out.ratio = std::nan("");
        return out;
    }
    out.ratio = out.sum / (std::log(z) * *res);
    return out;
}

// Mean value of Dirichlet polynomials

struct MvtResult {
    double value = 0;
    double shape = 0;           // X log X, or log X for the tail
    bool undersampled = false;  // fewer than 2 nodes per radian of the fastest oscillation
    std::size_t panels = 0;
    std::uint64_t truncation = 0;
};

namespace detail {
// sum over members of int_{-T}^{T} |sum_n c_n N(n)^{-iv}|^2 dv by composite 16-point Gauss-Legendre.
inline double mean_square(const std::vector<std::vector<std::pair<double, cd>>>& polys, double T, std::size_t panels) {
    double h = 2 * T / static_cast<double>(panels);
    Kahan<double> total;
    for (const auto& poly : polys) {
        for (std::size_t k = 0; k < panels; ++k) {
            double a = -T + h * static_cast<double>(k);
            auto f = [&](double v) {
                cd s = 0;
                for (const auto& [logn, c] : poly) s += c * std::polar(1.0, -v * logn);
                return std::norm(s);
            };
            total.add(boost::math::quadrature::gauss<double, 16>::integrate(f, a, a + h));
        }
    }
    return total.value();
}
}  // namespace detail

inline std::size_t mvt_panels(double T, double max_log) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(2 * T * max_log / 4))); }

// sum_pi int_{-T}^{T} |sum_{Nn <= X} mu_{pi x pi0}(n) Nn^{-1/2-iv}|^2 dv; with tail = true the sum runs over
// X < Nn <= truncation at exponent 1 + 1/log Y (truncation defaults to X^2).
inline MvtResult mvt_mu(const Family& family, const std::optional<Representation>& pi0, double X, double T, double Y,
                        bool tail = false, std::uint64_t truncation = 0, std::size_t panels = 0) {
    if (!(X >= std::numbers::e) || !(Y >= std::numbers::e)) throw UsageError("mvt_mu: X and Y must be >= e");
    if (!(T > 0)) throw UsageError("mvt_mu: T must be positive");
    MvtResult out;
    auto Xi = static_cast<std::uint64_t>(std::floor(X));
    std::uint64_t hi = tail ? (truncation ? truncation : Xi * Xi) : Xi;
    if (hi < Xi) throw UsageError("mvt_mu: truncation below X");
    out.truncation = hi;
    out.shape = tail ? std::log(X) : X * std::log(X);
    if (family.size() == 0) return out;
    double sigma = tail ? 1 + 1 / std::log(Y) : 0.5;
    auto ideals = std::make_shared<const IdealSet>(family.field, hi);
    std::optional<Representation> partner;
    if (pi0) partner = pi0->contragredient();
    std::vector<std::vector<std::pair<double, cd>>> polys;
    for (const auto& m : family.members) {
        auto s = expand_global(m, partner, ideals, SeriesKind::mu);
        std::vector<std::pair<double, cd>> poly;
        for (std::size_t i = 0; i < ideals->size(); ++i) {
            double nn = static_cast<double>((*ideals)[i].norm);
            bool in = tail ? (*ideals)[i].norm > Xi : true;
            if (in && s.values[i] != cd(0, 0)) poly.push_back({std::log(nn), s.values[i] * std::pow(nn, -sigma)});
        }
        polys.push_back(std::move(poly));
    }
    double max_log = std::log(static_cast<double>(hi));
    std::size_t need = mvt_panels(T, max_log);
    out.panels = panels ? panels : need;
    out.undersampled = 16.0 * static_cast<double>(out.panels) < 2 * T * max_log * 2;
    out.value = detail::mean_square(polys, T, out.panels);
    return out;
}

}  // namespace rslab
