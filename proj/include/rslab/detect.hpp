#pragma once

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rslab/coeffs.hpp"
#include "rslab/errors.hpp"
#include "rslab/ideals.hpp"
#include "rslab/localdata.hpp"
#include "rslab/numeric.hpp"
#include "rslab/parallel.hpp"

namespace rslab {

// ---------------------------------------------------------------- constants

inline constexpr double kConstraintTarget = 1 - 1e-8;
inline constexpr double kXi = 1 + 1e-7;
inline constexpr double kChebyshev = 1.04;  // psi(x) < 1.03883 x for x > 0

struct Constants {
    double alpha = 0, A = 0, R = 0, V = 0, A0 = 0, A1 = 0, xi = kXi;
    double residual_R = 0, residual_A0 = 0, residual_A1 = 0, residual_constraint = 0, residual_stationary = 0;

    double max_residual() const {
        return std::max({residual_R, residual_A0, residual_A1, residual_constraint, residual_stationary});
    }
};

namespace detail {

// R(alpha) from the constraint 4 e alpha (2/R)^(alpha-1) = 1 - 1e-8.
inline double constraint_log_R(double a) {
    return std::numbers::ln2 + (std::log(4 * std::numbers::e * a) - std::log(kConstraintTarget)) / (a - 1);
}

inline double objective(double a) {
    double R = std::exp(constraint_log_R(a));
    return std::sqrt(R * R - 1) * (std::log(4 * std::numbers::e * a) + (a - 1) * std::numbers::ln2);
}

inline double objective_derivative(double a) {
    double logR = constraint_log_R(a);
    double R2 = std::exp(2 * logR);
    double A = std::sqrt(R2 - 1);
    double dlogR = ((a - 1) / a - (std::log(4 * std::numbers::e * a) - std::log(kConstraintTarget))) / ((a - 1) * (a - 1));
    double dA = R2 * dlogR / A;
    double L = std::log(4 * std::numbers::e * a) + (a - 1) * std::numbers::ln2;
    return dA * L + A * (1 / a + std::numbers::ln2);
}

template <class F>
double bisect(F f, double lo, double hi, double tol, const char* what) {
    double flo = f(lo), fhi = f(hi);
    if (!(flo * fhi <= 0)) throw InvariantError(std::string("failed to bracket ") + what);
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if ((fm <= 0) == (flo <= 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline Constants solve_constants() {
    const double phi = (std::sqrt(5.0) - 1) / 2;
    double lo = 1.01, hi = 100;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = detail::objective(x1), f2 = detail::objective(x2);
    while (hi - lo > 1e-4) {
        if (f1 < f2) {
            hi = x2, x2 = x1, f2 = f1;
            x1 = hi - phi * (hi - lo), f1 = detail::objective(x1);
        } else {
            lo = x1, x1 = x2, f1 = f2;
            x2 = lo + phi * (hi - lo), f2 = detail::objective(x2);
        }
    }
    Constants c;
    c.alpha = detail::bisect(detail::objective_derivative, lo, hi, 1e-12, "the stationary point of the objective");
    c.R = std::exp(detail::constraint_log_R(c.alpha));
    c.A = std::sqrt(c.R * c.R - 1);
    c.V = 2 * std::pow(4 * std::numbers::e * c.alpha, 1 / (c.alpha - 1)) + 0.38;
    c.A0 = 1 / (std::numbers::e * c.V);
    double slope = (c.alpha - 1) / (2 * c.alpha);
    auto a1_eq = [&](double x) { return x * std::exp(1 - slope * x) - 1 / c.V; };
    c.A1 = detail::bisect(a1_eq, std::max(2.0, 1 / slope), 100, 1e-13, "A1");

    c.residual_R = std::abs(c.R * c.R - c.A * c.A - 1);
    c.residual_A0 = std::abs(c.A0 * std::numbers::e * c.V - 1);
    c.residual_A1 = std::abs(a1_eq(c.A1));
    c.residual_constraint =
        std::abs(4 * std::numbers::e * c.alpha * std::pow(2 / c.R, c.alpha - 1) - kConstraintTarget);
    c.residual_stationary = std::abs(detail::objective_derivative(c.alpha));
    return c;
}

inline const Constants& constants() {
    static const Constants c = solve_constants();
    return c;
}

// ---------------------------------------------------------------- power sums

struct TuranResult {
    int k_star = 0;
    double achieved = 0;
    double bound = 0;
    double bound_display = 0;  // same floor with (M+N)/N in place of M/N, as in the density argument
    double ratio = std::numeric_limits<double>::infinity();  // achieved / bound, scale-free
};

inline double turan_floor(int M, int N) {
    return 1.007 * std::pow(4 * std::numbers::e * (1 + static_cast<double>(M) / N), -N);
}

// Unchecked form, for suites that count failures instead of throwing.
inline TuranResult turan_measure(const std::vector<cd>& z, int M) {
    if (z.empty()) throw UsageError("turan_existence: empty list");
    if (M < 0) throw UsageError("turan_existence: M must be >= 0");
    int N = static_cast<int>(z.size());
    double r = 0;
    for (auto x : z) r = std::max(r, std::abs(x));
    TuranResult t;
    t.k_star = M + 1;
    if (r == 0) return t;
    std::vector<cd> w;
    for (auto x : z) w.push_back(x / r);
    double best = -1;
    for (int k = M + 1; k <= M + N; ++k) {
        cd s = 0;
        for (auto x : w) s += cpow(x, k);
        if (std::abs(s) > best) best = std::abs(s), t.k_star = k;
    }
    double floor = turan_floor(M, N);
    double scale = std::pow(r, t.k_star);
    t.achieved = best * scale;
    t.bound = floor * scale;
    t.bound_display = turan_floor(M + N, N) * scale;
    t.ratio = best / floor;
    return t;
}

inline TuranResult turan_existence(const std::vector<cd>& z, int M) {
    auto t = turan_measure(z, M);
    if (t.ratio < 1)
        throw InvariantError("power-sum floor missed at M = " + std::to_string(M) + ", N = " + std::to_string(z.size()));
    return t;
}

struct TuranSuite {
    std::size_t cases = 0;
    std::size_t failures = 0;
    double min_ratio_random = std::numeric_limits<double>::infinity();
    double min_ratio_adversarial = std::numeric_limits<double>::infinity();
};

// Seeded random configurations (N <= 6, M <= 30, |z| <= 1, largest first) plus a phase grid at N = 2, 3.
inline TuranSuite turan_suite(std::size_t random_cases, std::uint64_t seed) {
    TuranSuite s;
    SplitMix64 rng(seed);
    for (std::size_t c = 0; c < random_cases; ++c) {
        int N = 1 + static_cast<int>(rng.next() % 6);
        int M = static_cast<int>(rng.next() % 31);
        std::vector<cd> z;
        for (int i = 0; i < N; ++i) z.push_back(std::polar(rng.uniform_pos(), 2 * std::numbers::pi * rng.uniform()));
        std::sort(z.begin(), z.end(), [](cd a, cd b) { return std::abs(a) > std::abs(b); });
        auto t = turan_measure(z, M);
        ++s.cases;
        if (t.ratio < 1) ++s.failures;
        s.min_ratio_random = std::min(s.min_ratio_random, t.ratio);
    }
    auto record = [&](const std::vector<cd>& z, int M) {
        auto t = turan_measure(z, M);
        ++s.cases;
        if (t.ratio < 1) ++s.failures;
        s.min_ratio_adversarial = std::min(s.min_ratio_adversarial, t.ratio);
    };
    const int steps2 = 720, steps3 = 96;
    for (double r : {1.0, 0.999, 0.9, 0.5})
        for (int i = 0; i < steps2; ++i)
            for (int M = 0; M <= 30; ++M) record({1, std::polar(r, 2 * std::numbers::pi * i / steps2)}, M);
    for (int i = 0; i < steps3; ++i)
        for (int j = 0; j < steps3; ++j)
            for (int M : {0, 1, 2, 3, 5, 8, 13, 21, 30})
                record({1, std::polar(1.0, 2 * std::numbers::pi * i / steps3), std::polar(1.0, 2 * std::numbers::pi * j / steps3)}, M);
    return s;
}

// ---------------------------------------------------------------- j_k

inline double log_jk(double u, int k) {
    if (u == 0) return k == 0 ? 0 : -std::numeric_limits<double>::infinity();
    return k * std::log(u) - u - std::lgamma(k + 1.0);
}

// e^{-u} u^k / k!
inline double jk(double u, int k) {
    if (u < 0 || k < 0) throw UsageError("jk: u and k must be nonnegative");
    return std::exp(log_jk(u, k));
}

// ---------------------------------------------------------------- configuration

struct DetectionParams {
    double Q_tilde = 3;  // family conductor bound
    int n_tilde = 1;
    int n0 = 1;  // degree of pi0
    int n = 1;   // family degree
    int field_degree = 1;
    double T = 2;
    double eta = 0.05;
    double tau = 0;
    int delta = 1;
    double c = 0;  // Linnik error constant; 0 is the constant-free setting
    std::optional<double> calL_override;
};

struct DetectionConfig {
    DetectionParams params;
    double eta = 0, tau = 0, T = 0, calL = 0;
    bool calL_overridden = false;
    double alpha = 0, A = 0, R = 0, V = 0, A0 = 0, A1 = 0, xi = kXi;
    double c = 0;
    std::string c_label;
    double Ncal_eta = 0, M_eta = 0;
    double log_N_eta = 0, log_N_eta_star = 0;
    cd s0;
    int delta = 0;
    int k_lo = 0, k_hi = 0;
    double eta_lo = 0, eta_hi = 0;
    bool m_eta_at_least_146 = false;

    double N_eta() const { return std::exp(log_N_eta); }
    double N_eta_star() const { return std::exp(log_N_eta_star); }
};

inline DetectionConfig make_detection_config(const DetectionParams& p) {
    const auto& k = constants();
    if (!(p.T >= 2)) throw UsageError("detection config: T must be >= 2");
    if (std::abs(p.tau) > p.T) throw UsageError("detection config: |tau| must not exceed T");
    if (p.delta != 0 && p.delta != 1) throw UsageError("detection config: delta must be 0 or 1");
    if (p.n < 1 || p.n0 < 1 || p.n_tilde < 1 || p.field_degree < 1) throw UsageError("detection config: degrees must be >= 1");
    DetectionConfig c;
    c.params = p;
    c.eta = p.eta, c.tau = p.tau, c.T = p.T, c.delta = p.delta;
    c.alpha = k.alpha, c.A = k.A, c.R = k.R, c.V = k.V, c.A0 = k.A0, c.A1 = k.A1;
    double n3 = std::pow(static_cast<double>(p.n_tilde), 3);
    if (p.calL_override) {
        c.calL = *p.calL_override;
        c.calL_overridden = true;
    } else {
        if (!(p.Q_tilde > 1)) throw UsageError("detection config: Q~ must exceed 1");
        c.calL = 8 * n3 * std::log(p.Q_tilde) + 4 * p.field_degree * n3 * std::log(p.T);
    }
    if (!(c.calL > 0)) throw UsageError("detection config: calL must be positive");
    c.eta_lo = 1 / (c.R * c.calL);
    c.eta_hi = 1 / (p.n0 * p.n * c.R);
    if (!(p.eta >= c.eta_lo * (1 - 1e-12) && p.eta <= c.eta_hi * (1 + 1e-12)))
        throw UsageError("detection config: eta must lie in [1/(R calL), 1/(n0 n R)] = [" + std::to_string(c.eta_lo) + ", " +
                         std::to_string(c.eta_hi) + "]");
    c.c = p.c;
    c.c_label = p.c == 0 ? "constant-free" : "configured";
    c.Ncal_eta = 8 * c.A * p.eta * c.calL + p.c;
    c.M_eta = (c.alpha - 1) * c.Ncal_eta;
    c.log_N_eta = c.A0 * c.M_eta / p.eta;
    c.log_N_eta_star = c.A1 * c.M_eta / p.eta;
    c.s0 = cd(1 + p.eta, p.tau);
    c.k_lo = static_cast<int>(std::ceil(c.M_eta));
    c.k_hi = static_cast<int>(std::floor(c.alpha * c.M_eta / (c.alpha - 1)));
    c.m_eta_at_least_146 = c.M_eta >= 146;
    return c;
}

// ---------------------------------------------------------------- j_k tail bounds

struct JkTailReport {
    double min_slack_low = std::numeric_limits<double>::infinity();   // log(bound / j_k), m <= N_eta
    double min_slack_high = std::numeric_limits<double>::infinity();  // m >= N_eta*
    int worst_k_low = 0, worst_k_high = 0;
    double worst_log_m_low = 0, worst_log_m_high = 0;
    std::size_t checked = 0;
};

// Samples log m uniformly on (0, log N_eta] and geometrically on [log N_eta*, 4 log N_eta*] for every k in range.
inline JkTailReport jk_tail_bounds_check(const DetectionConfig& c, int samples) {
    if (samples < 1) throw UsageError("jk_tail_bounds_check: samples must be >= 1");
    if (c.k_lo > c.k_hi) throw UsageError("jk_tail_bounds_check: empty k range");
    JkTailReport r;
    const double logV = std::log(c.V);
    for (int k = c.k_lo; k <= c.k_hi; ++k) {
        for (int i = 1; i <= samples; ++i) {
            double t = c.log_N_eta * i / samples;
            double slack = -c.eta * t - k * logV - log_jk(c.eta * t, k);
            ++r.checked;
            if (slack < r.min_slack_low) r.min_slack_low = slack, r.worst_k_low = k, r.worst_log_m_low = t;
        }
        for (int i = 0; i < samples; ++i) {
            double t = c.log_N_eta_star * std::pow(4.0, static_cast<double>(i) / samples);
            double slack = -c.eta * t / 2 - k * logV - log_jk(c.eta * t, k);
            ++r.checked;
            if (slack < r.min_slack_high) r.min_slack_high = slack, r.worst_k_high = k, r.worst_log_m_high = t;
        }
    }
    auto fail = [](int k, double t) {
        std::ostringstream os;
        os << "j_k tail bound violated at k = " << k << ", log m = " << t;
        throw InvariantError(os.str());
    };
    if (r.min_slack_low < 0) fail(r.worst_k_low, r.worst_log_m_low);
    if (r.min_slack_high < 0) fail(r.worst_k_high, r.worst_log_m_high);
    return r;
}

// ---------------------------------------------------------------- high derivatives

// Lambda coefficients of L(s, a x b~) at prime powers, sorted by norm. K = n n' [F:Q] bounds |Lambda|/log Np under GRC.
struct PrimePowerSeries {
    NumberFieldSpec field = NumberFieldSpec::rationals();
    std::uint64_t bound = 0;
    std::vector<std::uint64_t> norms;
    std::vector<cd> values;
    double K = 1;
    std::string label;
};

inline PrimePowerSeries von_mangoldt_series(const Representation& a, const std::optional<Representation>& b, std::uint64_t X) {
    Representation bb = b ? *b : trivial_representation(a.field());
    if (!(a.field() == bb.field())) throw UsageError("von_mangoldt_series: representations over different fields");
    auto m = default_model(a, bb);
    PrimePowerSeries s;
    s.field = a.field();
    s.bound = X;
    s.K = static_cast<double>(a.degree()) * bb.degree() * a.field().degree();
    s.label = "biglambda[" + a.label() + " x " + bb.label() + "~]";
    std::vector<std::pair<std::uint64_t, cd>> terms;
    for (const auto& P : prime_ideals_up_to(a.field(), X)) {
        int e = max_exponent(P.norm, X);
        auto lp = local_pair(a, bb, P, e, m);
        double lg = std::log(static_cast<double>(P.norm));
        std::uint64_t q = 1;
        for (int l = 1; l <= e; ++l) {
            q *= P.norm;
            terms.emplace_back(q, lp.psum[l] * lg);
        }
    }
    std::stable_sort(terms.begin(), terms.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [q, v] : terms) s.norms.push_back(q), s.values.push_back(v);
    return s;
}

inline PrimePowerSeries von_mangoldt_series(const CoefficientSeries& series, double K) {
    if (series.kind != SeriesKind::biglambda) throw UsageError("von_mangoldt_series: expected a biglambda series");
    PrimePowerSeries s;
    s.field = series.field;
    s.bound = series.bound;
    s.K = K;
    s.label = series.label;
    for (std::size_t i = 0; i < series.size(); ++i)
        if ((*series.ideals)[i].is_prime_power()) s.norms.push_back((*series.ideals)[i].norm), s.values.push_back(series.values[i]);
    return s;
}

struct HighDerivative {
    cd value;
    double tail = 0;  // bound on the omitted terms, valid under GRC with Chebyshev's 1.04
    std::uint64_t truncation = 0;
    std::size_t terms = 0;
};

// eta Sum_{Nn <= X} Lambda(n) Nn^{-1-i tau} j_k(eta log Nn), the truncated eta^{k+1}/k! (-L'/L)^{(k)}(s0) up to sign.
inline HighDerivative high_derivative(const PrimePowerSeries& s, int k, double eta, double tau, std::uint64_t truncation) {
    if (k < 0 || !(eta > 0)) throw UsageError("high_derivative: need k >= 0 and eta > 0");
    if (truncation > s.bound) throw UsageError("high_derivative: truncation beyond the series bound");
    const auto& c = constants();
    double log_floor = c.A0 * k / eta;
    if (std::log(static_cast<double>(truncation)) < log_floor)
        throw UsageError("high_derivative: truncation below N_eta = exp(" + std::to_string(log_floor) + "); the tail dominates");
    HighDerivative h;
    h.truncation = truncation;
    Kahan<cd> acc;
    for (std::size_t i = 0; i < s.norms.size() && s.norms[i] <= truncation; ++i) {
        double t = std::log(static_cast<double>(s.norms[i]));
        acc.add(s.values[i] * std::polar(std::exp(-t + log_jk(eta * t, k)), -tau * t));
        ++h.terms;
    }
    h.value = eta * acc.value();
    double tX = std::log(static_cast<double>(truncation));
    double t_peak = std::max(tX, k / (1 + eta));
    h.tail = kChebyshev * s.K * (boost::math::gamma_q(k + 1.0, eta * tX) + eta * jk(eta * t_peak, k));
    return h;
}

// ---------------------------------------------------------------- zeros

struct ZeroList {
    std::vector<cd> zeros;  // sorted by |gamma|
    std::string source;
    bool conjugate_pairs = false;  // every gamma > 0, so each rho stands for the pair rho, conj(rho)

    std::size_t size() const { return zeros.size(); }
    ZeroList first(std::size_t n) const {
        ZeroList z = *this;
        z.zeros.resize(std::min(n, zeros.size()));
        return z;
    }
};

// One ordinate per line (beta = 1/2) or "beta,gamma"; blank lines and '#' comments ignored.
inline ZeroList parse_zero_list(std::istream& in, const std::string& source) {
    ZeroList z;
    z.source = source;
    std::string line;
    long lineno = 0;
    bool all_positive = true;
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ParseError(source, lineno, "not a number: '" + s + "'");
        }
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
        if (used != s.size() || !std::isfinite(v)) throw ParseError(source, lineno, "not a number: '" + s + "'");
        return v;
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        line = line.substr(first);
        auto comma = line.find(',');
        double beta = 0.5, gamma;
        if (comma == std::string::npos) {
            gamma = number(line);
            if (!(gamma > 0)) throw ParseError(source, lineno, "ordinate must be positive");
        } else {
            beta = number(line.substr(0, comma));
            gamma = number(line.substr(comma + 1));
            if (!(beta > 0 && beta < 1)) throw ParseError(source, lineno, "beta must lie in (0, 1)");
        }
        if (!(gamma > 0)) all_positive = false;
        z.zeros.emplace_back(beta, gamma);
    }
    std::stable_sort(z.zeros.begin(), z.zeros.end(), [](cd a, cd b) { return std::abs(a.imag()) < std::abs(b.imag()); });
    z.conjugate_pairs = all_positive;
    return z;
}

inline ZeroList load_zero_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open zeros file " + path);
    return parse_zero_list(in, path);
}

struct ZeroSum {
    cd value;
    std::size_t terms = 0;  // zeros counted, conjugates included
    double tail_estimate = 0;
};

// Zeros beyond the list, modeled with density log(t/2 pi)/(2 pi) on both sides of the real axis.
inline double zero_tail_estimate(const ZeroList& z, cd s, int k) {
    if (z.zeros.empty()) return std::numeric_limits<double>::infinity();
    double G = std::abs(z.zeros.back().imag());
    if (k == 0) {
        if (!z.conjugate_pairs || G <= 2 * std::numbers::pi) return std::numeric_limits<double>::infinity();
        return std::abs(s - 0.5) / std::numbers::pi * (std::log(G / (2 * std::numbers::pi)) + 1) / G;
    }
    double g = G - std::abs(s.imag());
    if (g <= 2 * std::numbers::pi) return std::numeric_limits<double>::infinity();
    return std::pow(g, -k) * (std::log(g / (2 * std::numbers::pi)) / k + 1.0 / (k * k)) / std::numbers::pi;
}

inline ZeroSum hadamard_zero_sum(const ZeroList& z, cd s, int k) {
    if (k < 0) throw UsageError("hadamard_zero_sum: k must be >= 0");
    ZeroSum r;
    Kahan<cd> acc;
    auto term = [&](cd rho) {
        if (std::abs(s - rho) < 1e-12) throw PoleError("s lies on a listed zero");
        acc.add(cpow(1.0 / (s - rho), k + 1));
        ++r.terms;
    };
    for (auto rho : z.zeros) {
        term(rho);
        if (z.conjugate_pairs) term(std::conj(rho));
    }
    r.value = acc.value();
    r.tail_estimate = z.zeros.empty() ? 0 : zero_tail_estimate(z, s, k);
    return r;
}

// ---------------------------------------------------------------- detection bounds

// Series seen through its explicit formula: gamma shifts of the archimedean factor; the pole order comes from the config.
struct SeriesModel {
    std::string label;
    std::vector<cd> gamma_shifts;
    bool vanishing = false;

    static SeriesModel zeta() { return {"zeta", {cd(0, 0)}, false}; }
    static SeriesModel zero() { return {"zero", {}, true}; }
};

struct DetectionReport {
    int k = 0;
    std::string route;
    double lhs = 0;              // |eta^{k+1}/k! (L'/L)^{(k)}(s0)|
    double lhs_zero_tail = 0;    // estimate for zeros beyond the list
    bool zeros_included = false;
    double integral = 0;         // eta^2 int |partial sum| du/u
    double integral_refined = 0;
    double refinement_change = 0;
    bool refinement_ok = true;
    double mean_square = 0;      // M_eta eta^3 int |partial sum|^2 du/u
    double model_error = 0;      // listed-zero contribution to the partial sums
    double c_measured = 0;
    bool upper_chain_holds = true;
    bool lower_leg = false;
    std::size_t near_zeros = 0;
    double near_sum = 0;
    bool hypothesis_triggered = false;
    double lower_reference = 0;  // R^{-M_eta}
    bool lower_leg_holds = true;
    std::string constant_label;
};

namespace detail {

// eta^2 int_a^b |S(t)| dt and its square analogue, trapezoid on a grid of `per_octave` points per doubling of u.
inline std::pair<double, double> pnt_integral(double a, double b, double tau, int delta, double eta, int per_octave) {
    if (delta == 0 || b <= a) return {0, 0};
    double h0 = std::numbers::ln2 / per_octave;
    auto n = static_cast<std::size_t>(std::ceil((b - a) / h0));
    double h = (b - a) / static_cast<double>(n);
    auto S = [&](double t) {
        if (tau == 0) return t - a;
        return std::abs((std::polar(1.0, -tau * a) - std::polar(1.0, -tau * t)) / cd(0, tau));
    };
    Kahan<double> s1, s2;
    for (std::size_t i = 0; i <= n; ++i) {
        double w = (i == 0 || i == n) ? 0.5 : 1.0;
        double v = S(a + h * static_cast<double>(i));
        s1.add(w * v);
        s2.add(w * v * v);
    }
    return {eta * eta * h * s1.value(), eta * eta * eta * h * s2.value()};
}

}  // namespace detail

inline DetectionReport detection_bounds(const SeriesModel& series, const std::optional<ZeroList>& zeros,
                                        const DetectionConfig& c, std::optional<int> k_opt = std::nullopt,
                                        bool lower_leg = false, double far_constant = 0) {
    int k = k_opt ? *k_opt : c.k_lo;
    if (k < 1) throw UsageError("detection_bounds: k must be >= 1");
    if (lower_leg && !zeros) throw UsageError("detection_bounds: the lower-bound leg needs a zero list");
    DetectionReport r;
    r.k = k;
    r.route = "explicit-formula";
    r.lower_leg = lower_leg;
    r.constant_label = c.c_label;
    if (series.vanishing) {
        r.route = "vanishing";
        r.zeros_included = zeros.has_value();
        return r;
    }
    const double eta = c.eta;
    const cd s0 = c.s0;
    // (-1)^k/k! (L'/L)^{(k)}(s) = Sum_rho (s-rho)^{-k-1} - delta (s-1)^{-k-1} - delta s^{-k-1} + Sum_j Sum_m (s+mu_j+2m)^{-k-1}
    Kahan<cd> acc;
    auto add_scaled = [&](cd w, double sign) { acc.add(sign * cpow(eta / w, k + 1)); };
    if (zeros) {
        for (auto rho : zeros->zeros) {
            add_scaled(s0 - rho, 1);
            if (zeros->conjugate_pairs) add_scaled(s0 - std::conj(rho), 1);
        }
        r.zeros_included = true;
        r.lhs_zero_tail = std::pow(eta, k + 1) * zero_tail_estimate(*zeros, s0, k);
    }
    if (c.delta) {
        add_scaled(s0 - 1.0, -1);
        add_scaled(s0, -1);
    }
    for (auto mu : series.gamma_shifts)
        for (int m = 0; m < 1000000; ++m) {
            cd w = s0 + mu + 2.0 * m;
            double mag = std::pow(eta / std::abs(w), k + 1);
            acc.add(cpow(eta / w, k + 1));
            if (mag < 1e-300 || (m > 0 && mag < 1e-20 * std::abs(acc.value()))) break;
        }
    r.lhs = std::abs(acc.value());

    auto [i64, ms64] = detail::pnt_integral(c.log_N_eta, c.log_N_eta_star, c.tau, c.delta, eta, 64);
    auto [i128, ms128] = detail::pnt_integral(c.log_N_eta, c.log_N_eta_star, c.tau, c.delta, eta, 128);
    r.integral = i64;
    r.integral_refined = i128;
    r.refinement_change = i128 == 0 ? 0 : std::abs(i128 - i64) / std::abs(i128);
    r.refinement_ok = r.refinement_change < 0.01;
    r.mean_square = c.M_eta * ms128;
    if (zeros) {
        double inv = 0;
        for (auto rho : zeros->zeros) inv += (zeros->conjugate_pairs ? 2 : 1) / std::abs(rho - cd(1, c.tau));
        double beta_max = 0;
        for (auto rho : zeros->zeros) beta_max = std::max(beta_max, rho.real());
        r.model_error = eta * eta * (c.log_N_eta_star - c.log_N_eta) * 2 * std::exp((beta_max - 1) * c.log_N_eta) * inv;
    }
    r.c_measured = std::max(0.0, r.lhs - r.integral_refined) * std::exp(k * std::log(c.V)) / k;
    r.upper_chain_holds = r.lhs <= r.integral_refined * (1 + 1e-12);

    if (zeros) {
        Kahan<cd> near;
        cd edge(1, c.tau);
        auto visit = [&](cd rho) {
            double d = std::abs(edge - rho);
            if (d <= c.A * eta) {
                near.add(cpow(eta / (s0 - rho), k + 1));
                ++r.near_zeros;
            }
            if (d <= eta) r.hypothesis_triggered = true;
        };
        for (auto rho : zeros->zeros) {
            visit(rho);
            if (zeros->conjugate_pairs) visit(std::conj(rho));
        }
        r.near_sum = std::abs(near.value());
        r.lower_reference = std::exp(-c.M_eta * std::log(c.R));
        double indicator = c.delta && std::abs(c.tau) <= c.A * eta ? 1 : 0;
        double far = far_constant * c.Ncal_eta * std::exp(-(k + 1) * std::log(c.R));
        r.lower_leg_holds = r.lhs + indicator >= r.near_sum - far - 1e-12;
    }
    return r;
}

// ---------------------------------------------------------------- density scan

struct DensityQuery {
    PrimeIdeal prime;
    double theta = 0;
    double epsilon = 0;
    int n = 1;
    std::size_t count_hint = 0;  // |S(p, theta)| entering calM
    double mathcalM = 0;
    int M = 0;
};

inline bool violates(const Representation& rep, const PrimeIdeal& P, double theta, double* max_alpha = nullptr) {
    double m = 0;
    for (auto a : rep.local(P).alphas) m = std::max(m, std::abs(a));
    if (max_alpha) *max_alpha = m;
    return m >= std::pow(static_cast<double>(P.norm), theta) * (1 - 1e-12);
}

// calM and M from the family conductor, degree and the ground-truth size of S(p, theta) (at least 1).
inline DensityQuery make_density_query(const Family& family, const PrimeIdeal& P, double theta, double epsilon) {
    if (theta < 0) throw UsageError("density query: theta must be >= 0");
    DensityQuery q;
    q.prime = P;
    q.theta = theta;
    q.epsilon = epsilon;
    q.n = std::max(1, family.max_degree());
    for (const auto& m : family.members)
        if (violates(m, P, theta)) ++q.count_hint;
    double D = static_cast<double>(std::abs(family.field.discriminant()));
    double Q = family.Q();
    double S = static_cast<double>(std::max<std::size_t>(q.count_hint, 1));
    double n = q.n;
    double logM = theta <= 0.25 ? -n * n * std::log(D) + 2 * n * std::log(Q) + epsilon * std::log(S)
                                : -n * n / 2 * std::log(D) + n * std::log(Q) + (1 + epsilon) * std::log(S);
    q.mathcalM = std::ceil(std::exp(logM));
    double logNp = std::log(static_cast<double>(P.norm));
    if (!(q.mathcalM >= 1) || logNp > std::log(q.mathcalM) / (n + 1) + 1e-12)
        throw UsageError("density query: Np exceeds calM^{1/(n+1)} (calM = " + std::to_string(q.mathcalM) + ")");
    q.M = static_cast<int>(std::floor(std::log(q.mathcalM) / logNp - n + 1e-12));
    if (q.M < 1) throw UsageError("density query: M < 1");
    return q;
}

struct DensityRow {
    std::size_t member = 0;
    std::string label;
    double max_alpha = 0;
    bool flagged = false;
    bool fired = false;
    int k_fired = 0;
    double best = 0;  // max over k of |Sum alpha^k / k|
};

struct DensityResult {
    std::vector<DensityRow> rows;
    std::size_t count = 0;
    std::size_t certified = 0;
    double measured = 0;  // Sum over flagged members of best^2
    double shape = 0;     // Np^n (D^{-n^2} Q^{2n})^{(1-2 theta)/max(1, 4 theta) + eps}
};

inline DensityResult density_scan(const Family& family, const DensityQuery& q) {
    DensityResult res;
    res.rows.resize(family.size());
    double Np = static_cast<double>(q.prime.norm);
    double floor = turan_floor(q.M, q.n);
    parallel_for(family.size(), [&](std::size_t i) {
        const auto& rep = family.members[i];
        DensityRow row;
        row.member = i;
        row.label = rep.label();
        row.flagged = violates(rep, q.prime, q.theta, &row.max_alpha);
        const auto& alphas = rep.local(q.prime).alphas;
        for (int k = q.M + 1; k <= q.M + q.n; ++k) {
            double v = std::abs(power_sum(alphas, k)) / k;
            double f = std::pow(Np, k * q.theta) / k * floor;
            if (v > row.best) row.best = v;
            if (!row.fired && v >= f * (1 - 1e-12)) row.fired = true, row.k_fired = k;
        }
        if (row.flagged && !row.fired)
            throw InvariantError("power-sum certificate did not fire for violator " + rep.label() + " at " + q.prime.id());
        res.rows[i] = row;
    });
    for (const auto& row : res.rows)
        if (row.flagged) {
            ++res.count;
            if (row.fired) ++res.certified;
            res.measured += row.best * row.best;
        }
    double n = q.n;
    double D = static_cast<double>(std::abs(family.field.discriminant()));
    double Q = family.size() ? family.Q() : 1;
    double e = (1 - 2 * q.theta) / std::max(1.0, 4 * q.theta) + q.epsilon;
    res.shape = std::pow(Np, n) * std::pow(std::pow(D, -n * n) * std::pow(Q, 2 * n), e);
    return res;
}

// ---------------------------------------------------------------- family counts

struct FamilyCount {
    std::optional<std::size_t> enumerated;
    double bound_shape = 0;
    std::optional<double> ratio;
    bool enumeration_supported = false;
};

inline FamilyCount family_count_bound(const NumberFieldSpec& field, int n, double Q, double epsilon) {
    if (n < 1 || !(Q >= 1)) throw UsageError("family_count_bound: need n >= 1 and Q >= 1");
    FamilyCount f;
    double D = static_cast<double>(std::abs(field.discriminant()));
    f.bound_shape = std::pow(D, -static_cast<double>(n) * n) * std::pow(Q, 2 * n + epsilon);
    if (n == 1 && field.kind() == NumberFieldSpec::Kind::rationals) {
        f.enumeration_supported = true;
        f.enumerated = dirichlet_character_family(static_cast<std::uint64_t>(std::floor(Q))).size();
        f.ratio = static_cast<double>(*f.enumerated) / f.bound_shape;
    }
    return f;
}

}  // namespace rslab
