// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "fixtures.hpp"
#include "rslab/cli.hpp"

using namespace rslab;

namespace {

struct Verdict {
    bool ok;
    std::string detail;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// -zeta'/zeta(s) for real s > 1 by Euler-Maclaurin with N = 20 and six Bernoulli corrections.
double neg_log_derivative_zeta(double s) {
    const int N = 20;
    const double B[] = {1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66, -691.0 / 2730};
    double z = 0, dz = 0, lN = std::log(N);
    for (int n = 1; n < N; ++n) {
        z += std::pow(n, -s);
        dz -= std::log(n) * std::pow(n, -s);
    }
    double tail = std::pow(N, 1 - s) / (s - 1);
    z += tail + std::pow(N, -s) / 2;
    dz += -lN * tail - tail / (s - 1) - lN * std::pow(N, -s) / 2;
    double fact = 1;
    for (int j = 1; j <= 6; ++j) {
        fact *= (2 * j - 1) * (2 * j);
        double P = 1, dlogP = 0;
        for (int i = 0; i <= 2 * j - 2; ++i) P *= s + i, dlogP += 1 / (s + i);
        double t = B[j - 1] / fact * P * std::pow(N, -s - 2 * j + 1);
        z += t;
        dz += t * (dlogP - lN);
    }
    return -dz / z;
}

std::vector<cd> random_params(SplitMix64& rng, int n, double radius) {
    std::vector<cd> a;
    for (int i = 0; i < n; ++i) a.push_back(std::polar(radius * std::sqrt(rng.uniform()), 2 * std::numbers::pi * rng.uniform()));
    return a;
}

Verdict constants_reproduction() {
    auto t0 = std::chrono::steady_clock::now();
    auto c = solve_constants();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double worst = std::max({std::abs(c.alpha - 7.257570591), std::abs(c.A - 3.893444953), std::abs(c.V - 4.399815114),
                             std::abs(c.A0 - 0.083612477), std::abs(c.A1 - 11.4016385180)});
    return {worst <= 1e-8 && c.max_residual() <= 1e-8 && secs < 1,
            "max |diff| " + num(worst) + ", max residual " + num(c.max_residual()) + ", " + num(secs) + " s"};
}

Verdict classical_large_sieve() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst = -1e300;
    for (std::uint64_t Q : {5, 10, 20}) {
        auto fam = dirichlet_modulus_family(Q);
        for (std::uint64_t N : {50, 100, 200, 500}) {
            double C = sieve_constant(fam, N).value;
            double b = static_cast<double>(N + Q * Q - 1);
            worst = std::max(worst, C / b);
            ok = ok && C <= b;
        }
    }
    Family triv{NumberFieldSpec::rationals(), {trivial_representation()}, "trivial"};
    double dev = 0;
    for (std::uint64_t N : {50, 100, 200, 500}) dev = std::max(dev, std::abs(sieve_constant(triv, N).value - N));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {ok && dev <= 1e-8 && secs < 30,
            "max C/(N+Q^2-1) " + num(worst) + ", trivial |C-N| " + num(dev) + ", " + num(secs) + " s"};
}

Verdict positive_semidefinite() {
    auto t0 = std::chrono::steady_clock::now();
    std::size_t checked = 0, failures = 0;
    double worst = 0, worst_ratio = 0;
    auto fold = [&](const std::vector<PsdRow>& rows) {
        for (const auto& r : rows) {
            ++checked;
            if (!r.result.verdict) ++failures;
            worst = std::min(worst, r.result.min_eigenvalue);
            // Differences that cancel to rounding noise have min ~ -norm; their ratio says nothing.
            if (r.result.spectral_norm > 1e-9) worst_ratio = std::min(worst_ratio, r.result.min_eigenvalue / r.result.spectral_norm);
        }
    };
    fold(psd_sweep(dirichlet_modulus_family(20), 2000, MatrixKind::lambda));
    for (int n : {2, 3})
        for (std::uint64_t seed = 1; seed <= 5; ++seed)
            fold(psd_sweep(synthetic_family(n, 6, seed, SyntheticModel::grc()), 2000, MatrixKind::remark2, kPsdTolerance, true));
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {failures == 0 && checked > 0 && secs < 120,
            std::to_string(checked) + " matrices, min eigenvalue " + num(worst) + ", worst min/norm " + num(worst_ratio) + ", " + num(secs) + " s"};
}

Verdict cover_inequalities() {
    std::size_t checked = 0;
    double worst = std::numeric_limits<double>::infinity();
    auto gl1 = dirichlet_modulus_family(10);
    auto gl2 = synthetic_family(2, 6, 17, SyntheticModel::grc());
    for (auto t : {CoverTarget::lambda, CoverTarget::mu, CoverTarget::log}) {
        for (const auto& r : bilinear_sweep(gl1, t, gl1.members[3], 2000, 1000, 11)) worst = std::min(worst, r.worst_margin), ++checked;
        for (const auto& r : bilinear_sweep(gl2, t, gl2.members[0], 2000, 1000, 11, true))
            worst = std::min(worst, r.worst_margin), ++checked;
    }
    return {worst >= -1e-9 && checked > 0, std::to_string(checked) + " ideal/target cases, worst margin " + num(worst)};
}

Verdict pointwise() {
    auto ideals = std::make_shared<const IdealSet>(NumberFieldSpec::rationals(), 10000);
    auto reps = fixtures::test_reps(false);
    auto s = pointwise_bounds(reps, ideals);
    double mu = s.mu_slack, br = s.brumley_slack;
    // The Delta coefficients stop at 2000.
    reps.push_back(fixtures::delta());
    auto d = pointwise_bounds(reps, std::make_shared<const IdealSet>(NumberFieldSpec::rationals(), 2000));
    mu = std::min(mu, d.mu_slack);
    br = std::min(br, d.brumley_slack);
    return {mu >= -1e-9 && br >= -1e-9, "min mu slack " + num(mu) + ", min Lambda slack " + num(br)};
}

Verdict cauchy_identity() {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        SplitMix64 rng(mix_keys({seed, 0xacce97}));
        for (int n = 1; n <= 4; ++n)
            for (int m = 1; m <= 4; ++m) {
                LocalParameters a{{2, 0, 2}, random_params(rng, n, 1.3)}, b{{2, 0, 2}, random_params(rng, m, 1.3)};
                auto oracle = fixtures::invert_series(product_multiset(a.alphas, b.alphas), 12);
                for (int k = 0; k <= 12; ++k) {
                    double rel = std::abs(rankin_selberg_local(a, b, k) - oracle[k]) / std::max(std::abs(oracle[k]), 1e-300);
                    worst = std::max(worst, rel);
                }
            }
    }
    return {worst <= 1e-10, "worst relative error " + num(worst)};
}

Verdict convolution_identities() {
    double unit_err = 0, deriv_err = 0;
    for (const auto& a : fixtures::test_reps()) {
        std::uint64_t N = a.kind() == RepKind::hecke_gl2 ? 2000 : 10000;
        auto ideals = std::make_shared<const IdealSet>(NumberFieldSpec::rationals(), N);
        auto lam = expand_global(a, std::nullopt, ideals, SeriesKind::lambda);
        auto mu = expand_global(a, std::nullopt, ideals, SeriesKind::mu);
        auto big = expand_global(a, std::nullopt, ideals, SeriesKind::biglambda);
        auto unit = dirichlet_convolve(lam, mu, N);
        auto deriv = dirichlet_convolve(big, lam, N);
        for (std::uint64_t n = 1; n <= N; ++n) {
            unit_err = std::max(unit_err, std::abs(unit.values[n - 1] - (n == 1 ? 1.0 : 0.0)));
            deriv_err = std::max(deriv_err, std::abs(deriv.values[n - 1] - lam.values[n - 1] * std::log(static_cast<double>(n))));
        }
    }
    return {unit_err <= 1e-9 && deriv_err <= 1e-9,
            "max |lambda*mu - e| " + num(unit_err) + ", max |Lambda*lambda - lambda log| " + num(deriv_err)};
}

Verdict selberg() {
    auto triv = trivial_representation();
    auto w3 = selberg_weights(triv, 3);
    bool hand = w3.closed_form_diagonal() == 0.4 && w3.support.size() == 3;
    auto chars = dirichlet_modulus_family(7).members;
    std::vector<Representation> reps{triv, chars[2], chars[5], chars[9]};
    double worst = 0;
    bool clauses = true;
    for (const auto& rep : reps)
        for (double z : {1.0, 2.0, 3.0, 10.0, 57.5, 100.0, 300.0, 1000.0}) {
            auto w = selberg_weights(rep, z);
            clauses = clauses && w.rho[0] == 1 && w.support[0].is_unit();
            for (std::size_t i = 0; i < w.support.size(); ++i)
                clauses = clauses && std::abs(w.rho[i]) <= 1 && static_cast<double>(w.support[i].norm) <= z &&
                          w.support[i].squarefree();
            worst = std::max(worst, std::abs(diagonal_brute_force(rep, w) - w.closed_form_diagonal()));
        }
    auto w = selberg_weights(triv, 20);
    for (std::uint64_t n : {23ULL, 23ULL * 29, 31ULL * 31 * 37}) {
        double acc = 0;
        for (const auto& d : divisors(rational_ideal(n))) acc += w.at(d);
        clauses = clauses && std::abs(acc - 1) <= 1e-15;
    }
    return {hand && clauses && worst <= 1e-10, std::string("hand value ") + (hand ? "exact" : "wrong") + ", clauses " +
                                                   (clauses ? "hold" : "fail") + ", closed form vs brute " + num(worst)};
}

Verdict power_sums() {
    auto s = turan_suite(100000, 2024);
    auto a = turan_existence({1}, 0);
    auto b = turan_existence({1, -1}, 0);
    double e = std::numbers::e;
    bool ex = a.k_star == 1 && std::abs(a.achieved - 1) <= 1e-10 && std::abs(a.bound - 1.007 / (4 * e)) <= 1e-10 &&
              b.k_star == 2 && std::abs(b.achieved - 2) <= 1e-10 && std::abs(b.bound_display - 1.007 / std::pow(8 * e, 2)) <= 1e-10;
    return {s.failures == 0 && s.cases >= 100000 && ex,
            std::to_string(s.cases) + " cases, " + std::to_string(s.failures) + " failures, min ratio " +
                num(std::min(s.min_ratio_random, s.min_ratio_adversarial)) + ", examples " + (ex ? "match" : "differ")};
}

Verdict density() {
    const double thetas[] = {0.25, 0.3, 0.4};
    std::size_t families = 0, planted = 0, flagged = 0, certified = 0;
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        double theta = thetas[seed % 3];
        int n = theta == 0.4 ? 3 : 2;
        int violators = 1 + static_cast<int>(seed % 2);
        auto fam = synthetic_family(n, 6, 1000 + seed, SyntheticModel::planted(2, theta, violators));
        auto r = density_scan(fam, make_density_query(fam, {2, 0, 2}, theta, 0.01));
        ++families;
        planted += violators;
        flagged += r.count;
        certified += r.certified;
        ok = ok && r.count == static_cast<std::size_t>(violators) && r.certified == r.count;
    }
    return {ok, std::to_string(families) + " families, planted " + std::to_string(planted) + ", flagged " +
                    std::to_string(flagged) + ", certified " + std::to_string(certified)};
}

Verdict detection() {
    double low = 1e300, high = 1e300;
    std::size_t checked = 0;
    for (double eta : {0.05, 0.1, 0.2}) {
        DetectionParams p;
        p.calL_override = 40;
        p.eta = eta;
        auto r = jk_tail_bounds_check(make_detection_config(p), 200);
        low = std::min(low, r.min_slack_low);
        high = std::min(high, r.min_slack_high);
        checked += r.checked;
    }
    auto zeta = von_mangoldt_series(trivial_representation(), std::nullopt, 10'000'000);
    double worst = 0;
    for (double eta : {0.1, 0.05}) {
        auto h = high_derivative(zeta, 0, eta, 0, 10'000'000);
        worst = std::max(worst, std::abs(h.value.real() - eta * neg_log_derivative_zeta(1 + eta)) / h.tail);
    }
    return {low >= 0 && high >= 0 && worst <= 1,
            std::to_string(checked) + " j_k points, min slack " + num(std::min(low, high)) +
                ", k = 0 error / tail " + num(worst)};
}

Verdict determinism() {
    auto dir = std::filesystem::temp_directory_path() / "rslab_acceptance";
    std::filesystem::create_directories(dir);
    std::string zeros = fixtures::data("zeta_zeros_200.txt");
    std::vector<std::vector<std::string>> runs{
        {"constants"},
        {"large-sieve", "--gl1", "--qmax", "20", "--n", "50,100,200,500"},
        {"psd", "--gl1", "--qmax", "20", "--nmax", "2000"},
        {"psd", "--synthetic", "--degree", "3", "--seed", "4", "--kind", "remark2", "--unramified", "--nmax", "2000"},
        {"covers", "--gl1", "--qmax", "10", "--pi0", "member:3", "--target", "log", "--nmax", "500", "--trials", "1000"},
        {"sieve-weights", "--rep", "char:7:2", "--z", "1000"},
        {"density", "--synthetic", "--degree", "3", "--planted-p", "2", "--planted-theta", "0.4", "--violators", "2"},
        {"detect", "--zeros", zeros, "--lower"},
    };
    std::size_t same = 0;
    std::string bad;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::string bodies[2];
        for (int rep = 0; rep < 2; ++rep) {
            auto path = (dir / ("run" + std::to_string(i) + "_" + std::to_string(rep) + ".jsonl")).string();
            std::vector<std::string> args{"rslab", "--format", "jsonl", "--threads", rep ? "1" : "0"};
            args.insert(args.end(), runs[i].begin(), runs[i].end());
            args.insert(args.end(), {"--output", path});
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            std::ifstream in(path, std::ios::binary);
            bodies[rep] = code == 0 ? std::string(std::istreambuf_iterator<char>(in), {}) : "exit " + std::to_string(code);
        }
        if (bodies[0] == bodies[1] && bodies[0].rfind("exit", 0) != 0) ++same;
        else bad += " " + runs[i][0];
    }
    set_threads(0);
    std::filesystem::remove_all(dir);
    return {same == runs.size(), std::to_string(same) + "/" + std::to_string(runs.size()) + " commands byte-identical across repeat runs" +
                                     (bad.empty() ? "" : "; differing:" + bad)};
}

}  // namespace

int main() {
    std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"constants reproduction", constants_reproduction},
        {"classical GL1 large sieve", classical_large_sieve},
        {"positive semi-definiteness", positive_semidefinite},
        {"cover inequalities", cover_inequalities},
        {"pointwise bounds", pointwise},
        {"Cauchy identity oracle", cauchy_identity},
        {"convolution identities", convolution_identities},
        {"Selberg weights", selberg},
        {"power sums", power_sums},
        {"density scan", density},
        {"j_k tails and k = 0 oracle", detection},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v{false, ""};
        auto t0 = std::chrono::steady_clock::now();
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s: %s [%.2f s]\n", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !v.ok;
    }
    return failed ? 1 : 0;
}
