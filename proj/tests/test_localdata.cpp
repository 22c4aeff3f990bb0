#include "catch_amalgamated.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include "rslab/localdata.hpp"

using namespace rslab;
using Catch::Approx;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / ("rslab_test_" + name);
    std::ofstream(path) << body;
    return path.string();
}

int moebius(std::uint64_t n) {
    int m = 1;
    for (auto [p, e] : factor_integer(n)) {
        if (e > 1) return 0;
        m = -m;
    }
    return m;
}

std::uint64_t euler_phi(std::uint64_t n) {
    std::uint64_t r = n;
    for (auto [p, e] : factor_integer(n)) r = r / p * (p - 1);
    return r;
}

}  // namespace

TEST_CASE("theta_n") {
    CHECK(theta_n(1) == 0.0);
    CHECK(theta_n(2) == Approx(0.3).epsilon(1e-15));
    CHECK(theta_n(3) == Approx(0.4).epsilon(1e-15));
}

TEST_CASE("dirichlet_character_family examples") {
    auto f = dirichlet_character_family(20);
    std::vector<std::uint64_t> moduli;
    int mod5 = 0;
    for (const auto& m : f.members) {
        moduli.push_back(m.conductor().norm);
        if (m.conductor().norm == 5) ++mod5;
    }
    CHECK(moduli == std::vector<std::uint64_t>{1, 3, 4, 5, 5, 5});
    CHECK(mod5 == 3);
    CHECK(f.Q() == 20.0);

    auto chi3 = primitive_characters_mod(3).at(0);
    CHECK(chi3(2) == cd(-1, 0));
    CHECK(chi3(2) * chi3(2) == chi3(4));
    CHECK(chi3(4) == chi3(1));
    auto r3 = character_representation(chi3);
    CHECK(r3.local(PrimeIdeal{2, 0, 2}).alphas[0] == cd(-1, 0));
    CHECK(r3.local(PrimeIdeal{3, 0, 3}).alphas[0] == cd(0, 0));

    auto triv = trivial_representation();
    for (auto p : primes_up_to(100)) CHECK(triv.local(PrimeIdeal{p, 0, p}).alphas[0] == cd(1, 0));
}

TEST_CASE("primitive character counts match the Moebius formula") {
    for (std::uint64_t q = 1; q <= 60; ++q) {
        std::int64_t expect = 0;
        for (std::uint64_t d = 1; d <= q; ++d)
            if (q % d == 0) expect += moebius(d) * static_cast<std::int64_t>(euler_phi(q / d));
        INFO("q = " << q);
        CHECK(static_cast<std::int64_t>(primitive_characters_mod(q).size()) == expect);
        CHECK(characters_mod(q).size() == euler_phi(q));
    }
}

TEST_CASE("character tables are homomorphisms") {
    for (std::uint64_t q = 1; q <= 40; ++q)
        for (const auto& chi : characters_mod(q))
            for (std::uint64_t a = 0; a < q; ++a)
                for (std::uint64_t b = 0; b < q; ++b) REQUIRE(std::abs(chi(a * b) - chi(a) * chi(b)) < 1e-12);
}

TEST_CASE("orthogonality for moduli up to 50") {
    for (std::uint64_t q = 1; q <= 50; ++q) {
        auto chars = characters_mod(q);
        for (std::size_t i = 0; i < chars.size(); ++i)
            for (std::size_t j = 0; j < chars.size(); ++j) {
                cd s = 0;
                for (std::uint64_t n = 0; n < q; ++n) s += chars[i](n) * std::conj(chars[j](n));
                double expect = i == j ? static_cast<double>(euler_phi(q)) : 0.0;
                REQUIRE(std::abs(s - expect) < 1e-9);
            }
    }
}

TEST_CASE("conductor of chi * conj(chi') divides lcm(q, q')") {
    std::vector<DirichletCharacter> prim;
    for (std::uint64_t q = 1; q <= 50; ++q)
        for (auto& c : primitive_characters_mod(q)) prim.push_back(c);
    for (std::size_t i = 0; i < prim.size(); i += 3)
        for (std::size_t j = 0; j < prim.size(); j += 5) {
            const auto& x = prim[i];
            const auto& y = prim[j];
            std::uint64_t L = std::lcm(x.modulus, y.modulus);
            DirichletCharacter prod{L, 0, std::vector<cd>(L)};
            for (std::uint64_t n = 0; n < L; ++n) prod.table[n] = x(n) * std::conj(y(n));
            REQUIRE(L % character_conductor(prod) == 0);
        }
    for (const auto& c : prim) REQUIRE(character_conductor(c) == c.modulus);
}

TEST_CASE("analytic_conductor") {
    CHECK(analytic_conductor(trivial_representation(), 0) == 3.0);
    auto chi3 = character_representation(primitive_characters_mod(3).at(0));
    CHECK(chi3.character()->odd());
    CHECK(analytic_conductor(chi3, 0) == 12.0);
    auto chi4 = character_representation(primitive_characters_mod(4).at(0));
    CHECK(analytic_conductor(chi4, 0) == 16.0);
    for (const auto& m : dirichlet_character_family(60).members) {
        double prev = 0;
        for (double t : {0.0, 0.5, 1.0, 3.0, 10.0}) {
            double c = analytic_conductor(m, t);
            CHECK(c >= prev);
            CHECK(analytic_conductor(m, -t) == c);
            prev = c;
        }
    }
    auto gi = trivial_representation(NumberFieldSpec::quadratic(-1));
    CHECK(analytic_conductor(gi, 0) == 4.0 * 3.0);
    CHECK(analytic_conductor(gi, 2) == Approx(4.0 * 7.0));
}

TEST_CASE("contragredient") {
    auto syn = synthetic_family(3, 2, 11, SyntheticModel::grc());
    for (const auto& m : syn.members) {
        auto mm = m.contragredient().contragredient();
        for (auto p : primes_up_to(50)) {
            PrimeIdeal P{p, 0, p};
            REQUIRE(mm.local(P).alphas == m.local(P).alphas);
            auto c = m.contragredient().local(P).alphas;
            for (std::size_t j = 0; j < c.size(); ++j) REQUIRE(c[j] == std::conj(m.local(P).alphas[j]));
        }
        CHECK(mm.label() == m.label());
    }
    auto triv = trivial_representation();
    auto tc = triv.contragredient();
    for (auto p : primes_up_to(50)) CHECK(tc.local(PrimeIdeal{p, 0, p}).alphas == triv.local(PrimeIdeal{p, 0, p}).alphas);
    auto chi5 = character_representation(primitive_characters_mod(5).at(0));
    auto cc = chi5.contragredient();
    for (std::uint64_t n = 0; n < 5; ++n) CHECK((*cc.character())(n) == std::conj((*chi5.character())(n)));
    CHECK(cc.conductor() == chi5.conductor());
}

TEST_CASE("synthetic_family") {
    auto f = synthetic_family(2, 1, 5, SyntheticModel::grc());
    for (auto p : primes_up_to(100)) {
        auto a = f.members[0].local(PrimeIdeal{p, 0, p}).alphas;
        CHECK(std::abs(a[0]) == Approx(1.0).epsilon(1e-15));
        CHECK(a[1] == std::conj(a[0]));
    }
    auto g = synthetic_family(2, 3, 5, SyntheticModel::planted(2, 0.2));
    auto a2 = g.members[0].local(PrimeIdeal{2, 0, 2}).alphas;
    CHECK(std::max(std::abs(a2[0]), std::abs(a2[1])) == Approx(std::pow(2.0, 0.2)).epsilon(1e-14));
    CHECK(std::abs(a2[0]) * std::abs(a2[1]) == Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(g.members[1].local(PrimeIdeal{2, 0, 2}).alphas[0]) == Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(g.members[0].local(PrimeIdeal{3, 0, 3}).alphas[0]) == Approx(1.0).epsilon(1e-15));

    auto h1 = synthetic_family(3, 4, 99, SyntheticModel::grc());
    auto h2 = synthetic_family(3, 4, 99, SyntheticModel::grc());
    for (std::size_t m = 0; m < 4; ++m)
        for (auto p : primes_up_to(200)) {
            auto x = h1.members[m].local(PrimeIdeal{p, 0, p}).alphas;
            auto y = h2.members[m].local(PrimeIdeal{p, 0, p}).alphas;
            REQUIRE(std::memcmp(x.data(), y.data(), x.size() * sizeof(cd)) == 0);
        }

    CHECK_THROWS_AS(synthetic_family(2, 1, 1, SyntheticModel::planted(2, 0.31)), UsageError);
    CHECK_THROWS_WITH(synthetic_family(2, 1, 1, SyntheticModel::planted(2, -0.1)),
                      Catch::Matchers::ContainsSubstring("1/2 - 1/(n^2+1)"));
    CHECK_NOTHROW(synthetic_family(3, 1, 1, SyntheticModel::planted(2, 0.4)));
    CHECK_THROWS_AS(synthetic_family(2, 0, 1, SyntheticModel::grc()), UsageError);
}

TEST_CASE("synthetic parameters are pinned across platforms") {
    auto f = synthetic_family(2, 1, 42, SyntheticModel::grc());
    auto a = f.members[0].local(PrimeIdeal{2, 0, 2}).alphas;
    SplitMix64 rng(mix_keys({42, 0, 2, 0}));
    double phi = 2.0 * std::numbers::pi * rng.uniform();
    CHECK(a[0] == std::polar(1.0, phi));
    SplitMix64 s(0);
    CHECK(s.next() == 0xe220a8397b1dcdafULL);
}

TEST_CASE("magnitude invariant holds for generated members") {
    for (const auto& m : dirichlet_character_family(60).members)
        for (auto p : primes_up_to(300)) {
            const auto& lp = m.local(PrimeIdeal{p, 0, p});
            REQUIRE(std::abs(lp.alphas[0]) <= 1.0 + 1e-12);
        }
    for (int n : {2, 3, 4})
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            auto f = synthetic_family(NumberFieldSpec::quadratic(-1), n, 3, seed, SyntheticModel::planted(5, theta_n(n)));
            for (const auto& m : f.members)
                for (const auto& P : prime_ideals_up_to(f.field, 300)) REQUIRE_NOTHROW(m.local(P));
        }
}

TEST_CASE("lazy fill is safe under concurrent readers") {
    auto f = synthetic_family(3, 1, 8, SyntheticModel::grc());
    const auto& rep = f.members[0];
    auto primes = primes_up_to(2000);
    std::vector<std::vector<cd>> seen(4);
    std::vector<std::thread> ts;
    for (int t = 0; t < 4; ++t)
        ts.emplace_back([&, t] {
            for (auto p : primes) {
                auto a = rep.local(PrimeIdeal{p, 0, p}).alphas;
                seen[t].insert(seen[t].end(), a.begin(), a.end());
            }
        });
    for (auto& t : ts) t.join();
    for (int t = 1; t < 4; ++t) CHECK(seen[t] == seen[0]);
    CHECK(rep.materialized() == primes.size());
}

TEST_CASE("ingest_hecke_eigenvalues") {
    auto delta = ingest_hecke_eigenvalues(std::string(RSLAB_DATA_DIR) + "/delta_ap_2000.csv", 12, 1);
    auto a2 = delta.local(PrimeIdeal{2, 0, 2}).alphas;
    CHECK((a2[0] + a2[1]).real() == Approx(-24.0 / std::pow(2.0, 5.5)).epsilon(1e-14));
    CHECK((a2[0] + a2[1]).real() == Approx(-0.530330086).margin(1e-9));
    for (auto p : primes_up_to(2000)) {
        auto a = delta.local(PrimeIdeal{p, 0, p}).alphas;
        REQUIRE(std::abs(a[0] * a[1] - cd(1, 0)) < 1e-12);
        REQUIRE(std::abs(std::abs(a[0]) - 1.0) < 1e-9);  // Deligne
    }
    CHECK(analytic_conductor(delta, 0) == Approx((3 + 5.5) * (3 + 6.5)));
    CHECK_THROWS_AS(delta.local(PrimeIdeal{2003, 0, 2003}), DataError);

    auto empty = ingest_hecke_eigenvalues(write_temp("empty.csv", ""), 12, 1);
    CHECK(empty.materialized() == 0);
    CHECK_THROWS_AS(empty.local(PrimeIdeal{2, 0, 2}), DataError);

    auto headered = ingest_hecke_eigenvalues(write_temp("hdr.csv", "p,a_p\n2,-24\n3,252\n"), 12, 1);
    CHECK(headered.local(PrimeIdeal{3, 0, 3}).alphas.size() == 2);

    try {
        ingest_hecke_eigenvalues(write_temp("bad.csv", "2,-24\n3,abc\n"), 12, 1);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(ingest_hecke_eigenvalues(write_temp("np.csv", "2,-24\n4,1\n"), 12, 1), ParseError);
    CHECK_THROWS_AS(ingest_hecke_eigenvalues(write_temp("desc.csv", "3,252\n2,-24\n"), 12, 1), ParseError);
    CHECK_THROWS_AS(ingest_hecke_eigenvalues(write_temp("big.csv", "2,-2000\n"), 12, 1), DataError);
    CHECK_THROWS_AS(ingest_hecke_eigenvalues(write_temp("x.csv", "2,-24\n"), 11, 1), UsageError);
    CHECK_THROWS_AS(ingest_hecke_eigenvalues("/nonexistent/file.csv", 12, 1), IoError);

    // Level 11, weight 2: a_11 = 1 at the ramified prime stores {lambda, 0}.
    auto e11 = ingest_hecke_eigenvalues(write_temp("e11.csv", "2,-2\n3,-1\n5,1\n7,-2\n11,1\n"), 2, 11);
    auto a11 = e11.local(PrimeIdeal{11, 0, 11}).alphas;
    CHECK(a11[0].real() == Approx(1.0 / std::sqrt(11.0)).epsilon(1e-14));
    CHECK(a11[1] == cd(0, 0));
    CHECK(e11.conductor().norm == 11);
}
