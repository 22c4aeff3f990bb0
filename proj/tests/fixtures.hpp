#pragma once

#include <string>
#include <vector>

#include "rslab/localdata.hpp"

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(RSLAB_DATA_DIR) + "/" + name; }

inline rslab::Representation delta() { return rslab::ingest_hecke_eigenvalues(data("delta_ap_2000.csv"), 12, 1); }

// A mixed bag of representations over the rationals used by the property suites.
inline std::vector<rslab::Representation> test_reps(bool with_delta = true) {
    using namespace rslab;
    std::vector<Representation> reps;
    for (auto& m : dirichlet_modulus_family(10).members) reps.push_back(m);
    for (auto& m : synthetic_family(2, 3, 101, SyntheticModel::grc()).members) reps.push_back(m);
    for (auto& m : synthetic_family(2, 2, 102, SyntheticModel::planted(2, 0.3, 2)).members) reps.push_back(m);
    for (auto& m : synthetic_family(3, 2, 103, SyntheticModel::planted(3, 0.4)).members) reps.push_back(m);
    if (with_delta) reps.push_back(delta());
    return reps;
}

// Power-series inversion of prod_j (1 - g_j x): coefficients 0..k.
inline std::vector<rslab::cd> invert_series(const std::vector<rslab::cd>& gammas, int k) {
    std::vector<rslab::cd> poly(gammas.size() + 1, 0.0);
    poly[0] = 1;
    for (auto g : gammas) {
        std::vector<rslab::cd> next(poly.size(), 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            if (i + 1 < poly.size()) next[i + 1] -= g * poly[i];
        }
        poly = next;
    }
    std::vector<rslab::cd> b(k + 1, 0.0);
    b[0] = 1;
    for (int n = 1; n <= k; ++n)
        for (int j = 1; j <= n && j < static_cast<int>(poly.size()); ++j) b[n] -= poly[j] * b[n - j];
    return b;
}

}  // namespace fixtures
