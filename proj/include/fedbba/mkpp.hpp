#pragma once

#include <cstddef>
#include <vector>

#include "fedbba/numerics.hpp"

namespace fedbba {

enum class SearchType { MaximizeKurtosis, MinimizeKurtosis };
enum class UpdateVariant { Standard, Shifted };

struct MkppConfig {
    std::size_t p = 2;            // projection dimension
    std::size_t guess = 8;        // random restarts per component
    SearchType max_min = SearchType::MaximizeKurtosis;
    UpdateVariant st_sh = UpdateVariant::Standard;
    std::size_t maxcount = 1000;  // iteration cap per restart
    double tol = 1e-6;            // convergence threshold on ‖ΔV‖ (sign aligned)
    // Leading singular directions kept after the SVD step; 0 keeps the full
    // numerical rank.
    std::size_t reduce_dim = 0;

    void validate() const;
};

struct MkppResult {
    Matrix scores;       // n×p, centered data times projections
    Matrix projections;  // d×p, unit-norm columns
    Vector kurt_per_guess;            // final kurtosis of each restart, first component
    std::vector<bool> converged_flags;  // per restart, first component
    Vector component_kurtosis;        // kurtosis of each selected component
};

// Kurtosis projection pursuit with random restarts and deflation. Runs in the
// whitened leading-SVD subspace, where the kurtosis of a unit direction is
// the plain fourth moment of its scores.
MkppResult mkpp(const Matrix& x, const MkppConfig& cfg, RngStream& rng);

// Centered data times the top-p right singular vectors.
Matrix pca_scores(const Matrix& x, std::size_t p);

} // namespace fedbba
