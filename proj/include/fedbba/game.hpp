#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fedbba {

struct GameParams {
    double theta = 0.5;       // similarity baseline
    double lambda_min = 0.5;  // defense sensitivity interval
    double lambda_max = 1.0;
    double r_max = 1.0;

    void validate() const;
};

struct GameState {
    std::vector<double> reputations;       // R_i for all N clients
    std::vector<double> rho;               // ρ_i, 0 for benign clients
    double lambda = 1.0;
    std::vector<std::size_t> compromised;  // 𝓘′
};

double similarity_score(double rho, double lambda, double theta);

// w_i ∝ max(R_i + θ − λρ_i, 0), normalized to sum to one.
std::vector<double> aggregation_weights(const std::vector<double>& reputations, const std::vector<double>& rho,
                                        double lambda, double theta);

// J = Σ_{i∈𝓘′} w_i·ρ_i.
double joint_objective(const GameState& state, double theta);
inline double server_utility(double j) { return -j; }
inline double adversary_utility(double j) { return j; }

// min{(R + θ)/(2λ), 1}
double best_response_rho(double reputation, double theta, double lambda);

// Argmax of the surrogate (R+θ)ρ − λρ² over ρ ∈ {0, step, 2·step, …, 1}.
double grid_best_response(double reputation, double theta, double lambda, double step);

// λ_max, provided λ_max ≥ (R_max + θ)/2; throws CriterionViolated otherwise.
double optimal_lambda(const GameParams& params);

// Separable surrogate J̃(λ, ρ) = (1/C)·Σ_{i∈𝓘′} [(R_i+θ)ρ_i − λρ_i²] with
// C = Σ_j (R_j + θ) over all clients.
double surrogate_objective(const std::vector<double>& reputations, const std::vector<std::size_t>& compromised,
                           const std::vector<double>& rho, double lambda, double theta);

struct SaddleReport {
    bool passed = false;
    double lambda_star = 0.0;
    std::vector<double> rho_star;     // per compromised client
    double value = 0.0;               // J̃(λ*, ρ*)
    double worst_violation = 0.0;     // largest positive breach of either inequality
    double max_argmax_gap = 0.0;      // |ρ* − grid argmax| over compromised clients
    std::size_t lambda_points = 0;
    std::size_t rho_points = 0;
    std::string note;

    std::string to_text() const;
};

// Grid check of J̃(λ*, ρ) ≤ J̃(λ*, ρ*) ≤ J̃(λ, ρ*) within 1e-9. The adversary
// side is checked coordinate-wise, which covers every grid vector because
// J̃ is separable across compromised clients.
SaddleReport verify_saddle(const GameParams& params, const std::vector<double>& reputations,
                           const std::vector<std::size_t>& compromised, double grid_step);

// All clients compromised.
SaddleReport verify_saddle(const GameParams& params, const std::vector<double>& reputations, double grid_step);

} // namespace fedbba
