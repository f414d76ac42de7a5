#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fedbba/engine.hpp"

namespace fedbba {

// Shortest text that reads back to exactly the same double.
std::string format_number(double v);

// One row per round: round, clean_accuracy, asr, then for each selected
// client slot k the group c<k>_client_id, c<k>_is_malicious, c<k>_weight,
// c<k>_reputation, c<k>_score_0..c<k>_score_{p-1}, c<k>_cluster,
// c<k>_flagged. The header row is always written.
void write_rounds_csv(std::ostream& out, const std::vector<RoundReport>& rounds, std::size_t per_round,
                      std::size_t score_dims);

// Flat key/value JSON object with the run's headline metrics.
std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& result);

// client_id, poisoned, score_0..score_{p-1}
void write_scores_csv(std::ostream& out, const std::vector<std::size_t>& ids, const std::vector<bool>& poisoned,
                      const Matrix& scores);

struct SensitivityRow {
    double alpha = 0.0;
    double beta = 0.0;
    ExperimentSummary summary;
};

// α = 0.1, 0.2, …, 0.9 with β = 1 − α; everything else from `base`.
std::vector<SensitivityRow> run_sensitivity(const ExperimentConfig& base);

// alpha, beta, final_accuracy, final_asr, mean_accuracy_last5, mean_asr_last5
void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows);

struct CertifyResult {
    bool passed = false;
    SaddleReport saddle;              // reputations drawn for cfg.total_clients clients
    std::size_t triples = 0;          // random (R, θ, λ) closed-form checks
    double max_closed_form_gap = 0.0; // |closed form − grid argmax|
    std::string to_text() const;
};

// Grid-certifies the equilibrium for the configured game: saddle inequalities
// on a reproducible reputation profile (first malicious_count clients
// compromised) plus 20 random triples with λ ≥ (R_max + θ)/2.
CertifyResult certify(const ExperimentConfig& cfg, double grid_step = 0.01);

} // namespace fedbba
