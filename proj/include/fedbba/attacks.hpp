#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedbba/datamodel.hpp"
#include "fedbba/numerics.hpp"

namespace fedbba {

struct TriggerSpec {
    std::vector<std::size_t> mask;  // pixel indices
    double intensity = 1.0;

    static TriggerSpec row(std::size_t r, std::size_t width, double intensity);
    void validate(std::size_t pixels) const;
};

enum class AttackFamily { OneToOne, OneToN, NToOne };
enum class AttackStrategy { MultiRound, ModelReplacement };

struct AttackPlan {
    AttackFamily family = AttackFamily::OneToOne;
    AttackStrategy strategy = AttackStrategy::MultiRound;
    std::vector<TriggerSpec> triggers;
    std::vector<int> targets;  // one entry, or one per trigger for OneToN
    // Fixed poisoning ratio; nullopt means the adaptive best response is
    // recomputed every round from the client's published reputation.
    std::optional<double> rho = 0.5;
    std::size_t replacement_round = 0;  // ModelReplacement: round T' (1-based)
    double boost = 0.0;                 // ModelReplacement: 0 = clients per round

    int target_for(std::size_t trigger_index) const;
    void validate(std::size_t pixels, std::size_t classes) const;
};

std::string to_string(AttackFamily f);
std::string to_string(AttackStrategy s);

// Masked pixels take the trigger intensity; everything else is unchanged.
Vector apply_trigger(std::span<const double> image, const TriggerSpec& t);

// Poisons exactly ⌊rho·n⌋ uniformly chosen rows. Cardinality is preserved and
// untouched rows are bit-identical to the input.
ImageDataset poison_dataset(const ImageDataset& ds, const AttackPlan& plan, double rho, RngStream& rng);

// Fine-tunes from the global model on poisoned data, then scales the delta by
// boost so it survives averaging.
ModelParams craft_replacement_update(const ModelParams& global, const ImageDataset& poisoned,
                                     const TrainConfig& cfg, double boost, RngStream& rng);

// ASR evaluation set: every sample stamped per the family and relabelled to
// its target. Samples already of the target class are dropped.
ImageDataset build_triggered_testset(const ImageDataset& ds, const AttackPlan& plan);

// Negative control for NToOne: stamps every trigger except `omitted`.
ImageDataset build_partial_trigger_testset(const ImageDataset& ds, const AttackPlan& plan,
                                           std::size_t omitted);

} // namespace fedbba
