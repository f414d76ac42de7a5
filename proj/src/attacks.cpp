#include "fedbba/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "fedbba/errors.hpp"

namespace fedbba {

TriggerSpec TriggerSpec::row(std::size_t r, std::size_t width, double intensity) {
    TriggerSpec t{{}, intensity};
    for (std::size_t c = 0; c < width; ++c) t.mask.push_back(r * width + c);
    return t;
}

void TriggerSpec::validate(std::size_t pixels) const {
    for (std::size_t p : mask)
        if (p >= pixels) throw InvalidInput("trigger pixel " + std::to_string(p) + " out of bounds");
    if (!(intensity >= 0.0 && intensity <= 1.0)) throw InvalidInput("trigger intensity outside [0,1]");
}

int AttackPlan::target_for(std::size_t trigger_index) const {
    return family == AttackFamily::OneToN ? targets.at(trigger_index) : targets.at(0);
}

void AttackPlan::validate(std::size_t pixels, std::size_t classes) const {
    if (triggers.empty()) throw InvalidConfig("attack.triggers must list at least one trigger");
    switch (family) {
    case AttackFamily::OneToOne:
        if (triggers.size() != 1 || targets.size() != 1)
            throw InvalidConfig("attack.triggers/attack.targets: one_to_one takes exactly one trigger and one target");
        break;
    case AttackFamily::OneToN:
        if (targets.size() != triggers.size())
            throw InvalidConfig("attack.targets: one_to_n needs one target per trigger");
        break;
    case AttackFamily::NToOne:
        if (targets.size() != 1 || triggers.size() < 2)
            throw InvalidConfig("attack.triggers/attack.targets: n_to_one takes at least two triggers and one target");
        break;
    }
    for (const auto& t : triggers) {
        try {
            t.validate(pixels);
        } catch (const InvalidInput& e) {
            throw InvalidConfig(std::string("attack.triggers: ") + e.what());
        }
    }
    for (int y : targets)
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw InvalidConfig("attack.targets entry out of range for data.classes");
    if (rho && !(*rho >= 0.0 && *rho <= 1.0)) throw InvalidConfig("attack.rho must be in [0,1]");
    if (strategy == AttackStrategy::ModelReplacement && replacement_round < 1)
        throw InvalidConfig("attack.replacement_round must be >= 1 for the replacement strategy");
    if (boost != 0.0 && boost < 1.0) throw InvalidConfig("attack.boost must be >= 1 (or 0 for default)");
}

std::string to_string(AttackFamily f) {
    switch (f) {
    case AttackFamily::OneToOne: return "one_to_one";
    case AttackFamily::OneToN: return "one_to_n";
    case AttackFamily::NToOne: return "n_to_one";
    }
    return "?";
}

std::string to_string(AttackStrategy s) {
    return s == AttackStrategy::MultiRound ? "multi_round" : "replacement";
}

namespace {

void stamp(std::span<double> image, const TriggerSpec& t) {
    for (std::size_t p : t.mask) image[p] = std::clamp(t.intensity, 0.0, 1.0);
}

} // namespace

Vector apply_trigger(std::span<const double> image, const TriggerSpec& t) {
    t.validate(image.size());
    Vector out(image.begin(), image.end());
    stamp(out, t);
    return out;
}

ImageDataset poison_dataset(const ImageDataset& ds, const AttackPlan& plan, double rho, RngStream& rng) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidInput("rho must be in [0,1]");
    plan.validate(ds.pixels(), ds.classes);
    ImageDataset out = ds;
    const auto count = static_cast<std::size_t>(std::floor(rho * static_cast<double>(ds.size())));
    if (count == 0) return out;

    std::vector<std::size_t> rows(ds.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    rng.shuffle(rows);
    rows.resize(count);
    std::sort(rows.begin(), rows.end());

    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto image = out.images.row(rows[k]);
        switch (plan.family) {
        case AttackFamily::OneToOne:
            stamp(image, plan.triggers[0]);
            out.labels[rows[k]] = plan.targets[0];
            break;
        case AttackFamily::OneToN: {
            const std::size_t t = k % plan.triggers.size();
            stamp(image, plan.triggers[t]);
            out.labels[rows[k]] = plan.targets[t];
            break;
        }
        case AttackFamily::NToOne:
            for (const auto& t : plan.triggers) stamp(image, t);
            out.labels[rows[k]] = plan.targets[0];
            break;
        }
    }
    return out;
}

ModelParams craft_replacement_update(const ModelParams& global, const ImageDataset& poisoned,
                                     const TrainConfig& cfg, double boost, RngStream& rng) {
    if (!(boost >= 1.0)) throw InvalidInput("boost must be >= 1");
    ModelParams trained = train_local(global, poisoned, cfg, rng);
    if (boost == 1.0) return trained;
    for (std::size_t i = 0; i < trained.flat.size(); ++i)
        trained.flat[i] = global.flat[i] + boost * (trained.flat[i] - global.flat[i]);
    return trained;
}

namespace {

ImageDataset stamped_set(const ImageDataset& ds, const AttackPlan& plan, std::optional<std::size_t> omitted) {
    if (ds.size() == 0) throw InvalidInput("empty dataset");
    plan.validate(ds.pixels(), ds.classes);
    std::vector<std::size_t> keep;
    std::vector<int> labels;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t t = plan.family == AttackFamily::OneToN ? i % plan.triggers.size() : 0;
        const int target = plan.target_for(t);
        if (ds.labels[i] == target) continue;
        keep.push_back(i);
        labels.push_back(target);
    }
    if (keep.empty()) throw InvalidInput("every sample already has the target label");
    ImageDataset out = ds.subset(keep);
    out.labels = std::move(labels);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        auto image = out.images.row(k);
        switch (plan.family) {
        case AttackFamily::OneToOne: stamp(image, plan.triggers[0]); break;
        case AttackFamily::OneToN: stamp(image, plan.triggers[keep[k] % plan.triggers.size()]); break;
        case AttackFamily::NToOne:
            for (std::size_t t = 0; t < plan.triggers.size(); ++t)
                if (!omitted || *omitted != t) stamp(image, plan.triggers[t]);
            break;
        }
    }
    return out;
}

} // namespace

ImageDataset build_triggered_testset(const ImageDataset& ds, const AttackPlan& plan) {
    return stamped_set(ds, plan, std::nullopt);
}

ImageDataset build_partial_trigger_testset(const ImageDataset& ds, const AttackPlan& plan, std::size_t omitted) {
    if (plan.family != AttackFamily::NToOne) throw InvalidInput("partial triggers only apply to n_to_one");
    if (omitted >= plan.triggers.size()) throw InvalidInput("omitted trigger index out of range");
    return stamped_set(ds, plan, omitted);
}

} // namespace fedbba
