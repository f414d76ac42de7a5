#pragma once

#include <cstdint>
#include <string>

#include "fedbba/engine.hpp"

namespace fedbba {

// Config files are flat `key = value` lines grouped under `[section]`
// headers; `#` starts a comment. Every key is optional and unknown keys are
// rejected. Sections: experiment, data, model, train, attack, reputation,
// game, mkpp, dbscan.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig parse_config(const std::string& path);

// Canonical text form; parse_config_text(config_to_text(c)) reproduces c.
std::string config_to_text(const ExperimentConfig& cfg);

// Triggers and targets used when a family is selected without spelling them
// out: OneToOne stamps row 0 → last class; OneToN stamps row 0 → last class
// and row 1 → second-to-last; NToOne needs rows 0 and 7 together → last class.
void apply_family_defaults(ExperimentConfig& cfg, AttackFamily family);

AttackFamily parse_family(const std::string& s);
AttackStrategy parse_strategy(const std::string& s);
Defense parse_defense(const std::string& s);

// 30 clients all participating, 10 poisoned with the first-row trigger,
// 30 rounds under FedBBA; scores compare the leading projection only.
ExperimentConfig separation_preset();

inline constexpr const char* kVersion = "fedbba 1.0.0";

struct RunManifest {
    std::string command;
    std::string config_path;  // empty when running on defaults
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::string version = kVersion;

    std::string to_json() const;
};

} // namespace fedbba
