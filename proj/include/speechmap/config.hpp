// Experiment configuration: one nested document wiring every module, loaded
// from JSON with unknown keys rejected and dotted-path overrides applied on
// top. The resolved document is what run directories record for provenance.
#pragma once

#include "speechmap/corpus.hpp"
#include "speechmap/decoder.hpp"
#include "speechmap/probe.hpp"
#include "speechmap/projector.hpp"
#include "speechmap/synth.hpp"
#include "speechmap/train.hpp"

#include <json.hpp>

#include <array>
#include <string>
#include <vector>

namespace sm {

struct paths_config {
    std::string corpus = "runs/corpus.tsv";
    std::string cache = "runs/targets.smtc";
    std::string checkpoints = "runs";
    std::string reports = "runs";
};

struct experiment_config {
    uint64_t seed = 7;
    int content_words = 250;
    paths_config paths;
    corpus_config corpus;
    synth_config synth;
    projector_config projector;
    decoder_config decoder;
    decoder_pretrain_config decoder_pretrain;
    stage1_config stage1;
    stage2_config stage2;
    probe_config probe;
};

nlohmann::json to_json(const experiment_config& cfg);
experiment_config config_from_json(const nlohmann::json& j);

// start from defaults, deep-merge the file (if any), then apply overrides of
// the form "section.key=value"; unknown keys or paths are hard errors
experiment_config load_config(const std::string& file_path,
                              const std::vector<std::string>& overrides,
                              std::vector<std::string>* warnings = nullptr);

// cross-module consistency checks; throws config_error naming field paths,
// returns soft warnings
std::vector<std::string> validate_experiment(const experiment_config& cfg);

// canonical hash over the named top-level sections of the resolved config,
// plus optional extra strings (e.g. upstream checkpoint digests)
std::array<uint8_t, 32> config_hash(const experiment_config& cfg,
                                    const std::vector<std::string>& sections,
                                    const std::vector<std::string>& extra = {});

// worst-case averaged input length for the configured corpus and synth
int worst_case_avg_frames(const experiment_config& cfg);

}  // namespace sm
