// Pipeline commands. Each one reads its prerequisites, runs one stage, and
// writes its artifacts plus the resolved config it ran with. The CLI and the
// acceptance suite both drive these entry points; training runs in single
// precision here.
#pragma once

#include "speechmap/config.hpp"

#include <string>
#include <vector>

namespace sm {

struct cmd_options {
    std::string out;             // overrides the default artifact path
    bool force = false;          // overwrite existing outputs
    bool resume = false;         // continue stage 1 from its checkpoint
    bool from_scratch = false;   // adapt without a stage-1 checkpoint
    bool oracle = false;         // bypass the projector (clean embeddings)
    bool raw_scores = false;     // skip hypothesis normalization
    bool use_cache = false;      // read/write the precomputed-target cache
    bool quiet = false;
    std::string text;            // cmd_decode input
    std::string projector_ckpt;  // explicit checkpoint paths (defaults apply)
    std::string decoder_ckpt;
    std::string split = "dev";   // eval split: dev | train | all
    int max_tokens = 150;
    std::vector<double> sigmas;  // cmd_sweep ladder
};

// default artifact locations under the configured paths
std::string decoder_ckpt_path(const experiment_config& cfg);
std::string stage1_ckpt_path(const experiment_config& cfg);
std::string stage2_ckpt_path(const experiment_config& cfg, double sigma);

void cmd_synth(const experiment_config& cfg, const cmd_options& opts);
void cmd_pretrain_decoder(const experiment_config& cfg, const cmd_options& opts);
void cmd_pretrain(const experiment_config& cfg, const cmd_options& opts);
void cmd_adapt(const experiment_config& cfg, const cmd_options& opts);
void cmd_probe(const experiment_config& cfg, const cmd_options& opts);
void cmd_eval(const experiment_config& cfg, const cmd_options& opts);
void cmd_decode(const experiment_config& cfg, const cmd_options& opts);
void cmd_cache_targets(const experiment_config& cfg, const cmd_options& opts);
void cmd_sweep(const experiment_config& cfg, const cmd_options& opts);

// building blocks shared with the tests and the acceptance suite
vocab build_vocab(const experiment_config& cfg);
toy_decoder<float> load_decoder_f32(const experiment_config& cfg, const std::string& path);
projector_model<float> load_projector_f32(const experiment_config& cfg, const std::string& path);
std::vector<corpus_sample> require_corpus(const experiment_config& cfg);

}  // namespace sm
