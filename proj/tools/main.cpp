// speechmap command-line interface: one subcommand per pipeline stage.
//
// Configuration comes from (in order) built-in defaults, --config FILE (or
// $SPEECHMAP_CONFIG), then dotted-path overrides: either --set key=value or
// direct flags like --stage1.alpha 7.
//
// Exit codes: 0 ok, 2 config error, 3 missing prerequisite, 4 numeric
// failure, 5 I/O error.

#include "speechmap/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

struct cli_state {
    std::string config_path;
    std::vector<std::string> overrides;
    sm::cmd_options opts;
    double sigma = -1.0;  // adapt convenience flag
};

// accept trailing "--section.key value" / "--section.key=value" tokens
void collect_dotted_overrides(std::vector<std::string> extras, std::vector<std::string>& overrides) {
    // CLI11 returns remaining args in reverse order
    std::reverse(extras.begin(), extras.end());
    for (size_t i = 0; i < extras.size(); ++i) {
        std::string tok = extras[i];
        if (tok.rfind("--", 0) != 0 || tok.find('.') == std::string::npos) {
            throw sm::config_error("unrecognized argument: " + tok);
        }
        tok = tok.substr(2);
        if (tok.find('=') != std::string::npos) {
            overrides.push_back(tok);
        } else {
            if (i + 1 >= extras.size()) throw sm::config_error("missing value for --" + tok);
            overrides.push_back(tok + "=" + extras[++i]);
        }
    }
}

int dispatch(const std::string& command, cli_state& st) {
    if (st.config_path.empty()) {
        if (const char* env = std::getenv("SPEECHMAP_CONFIG")) st.config_path = env;
    }
    if (st.sigma >= 0.0) st.overrides.push_back("stage2.sigma=" + std::to_string(st.sigma));

    std::vector<std::string> warnings;
    const sm::experiment_config cfg = sm::load_config(st.config_path, st.overrides, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    if (command == "synth") sm::cmd_synth(cfg, st.opts);
    else if (command == "pretrain-decoder") sm::cmd_pretrain_decoder(cfg, st.opts);
    else if (command == "pretrain") sm::cmd_pretrain(cfg, st.opts);
    else if (command == "adapt") sm::cmd_adapt(cfg, st.opts);
    else if (command == "probe") sm::cmd_probe(cfg, st.opts);
    else if (command == "eval") sm::cmd_eval(cfg, st.opts);
    else if (command == "decode") sm::cmd_decode(cfg, st.opts);
    else if (command == "cache-targets") sm::cmd_cache_targets(cfg, st.opts);
    else if (command == "sweep") sm::cmd_sweep(cfg, st.opts);
    else throw sm::config_error("unknown command: " + command);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speechmap: two-stage speech-to-embedding projector training"};
    app.require_subcommand(1);
    app.allow_extras();

    cli_state st;
    app.add_option("--config", st.config_path, "config file (JSON); default $SPEECHMAP_CONFIG");
    app.add_option("--set", st.overrides, "override a config field, e.g. --set stage1.alpha=7");

    auto add_common = [&](CLI::App* cmd) {
        cmd->allow_extras();
        cmd->fallthrough();  // route --config / --set given after the subcommand
        cmd->add_option("--out", st.opts.out, "output path override");
        cmd->add_flag("--quiet", st.opts.quiet, "suppress progress output");
        return cmd;
    };

    auto* synth = add_common(app.add_subcommand("synth", "generate the synthetic corpus"));
    synth->add_flag("--force", st.opts.force, "overwrite an existing corpus");

    add_common(app.add_subcommand("pretrain-decoder", "train and freeze the toy decoder"));

    auto* pretrain = add_common(app.add_subcommand("pretrain", "stage 1: embedding-matching training"));
    pretrain->add_flag("--resume", st.opts.resume, "continue from the stage-1 checkpoint");
    pretrain->add_flag("--use-target-cache", st.opts.use_cache, "read/write the target cache");
    pretrain->add_option("--decoder", st.opts.decoder_ckpt, "decoder checkpoint path");

    auto* adapt = add_common(app.add_subcommand("adapt", "stage 2: adaptation against the frozen decoder"));
    adapt->add_option("--sigma", st.sigma, "stage-2 MSE weight (overrides stage2.sigma)");
    adapt->add_flag("--from-scratch", st.opts.from_scratch, "skip the stage-1 checkpoint");
    adapt->add_option("--projector", st.opts.projector_ckpt, "stage-1 checkpoint path");
    adapt->add_option("--decoder", st.opts.decoder_ckpt, "decoder checkpoint path");
    adapt->add_flag("--use-target-cache", st.opts.use_cache, "read/write the target cache");

    auto* probe = add_common(app.add_subcommand("probe", "noise probe: derive the MSE target"));
    probe->add_option("--decoder", st.opts.decoder_ckpt, "decoder checkpoint path");

    auto* eval = add_common(app.add_subcommand("eval", "decode a split and score WER/CER"));
    eval->add_option("--projector", st.opts.projector_ckpt, "projector checkpoint path");
    eval->add_option("--decoder", st.opts.decoder_ckpt, "decoder checkpoint path");
    eval->add_option("--split", st.opts.split, "dev | train | all (default dev)");
    eval->add_option("--max-tokens", st.opts.max_tokens, "greedy decoding cap (default 150)");
    eval->add_flag("--oracle", st.opts.oracle, "bypass the projector with clean embeddings");
    eval->add_flag("--raw-scores", st.opts.raw_scores, "skip hypothesis normalization");

    auto* decode = add_common(app.add_subcommand("decode", "decode a single utterance"));
    decode->add_option("--text", st.opts.text, "transcript to synthesize and decode")->required();
    decode->add_flag("--oracle", st.opts.oracle, "bypass the projector with clean embeddings");
    decode->add_option("--projector", st.opts.projector_ckpt, "projector checkpoint path");
    decode->add_option("--decoder", st.opts.decoder_ckpt, "decoder checkpoint path");
    decode->add_option("--max-tokens", st.opts.max_tokens, "greedy decoding cap (default 150)");

    auto* cache = add_common(app.add_subcommand("cache-targets", "precompute the target cache"));
    cache->add_option("--decoder", st.opts.decoder_ckpt, "decoder checkpoint path");
    cache->add_flag("--force", st.opts.force, "overwrite an existing cache");

    auto* sweep = add_common(app.add_subcommand("sweep", "adapt once per sigma and compare WER"));
    sweep->add_option("--sigma", st.opts.sigmas, "sigma values to sweep (repeatable)");
    sweep->add_option("--projector", st.opts.projector_ckpt, "stage-1 checkpoint path");
    sweep->add_option("--decoder", st.opts.decoder_ckpt, "decoder checkpoint path");

    try {
        app.parse(argc, argv);
        collect_dotted_overrides(app.remaining(true), st.overrides);
        const std::string command = app.get_subcommands().front()->get_name();
        return dispatch(command, st);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const sm::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sm::prereq_error& e) {
        std::cerr << "missing prerequisite: " << e.what() << "\n";
        return 3;
    } catch (const sm::numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const sm::io_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
