#include "speechmap/config.hpp"

#include <cstdlib>
#include <fstream>

namespace sm {

using nlohmann::json;

namespace {

std::string schedule_mode_name(schedule_mode m) {
    return m == schedule_mode::warmup_cosine ? "warmup-cosine" : "constant";
}

schedule_mode schedule_mode_of(const std::string& s, const std::string& path) {
    if (s == "warmup-cosine") return schedule_mode::warmup_cosine;
    if (s == "constant") return schedule_mode::constant;
    throw config_error(path + ": expected 'warmup-cosine' or 'constant', got '" + s + "'");
}

std::string policy_name(length_mismatch_policy p) {
    return p == length_mismatch_policy::skip_warn ? "skip-warn" : "abort";
}

length_mismatch_policy policy_of(const std::string& s, const std::string& path) {
    if (s == "skip-warn") return length_mismatch_policy::skip_warn;
    if (s == "abort") return length_mismatch_policy::abort_run;
    throw config_error(path + ": expected 'skip-warn' or 'abort', got '" + s + "'");
}

template <class T>
T get_field(const json& j, const std::string& section, const char* key) {
    const std::string path = section.empty() ? key : section + "." + key;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("config field " + path + " has the wrong type or is missing");
    }
}

void check_unknown_keys(const json& user, const json& schema, const std::string& path) {
    if (!user.is_object()) {
        throw config_error("config section " + (path.empty() ? std::string("<root>") : path) +
                           " must be an object");
    }
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string child = path.empty() ? it.key() : path + "." + it.key();
        if (!schema.contains(it.key())) throw config_error("unknown config key: " + child);
        if (schema.at(it.key()).is_object()) check_unknown_keys(it.value(), schema.at(it.key()), child);
    }
}

void deep_merge(json& base, const json& user) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) && base.at(it.key()).is_object()) {
            deep_merge(base.at(it.key()), it.value());
        } else {
            base[it.key()] = it.value();
        }
    }
}

json parse_override_value(const std::string& text) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) return json(text);  // treat unparseable values as strings
    return v;
}

}  // namespace

nlohmann::json to_json(const experiment_config& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["content_words"] = cfg.content_words;
    j["paths"] = {{"corpus", cfg.paths.corpus},
                  {"cache", cfg.paths.cache},
                  {"checkpoints", cfg.paths.checkpoints},
                  {"reports", cfg.paths.reports}};
    j["corpus"] = {{"samples", cfg.corpus.samples},
                   {"min_words", cfg.corpus.min_words},
                   {"max_words", cfg.corpus.max_words},
                   {"dev_fraction", cfg.corpus.dev_fraction}};
    j["synth"] = {{"d_in", cfg.synth.d_in},
                  {"repeat_min", cfg.synth.repeat_min},
                  {"repeat_max", cfg.synth.repeat_max},
                  {"noise_sigma", cfg.synth.noise_sigma},
                  {"silence_frames", cfg.synth.silence_frames},
                  {"acoustic_norm", cfg.synth.acoustic_norm},
                  {"order_scale", cfg.synth.order_scale}};
    j["projector"] = {{"d_in", cfg.projector.d_in},
                      {"d_mid", cfg.projector.d_mid},
                      {"d_out", cfg.projector.d_out},
                      {"layers_per_block", cfg.projector.layers_per_block},
                      {"heads", cfg.projector.heads},
                      {"ffn_mult", cfg.projector.ffn_mult},
                      {"kernel", cfg.projector.kernel},
                      {"stride", cfg.projector.stride},
                      {"pad", cfg.projector.pad},
                      {"dropout", cfg.projector.dropout},
                      {"avg_factor", cfg.projector.avg_factor}};
    j["decoder"] = {{"d_model", cfg.decoder.d_model},
                    {"layers", cfg.decoder.layers},
                    {"heads", cfg.decoder.heads},
                    {"ffn_mult", cfg.decoder.ffn_mult},
                    {"max_len", cfg.decoder.max_len},
                    {"dropout", cfg.decoder.dropout}};
    j["decoder_pretrain"] = {{"lr", cfg.decoder_pretrain.lr},
                             {"batch_sentences", cfg.decoder_pretrain.batch_sentences},
                             {"max_steps", cfg.decoder_pretrain.max_steps},
                             {"eval_every", cfg.decoder_pretrain.eval_every},
                             {"eval_samples", cfg.decoder_pretrain.eval_samples},
                             {"target_wer", cfg.decoder_pretrain.target_wer},
                             {"pad_augment_prob", cfg.decoder_pretrain.pad_augment_prob},
                             {"grad_clip", cfg.decoder_pretrain.grad_clip}};
    j["stage1"] = {{"lr", cfg.stage1.schedule.base_lr},
                   {"initial_lr", cfg.stage1.schedule.initial_lr},
                   {"warmup_steps", cfg.stage1.schedule.warmup_steps},
                   {"schedule", schedule_mode_name(cfg.stage1.schedule.mode)},
                   {"total_steps", cfg.stage1.total_steps},
                   {"batch_cap", cfg.stage1.batch_cap},
                   {"alpha", cfg.stage1.weights.alpha},
                   {"gamma", cfg.stage1.weights.gamma},
                   {"mse_scale", cfg.stage1.weights.mse_scale},
                   {"grad_clip", cfg.stage1.grad_clip},
                   {"checkpoint_every", cfg.stage1.checkpoint_every},
                   {"on_length_mismatch", policy_name(cfg.stage1.on_length_mismatch)}};
    j["stage2"] = {{"lr", cfg.stage2.lr},
                   {"steps", cfg.stage2.steps},
                   {"grad_accum", cfg.stage2.grad_accum},
                   {"batch_size", cfg.stage2.batch_size},
                   {"sigma", cfg.stage2.weights.sigma},
                   {"alpha", cfg.stage2.weights.alpha},
                   {"mse_scale", cfg.stage2.weights.mse_scale},
                   {"grad_clip", cfg.stage2.grad_clip}};
    j["probe"] = {{"degrees", cfg.probe.degrees},
                  {"samples", cfg.probe.samples},
                  {"max_tokens", cfg.probe.max_tokens},
                  {"tolerance_band", cfg.probe.tolerance_band},
                  {"raw_degrees", cfg.probe.raw_degrees},
                  {"signed_noise", cfg.probe.signed_noise}};
    return j;
}

experiment_config config_from_json(const json& j) {
    experiment_config cfg;
    cfg.seed = get_field<uint64_t>(j, "", "seed");
    cfg.content_words = get_field<int>(j, "", "content_words");

    const json& paths = j.at("paths");
    cfg.paths.corpus = get_field<std::string>(paths, "paths", "corpus");
    cfg.paths.cache = get_field<std::string>(paths, "paths", "cache");
    cfg.paths.checkpoints = get_field<std::string>(paths, "paths", "checkpoints");
    cfg.paths.reports = get_field<std::string>(paths, "paths", "reports");

    const json& corpus = j.at("corpus");
    cfg.corpus.samples = get_field<int>(corpus, "corpus", "samples");
    cfg.corpus.min_words = get_field<int>(corpus, "corpus", "min_words");
    cfg.corpus.max_words = get_field<int>(corpus, "corpus", "max_words");
    cfg.corpus.dev_fraction = get_field<double>(corpus, "corpus", "dev_fraction");

    const json& synth = j.at("synth");
    cfg.synth.d_in = get_field<int>(synth, "synth", "d_in");
    cfg.synth.repeat_min = get_field<int>(synth, "synth", "repeat_min");
    cfg.synth.repeat_max = get_field<int>(synth, "synth", "repeat_max");
    cfg.synth.noise_sigma = get_field<double>(synth, "synth", "noise_sigma");
    cfg.synth.silence_frames = get_field<int>(synth, "synth", "silence_frames");
    cfg.synth.acoustic_norm = get_field<double>(synth, "synth", "acoustic_norm");
    cfg.synth.order_scale = get_field<double>(synth, "synth", "order_scale");

    const json& proj = j.at("projector");
    cfg.projector.d_in = get_field<int>(proj, "projector", "d_in");
    cfg.projector.d_mid = get_field<int>(proj, "projector", "d_mid");
    cfg.projector.d_out = get_field<int>(proj, "projector", "d_out");
    cfg.projector.layers_per_block = get_field<int>(proj, "projector", "layers_per_block");
    cfg.projector.heads = get_field<int>(proj, "projector", "heads");
    cfg.projector.ffn_mult = get_field<int>(proj, "projector", "ffn_mult");
    cfg.projector.kernel = get_field<int>(proj, "projector", "kernel");
    cfg.projector.stride = get_field<int>(proj, "projector", "stride");
    cfg.projector.pad = get_field<int>(proj, "projector", "pad");
    cfg.projector.dropout = get_field<double>(proj, "projector", "dropout");
    cfg.projector.avg_factor = get_field<int>(proj, "projector", "avg_factor");

    const json& dec = j.at("decoder");
    cfg.decoder.d_model = get_field<int>(dec, "decoder", "d_model");
    cfg.decoder.layers = get_field<int>(dec, "decoder", "layers");
    cfg.decoder.heads = get_field<int>(dec, "decoder", "heads");
    cfg.decoder.ffn_mult = get_field<int>(dec, "decoder", "ffn_mult");
    cfg.decoder.max_len = get_field<int>(dec, "decoder", "max_len");
    cfg.decoder.dropout = get_field<double>(dec, "decoder", "dropout");

    const json& dp = j.at("decoder_pretrain");
    cfg.decoder_pretrain.lr = get_field<double>(dp, "decoder_pretrain", "lr");
    cfg.decoder_pretrain.batch_sentences = get_field<int>(dp, "decoder_pretrain", "batch_sentences");
    cfg.decoder_pretrain.max_steps = get_field<long>(dp, "decoder_pretrain", "max_steps");
    cfg.decoder_pretrain.eval_every = get_field<long>(dp, "decoder_pretrain", "eval_every");
    cfg.decoder_pretrain.eval_samples = get_field<int>(dp, "decoder_pretrain", "eval_samples");
    cfg.decoder_pretrain.target_wer = get_field<double>(dp, "decoder_pretrain", "target_wer");
    cfg.decoder_pretrain.pad_augment_prob = get_field<double>(dp, "decoder_pretrain", "pad_augment_prob");
    cfg.decoder_pretrain.grad_clip = get_field<double>(dp, "decoder_pretrain", "grad_clip");

    const json& s1 = j.at("stage1");
    cfg.stage1.schedule.base_lr = get_field<double>(s1, "stage1", "lr");
    cfg.stage1.schedule.initial_lr = get_field<double>(s1, "stage1", "initial_lr");
    cfg.stage1.schedule.warmup_steps = get_field<long>(s1, "stage1", "warmup_steps");
    cfg.stage1.schedule.mode = schedule_mode_of(get_field<std::string>(s1, "stage1", "schedule"),
                                                "stage1.schedule");
    cfg.stage1.total_steps = get_field<long>(s1, "stage1", "total_steps");
    cfg.stage1.schedule.total_steps = cfg.stage1.total_steps;
    cfg.stage1.batch_cap = get_field<long>(s1, "stage1", "batch_cap");
    cfg.stage1.weights.alpha = get_field<double>(s1, "stage1", "alpha");
    cfg.stage1.weights.gamma = get_field<double>(s1, "stage1", "gamma");
    cfg.stage1.weights.mse_scale = get_field<double>(s1, "stage1", "mse_scale");
    cfg.stage1.grad_clip = get_field<double>(s1, "stage1", "grad_clip");
    cfg.stage1.checkpoint_every = get_field<long>(s1, "stage1", "checkpoint_every");
    cfg.stage1.on_length_mismatch = policy_of(get_field<std::string>(s1, "stage1", "on_length_mismatch"),
                                              "stage1.on_length_mismatch");

    const json& s2 = j.at("stage2");
    cfg.stage2.lr = get_field<double>(s2, "stage2", "lr");
    cfg.stage2.steps = get_field<long>(s2, "stage2", "steps");
    cfg.stage2.grad_accum = get_field<int>(s2, "stage2", "grad_accum");
    cfg.stage2.batch_size = get_field<int>(s2, "stage2", "batch_size");
    cfg.stage2.weights.sigma = get_field<double>(s2, "stage2", "sigma");
    cfg.stage2.weights.alpha = get_field<double>(s2, "stage2", "alpha");
    cfg.stage2.weights.mse_scale = get_field<double>(s2, "stage2", "mse_scale");
    cfg.stage2.weights.gamma = 0.0;  // Eq. 3 has no cosine term
    cfg.stage2.grad_clip = get_field<double>(s2, "stage2", "grad_clip");

    const json& probe = j.at("probe");
    cfg.probe.degrees = get_field<std::vector<double>>(probe, "probe", "degrees");
    cfg.probe.samples = get_field<int>(probe, "probe", "samples");
    cfg.probe.max_tokens = get_field<int>(probe, "probe", "max_tokens");
    cfg.probe.tolerance_band = get_field<double>(probe, "probe", "tolerance_band");
    cfg.probe.raw_degrees = get_field<bool>(probe, "probe", "raw_degrees");
    cfg.probe.signed_noise = get_field<bool>(probe, "probe", "signed_noise");
    return cfg;
}

experiment_config load_config(const std::string& file_path,
                              const std::vector<std::string>& overrides,
                              std::vector<std::string>* warnings) {
    json merged = to_json(experiment_config{});
    if (!file_path.empty()) {
        std::ifstream f(file_path);
        if (!f) throw config_error("cannot open config file: " + file_path);
        json user = json::parse(f, nullptr, false);
        if (user.is_discarded()) throw config_error("config file is not valid JSON: " + file_path);
        check_unknown_keys(user, merged, "");
        deep_merge(merged, user);
    }
    for (const auto& ov : overrides) {
        const size_t eq = ov.find('=');
        if (eq == std::string::npos) {
            throw config_error("override must look like section.key=value, got '" + ov + "'");
        }
        const std::string path = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);
        json* cursor = &merged;
        size_t start = 0;
        while (true) {
            const size_t dot = path.find('.', start);
            const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
            if (!cursor->contains(key)) throw config_error("unknown config key: " + path);
            cursor = &cursor->at(key);
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        if (cursor->is_object()) throw config_error("override path " + path + " is a section, not a field");
        *cursor = parse_override_value(value);
    }
    experiment_config cfg = config_from_json(merged);
    const auto warn = validate_experiment(cfg);
    if (warnings) *warnings = warn;
    return cfg;
}

int worst_case_avg_frames(const experiment_config& cfg) {
    const int worst_raw = cfg.corpus.max_words * cfg.synth.repeat_max + cfg.synth.silence_frames;
    return averaged_length(worst_raw, cfg.projector.avg_factor);
}

std::vector<std::string> validate_experiment(const experiment_config& cfg) {
    std::vector<std::string> warnings;
    if (cfg.content_words < 1) throw config_error("content_words must be positive");
    cfg.corpus.validate();
    cfg.synth.validate();
    cfg.projector.validate();
    cfg.decoder.validate();
    cfg.decoder_pretrain.validate();
    cfg.stage1.validate();
    cfg.stage2.validate();
    cfg.probe.validate();

    if (cfg.synth.d_in != cfg.projector.d_in) {
        throw config_error("synth.d_in must equal projector.d_in");
    }
    if (cfg.decoder.d_model != cfg.projector.d_out) {
        throw config_error("decoder.d_model must equal projector.d_out (stage-1 targets live there)");
    }

    const int worst_avg = worst_case_avg_frames(cfg);
    if (long(worst_avg) > cfg.stage1.batch_cap) {
        throw config_error("stage1.batch_cap (" + std::to_string(cfg.stage1.batch_cap) +
                           ") is below the worst-case averaged sample length (" +
                           std::to_string(worst_avg) +
                           "); raise stage1.batch_cap or shorten corpus.max_words");
    }

    // worst-case sequence lengths through the decoder
    projector_model<float> probe_model;  // only for length arithmetic
    {
        projector_config pc = cfg.projector;
        probe_model = projector_model<float>(pc, 0);
    }
    const int l_max = probe_model.output_length(worst_avg);
    const int stage2_seq = 1 + l_max + 1 + cfg.corpus.max_words;
    if (stage2_seq > cfg.decoder.max_len) {
        throw config_error("decoder.max_len (" + std::to_string(cfg.decoder.max_len) +
                           ") too small for stage-2 sequences (need " + std::to_string(stage2_seq) +
                           "); raise decoder.max_len");
    }
    const int pretrain_seq = 1 + 2 * cfg.corpus.max_words + cfg.corpus.max_words + 1;
    if (pretrain_seq > cfg.decoder.max_len) {
        throw config_error("decoder.max_len (" + std::to_string(cfg.decoder.max_len) +
                           ") too small for decoder pretraining sequences (need " +
                           std::to_string(pretrain_seq) + ")");
    }

    const double s = cfg.stage2.weights.sigma;
    if (s != 0.0 && s <= 0.8) {
        warnings.push_back("stage2.sigma=" + std::to_string(s) +
                           " is outside the declared task-specific (0) / task-agnostic (>0.8) modes");
    }
    return warnings;
}

std::array<uint8_t, 32> config_hash(const experiment_config& cfg,
                                    const std::vector<std::string>& sections,
                                    const std::vector<std::string>& extra) {
    const json full = to_json(cfg);
    json subset;
    for (const auto& s : sections) {
        if (!full.contains(s)) throw argument_error("config_hash: unknown section " + s);
        subset[s] = full.at(s);
    }
    std::string blob = subset.dump();
    for (const auto& e : extra) {
        blob.push_back('\n');
        blob += e;
    }
    return sha256(blob);
}

}  // namespace sm
