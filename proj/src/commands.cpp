#include "speechmap/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace sm {

namespace fs = std::filesystem;

namespace {

void ensure_parent_dir(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }

void write_resolved_config(const experiment_config& cfg, const std::string& command) {
    ensure_dir(cfg.paths.reports);
    write_file_text(cfg.paths.reports + "/" + command + ".config.json", to_json(cfg).dump(2) + "\n");
}

std::array<uint8_t, 32> decoder_hash(const experiment_config& cfg) {
    return config_hash(cfg, {"seed", "content_words", "corpus", "decoder", "decoder_pretrain"});
}

std::array<uint8_t, 32> stage1_hash(const experiment_config& cfg, const std::string& decoder_digest) {
    return config_hash(cfg, {"seed", "content_words", "corpus", "synth", "projector", "stage1"},
                       {decoder_digest});
}

std::array<uint8_t, 32> stage2_hash(const experiment_config& cfg, const std::string& decoder_digest,
                                    const std::string& stage1_digest) {
    return config_hash(cfg,
                       {"seed", "content_words", "corpus", "synth", "projector", "stage1", "stage2"},
                       {decoder_digest, stage1_digest});
}

std::array<uint8_t, 32> cache_hash(const experiment_config& cfg, const std::string& table_digest) {
    return config_hash(cfg, {"seed", "content_words", "corpus", "synth", "projector"}, {table_digest});
}

std::string file_digest(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return hex_string(sha256(bytes.data(), bytes.size()));
}

std::string table_digest_of(const toy_decoder<float>& dec) {
    const auto& v = dec.embedding_table().data();
    return hex_string(sha256(v.data(), v.size() * sizeof(float)));
}

std::string sigma_tag(double sigma) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", sigma);
    return buf;
}

// prepared training data, with the target cache consulted when requested
std::vector<prepped_sample<float>> prepare_data(const experiment_config& cfg,
                                                const std::vector<corpus_sample>& samples,
                                                const vocab& v, const synth_sfm<float>& synth,
                                                const projector_model<float>& proj,
                                                const toy_decoder<float>* dec, bool with_targets,
                                                bool use_cache, std::ostream* log) {
    const std::vector<float>* table = nullptr;
    int rows = 0, dim = 0;
    if (with_targets) {
        table = &dec->embedding_table().data();
        rows = dec->embedding_table().rows();
        dim = dec->embedding_table().cols();
    }
    if (!with_targets || !use_cache) {
        return prepare_samples<float>(samples, v, synth, proj, table, rows, dim,
                                      cfg.stage1.on_length_mismatch, log);
    }
    const auto hash = cache_hash(cfg, table_digest_of(*dec));
    const std::string& path = cfg.paths.cache;
    if (fs::exists(path)) {
        const auto records = read_target_cache(path, hash);
        auto prepped = prepare_samples<float>(samples, v, synth, proj, nullptr, 0, 0,
                                              cfg.stage1.on_length_mismatch, log);
        std::unordered_map<std::string, const target_cache_record*> by_id;
        for (const auto& r : records) by_id[r.sample_id] = &r;
        std::vector<prepped_sample<float>> out;
        for (auto& ps : prepped) {
            auto it = by_id.find(ps.id);
            if (it == by_id.end()) {
                throw ckpt_error("target cache is missing sample " + ps.id +
                                 "; rebuild it with `speechmap cache-targets`");
            }
            if (it->second->target.length != ps.out_len) {
                throw ckpt_error("target cache is stale for sample " + ps.id);
            }
            if (ps.out_len < int(ps.token_ids.size()) + 1) {
                if (cfg.stage1.on_length_mismatch == length_mismatch_policy::abort_run) {
                    throw length_error("sample " + ps.id + ": cached target does not fit");
                }
                continue;
            }
            ps.target = it->second->target;
            ps.has_target = true;
            out.push_back(std::move(ps));
        }
        return out;
    }
    auto prepped = prepare_samples<float>(samples, v, synth, proj, table, rows, dim,
                                          cfg.stage1.on_length_mismatch, log);
    std::vector<target_cache_record> records;
    records.reserve(prepped.size());
    for (const auto& ps : prepped) records.push_back({ps.id, ps.target});
    ensure_parent_dir(path);
    write_target_cache(path, hash, records);
    if (log) *log << "wrote target cache: " << path << " (" << records.size() << " records)\n";
    return prepped;
}

checkpoint make_model_checkpoint(const std::array<uint8_t, 32>& hash, uint64_t step,
                                 const param_list<float>& params) {
    checkpoint ck;
    ck.config_hash = hash;
    ck.step = step;
    add_params(ck, params);
    return ck;
}

void add_optimizer_state(checkpoint& ck, const param_list<float>& params, adamw<float>& opt) {
    for (size_t i = 0; i < params.size(); ++i) {
        add_record(ck, "opt.m." + params[i].name, params[i].t.shape(), opt.moment1()[i]);
        add_record(ck, "opt.v." + params[i].name, params[i].t.shape(), opt.moment2()[i]);
    }
}

void load_optimizer_state(const checkpoint& ck, const param_list<float>& params, adamw<float>& opt) {
    for (size_t i = 0; i < params.size(); ++i) {
        const auto* m = ck.find("opt.m." + params[i].name);
        const auto* v = ck.find("opt.v." + params[i].name);
        if (!m || !v) throw ckpt_error("checkpoint: optimizer state missing for " + params[i].name);
        std::memcpy(opt.moment1()[i].data(), m->payload.data(), m->payload.size());
        std::memcpy(opt.moment2()[i].data(), v->payload.data(), v->payload.size());
    }
    opt.set_step_count(long(ck.step));
}

}  // namespace

std::string decoder_ckpt_path(const experiment_config& cfg) {
    return cfg.paths.checkpoints + "/decoder.smck";
}
std::string stage1_ckpt_path(const experiment_config& cfg) {
    return cfg.paths.checkpoints + "/stage1.smck";
}
std::string stage2_ckpt_path(const experiment_config& cfg, double sigma) {
    return cfg.paths.checkpoints + "/stage2_sigma" + sigma_tag(sigma) + ".smck";
}

vocab build_vocab(const experiment_config& cfg) {
    return vocab::make_synthetic(cfg.content_words, cfg.seed);
}

std::vector<corpus_sample> require_corpus(const experiment_config& cfg) {
    if (!fs::exists(cfg.paths.corpus)) {
        throw prereq_error("corpus file " + cfg.paths.corpus +
                           " not found; generate it with `speechmap synth`");
    }
    return load_corpus(cfg.paths.corpus);
}

toy_decoder<float> load_decoder_f32(const experiment_config& cfg, const std::string& path) {
    if (!fs::exists(path)) {
        throw prereq_error("decoder checkpoint " + path +
                           " not found; train it with `speechmap pretrain-decoder`");
    }
    const auto ck = load_checkpoint(path);
    if (ck.config_hash != decoder_hash(cfg)) {
        throw ckpt_error("decoder checkpoint " + path + " was produced by a different configuration");
    }
    toy_decoder<float> dec(build_vocab(cfg), cfg.decoder, cfg.seed);
    apply_params(ck, dec.params());
    dec.freeze();
    return dec;
}

projector_model<float> load_projector_f32(const experiment_config& cfg, const std::string& path) {
    if (!fs::exists(path)) {
        throw prereq_error("projector checkpoint " + path +
                           " not found; train it with `speechmap pretrain` (stage 1)");
    }
    const auto ck = load_checkpoint(path);
    projector_model<float> proj(cfg.projector, cfg.seed);
    apply_params(ck, proj.params());
    return proj;
}

void cmd_synth(const experiment_config& cfg, const cmd_options& opts) {
    const std::string out = opts.out.empty() ? cfg.paths.corpus : opts.out;
    if (fs::exists(out) && !opts.force) {
        throw io_error("refusing to overwrite existing corpus " + out + " (use --force)");
    }
    const vocab v = build_vocab(cfg);
    const auto samples = generate_corpus(v, cfg.corpus, cfg.seed);
    ensure_parent_dir(out);
    save_corpus(out, samples);
    write_resolved_config(cfg, "synth");
    if (!opts.quiet) {
        std::cout << "wrote " << samples.size() << " samples to " << out << "\n";
    }
}

void cmd_pretrain_decoder(const experiment_config& cfg, const cmd_options& opts) {
    const auto samples = require_corpus(cfg);
    const auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    toy_decoder<float> dec(build_vocab(cfg), cfg.decoder, cfg.seed);

    ensure_dir(cfg.paths.reports);
    std::ofstream log(cfg.paths.reports + "/pretrain_decoder.log");
    const auto result = pretrain_decoder(dec, split.train, split.dev, cfg.decoder_pretrain,
                                         cfg.seed, opts.quiet ? &log : &std::cout);
    dec.freeze();

    const std::string out = opts.out.empty() ? decoder_ckpt_path(cfg) : opts.out;
    ensure_parent_dir(out);
    auto ck = make_model_checkpoint(decoder_hash(cfg), uint64_t(result.steps), dec.params());
    save_checkpoint(out, ck);
    write_resolved_config(cfg, "pretrain_decoder");
    if (!opts.quiet) {
        std::cout << "decoder reached dev WER " << result.final_wer << " after " << result.steps
                  << " steps; checkpoint: " << out << "\n";
    }
}

void cmd_pretrain(const experiment_config& cfg, const cmd_options& opts) {
    const auto samples = require_corpus(cfg);
    const auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    const std::string dec_path = opts.decoder_ckpt.empty() ? decoder_ckpt_path(cfg) : opts.decoder_ckpt;
    auto dec = load_decoder_f32(cfg, dec_path);
    const vocab v = dec.vocabulary();
    synth_sfm<float> synth(v, cfg.synth, cfg.seed);
    projector_model<float> proj(cfg.projector, cfg.seed);

    ensure_dir(cfg.paths.reports);
    std::ofstream log(cfg.paths.reports + "/stage1.log");
    auto data = prepare_data(cfg, split.train, v, synth, proj, &dec, true, opts.use_cache, &log);

    auto params = proj.params();
    adamw<float> opt(tensors_of(params));
    long start_step = 0;
    const std::string out = opts.out.empty() ? stage1_ckpt_path(cfg) : opts.out;
    const auto hash = stage1_hash(cfg, file_digest(dec_path));
    if (opts.resume) {
        if (!fs::exists(out)) throw prereq_error("cannot resume: " + out + " does not exist");
        const auto ck = load_checkpoint(out);
        if (ck.config_hash != hash) {
            throw ckpt_error("stage-1 checkpoint " + out + " was produced by a different configuration");
        }
        apply_params(ck, params);
        load_optimizer_state(ck, params, opt);
        start_step = long(ck.step);
    }

    ensure_parent_dir(out);
    auto save = [&](long step) {
        auto ck = make_model_checkpoint(hash, uint64_t(step), params);
        add_optimizer_state(ck, params, opt);
        save_checkpoint(out, ck);
    };
    const auto result = train_stage1(proj, data, cfg.stage1, cfg.seed, opt, start_step, &log, save);
    save(result.steps);
    write_resolved_config(cfg, "pretrain");
    if (!opts.quiet) {
        const auto& last = result.history.empty() ? loss_scalars{} : result.history.back();
        std::cout << "stage 1 finished at step " << result.steps << " (l_mse " << last.l_mse
                  << ", total " << last.total << "); checkpoint: " << out << "\n";
    }
}

void cmd_adapt(const experiment_config& cfg, const cmd_options& opts) {
    const auto samples = require_corpus(cfg);
    const auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    const std::string dec_path = opts.decoder_ckpt.empty() ? decoder_ckpt_path(cfg) : opts.decoder_ckpt;
    auto dec = load_decoder_f32(cfg, dec_path);
    const vocab v = dec.vocabulary();
    synth_sfm<float> synth(v, cfg.synth, cfg.seed);

    projector_model<float> proj(cfg.projector, cfg.seed);
    std::string stage1_digest = "from-scratch";
    if (!opts.from_scratch) {
        const std::string s1_path =
            opts.projector_ckpt.empty() ? stage1_ckpt_path(cfg) : opts.projector_ckpt;
        if (!fs::exists(s1_path)) {
            throw prereq_error("stage-1 checkpoint " + s1_path +
                               " not found; train it with `speechmap pretrain` or pass --from-scratch");
        }
        proj = load_projector_f32(cfg, s1_path);
        stage1_digest = file_digest(s1_path);
    }

    const double sigma = cfg.stage2.weights.sigma;
    ensure_dir(cfg.paths.reports);
    std::ofstream log(cfg.paths.reports + "/stage2_sigma" + sigma_tag(sigma) + ".log");
    const bool with_targets = sigma != 0.0;
    auto data = prepare_data(cfg, split.train, v, synth, proj, &dec, with_targets,
                             opts.use_cache && with_targets, &log);
    const auto result = train_stage2(proj, dec, data, cfg.stage2, cfg.seed, &log);

    const std::string out = opts.out.empty() ? stage2_ckpt_path(cfg, sigma) : opts.out;
    ensure_parent_dir(out);
    auto ck = make_model_checkpoint(stage2_hash(cfg, file_digest(dec_path), stage1_digest),
                                    uint64_t(result.optimizer_steps), proj.params());
    save_checkpoint(out, ck);
    write_resolved_config(cfg, "adapt_sigma" + sigma_tag(sigma));
    if (!opts.quiet) {
        const auto& last = result.history.back();
        std::cout << "stage 2 (sigma " << sigma << ") finished after " << result.optimizer_steps
                  << " steps (" << result.micro_batches << " micro-batches, l_ce " << last.l_ce
                  << "); checkpoint: " << out << "\n";
    }
}

void cmd_probe(const experiment_config& cfg, const cmd_options& opts) {
    const auto samples = require_corpus(cfg);
    const auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    const std::string dec_path = opts.decoder_ckpt.empty() ? decoder_ckpt_path(cfg) : opts.decoder_ckpt;
    auto dec = load_decoder_f32(cfg, dec_path);

    const auto& pool = split.dev.empty() ? split.train : split.dev;
    const auto report = run_probe(dec, pool, cfg.probe, cfg.stage1.weights.mse_scale, cfg.seed);
    const std::string text = probe_report_text(report);
    ensure_dir(cfg.paths.reports);
    const std::string out = opts.out.empty() ? cfg.paths.reports + "/probe.txt" : opts.out;
    write_file_text(out, text);
    write_resolved_config(cfg, "probe");
    if (!opts.quiet) std::cout << text;
}

void cmd_eval(const experiment_config& cfg, const cmd_options& opts) {
    const auto samples = require_corpus(cfg);
    const auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    const std::vector<corpus_sample>& pool = opts.split == "train" ? split.train
                                           : opts.split == "all" ? samples
                                                                 : split.dev;
    if (opts.split != "train" && opts.split != "dev" && opts.split != "all") {
        throw config_error("eval: --split must be dev, train or all");
    }
    const std::string dec_path = opts.decoder_ckpt.empty() ? decoder_ckpt_path(cfg) : opts.decoder_ckpt;
    auto dec = load_decoder_f32(cfg, dec_path);

    eval_options eopts;
    eopts.max_tokens = opts.max_tokens;
    eopts.oracle = opts.oracle;
    eopts.normalize_hyp = !opts.raw_scores;

    eval_report report;
    std::string tag;
    if (opts.oracle) {
        report = evaluate<float>(nullptr, nullptr, dec, pool, eopts);
        tag = "oracle";
    } else {
        const std::string pj_path =
            opts.projector_ckpt.empty() ? stage1_ckpt_path(cfg) : opts.projector_ckpt;
        auto proj = load_projector_f32(cfg, pj_path);
        synth_sfm<float> synth(dec.vocabulary(), cfg.synth, cfg.seed);
        report = evaluate<float>(&proj, &synth, dec, pool, eopts);
        tag = fs::path(pj_path).stem().string();
    }
    ensure_dir(cfg.paths.reports);
    const std::string out =
        opts.out.empty() ? cfg.paths.reports + "/eval_" + tag + "_" + opts.split + ".tsv" : opts.out;
    write_file_text(out, eval_report_tsv(report));
    write_resolved_config(cfg, "eval");
    if (!opts.quiet) std::cout << eval_report_summary(report) << "report: " << out << "\n";
}

void cmd_decode(const experiment_config& cfg, const cmd_options& opts) {
    if (opts.text.empty()) throw config_error("decode: --text is required");
    const std::string dec_path = opts.decoder_ckpt.empty() ? decoder_ckpt_path(cfg) : opts.decoder_ckpt;
    auto dec = load_decoder_f32(cfg, dec_path);
    const vocab& v = dec.vocabulary();
    const auto ids = tokenize(v, normalize(opts.text));

    tensor<float> content;
    if (opts.oracle) {
        content = dec.embed_const(ids);
    } else {
        const std::string pj_path =
            opts.projector_ckpt.empty() ? stage1_ckpt_path(cfg) : opts.projector_ckpt;
        auto proj = load_projector_f32(cfg, pj_path);
        synth_sfm<float> synth(v, cfg.synth, cfg.seed);
        const auto raw = synth.synth(ids, fnv1a64(opts.text));
        const int t_raw = int(raw.size()) / cfg.synth.d_in;
        const auto avg = average_frames(raw, t_raw, cfg.synth.d_in, cfg.projector.avg_factor);
        content = proj.forward(
            tensor<float>::from({averaged_length(t_raw, cfg.projector.avg_factor), cfg.synth.d_in}, avg));
    }
    auto context = concat_rows<float>({dec.embed_const({vocab::task}), content,
                                       dec.embed_const({vocab::sep})});
    const auto decoded = dec.greedy_decode(context, opts.max_tokens);
    std::cout << detokenize(v, decoded.ids) << "\n";
    if (decoded.truncated) std::cerr << "note: decoding hit the token cap (truncated)\n";
}

void cmd_cache_targets(const experiment_config& cfg, const cmd_options& opts) {
    const auto samples = require_corpus(cfg);
    const auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    const std::string dec_path = opts.decoder_ckpt.empty() ? decoder_ckpt_path(cfg) : opts.decoder_ckpt;
    auto dec = load_decoder_f32(cfg, dec_path);
    const vocab v = dec.vocabulary();
    synth_sfm<float> synth(v, cfg.synth, cfg.seed);
    projector_model<float> proj(cfg.projector, cfg.seed);

    const std::string out = opts.out.empty() ? cfg.paths.cache : opts.out;
    if (fs::exists(out) && !opts.force) {
        throw io_error("refusing to overwrite existing cache " + out + " (use --force)");
    }
    const auto& table = dec.embedding_table();
    auto prepped = prepare_samples<float>(split.train, v, synth, proj, &table.data(), table.rows(),
                                          table.cols(), cfg.stage1.on_length_mismatch, nullptr);
    std::vector<target_cache_record> records;
    records.reserve(prepped.size());
    for (const auto& ps : prepped) records.push_back({ps.id, ps.target});
    ensure_parent_dir(out);
    write_target_cache(out, cache_hash(cfg, table_digest_of(dec)), records);
    write_resolved_config(cfg, "cache_targets");
    if (!opts.quiet) std::cout << "wrote " << records.size() << " target records to " << out << "\n";
}

void cmd_sweep(const experiment_config& cfg, const cmd_options& opts) {
    if (opts.sigmas.empty()) throw config_error("sweep: pass at least one --sigma value");
    const auto samples = require_corpus(cfg);
    const auto split = split_corpus(samples, cfg.corpus.dev_fraction);
    const std::string dec_path = opts.decoder_ckpt.empty() ? decoder_ckpt_path(cfg) : opts.decoder_ckpt;
    auto dec = load_decoder_f32(cfg, dec_path);
    const vocab v = dec.vocabulary();
    synth_sfm<float> synth(v, cfg.synth, cfg.seed);

    const std::string s1_path =
        opts.projector_ckpt.empty() ? stage1_ckpt_path(cfg) : opts.projector_ckpt;
    auto proj = load_projector_f32(cfg, s1_path);

    auto data = prepare_data(cfg, split.train, v, synth, proj, &dec, true, false, nullptr);
    const auto rows = sigma_sweep(proj, dec, data, split.dev, synth, opts.sigmas, cfg.stage2,
                                  cfg.seed, opts.quiet ? nullptr : &std::cout);
    const std::string table = sweep_table(rows);
    ensure_dir(cfg.paths.reports);
    const std::string out = opts.out.empty() ? cfg.paths.reports + "/sweep.txt" : opts.out;
    write_file_text(out, table);
    write_resolved_config(cfg, "sweep");
    if (!opts.quiet) std::cout << table;
}

}  // namespace sm
