// WER / CER scoring and end-to-end decode evaluation.
#pragma once

#include "speechmap/corpus.hpp"
#include "speechmap/decoder.hpp"
#include "speechmap/projector.hpp"
#include "speechmap/synth.hpp"

#include <string>
#include <vector>

namespace sm {

// minimal insert/delete/substitute edits between two token lists
int edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
int edit_distance_chars(const std::string& ref, const std::string& hyp);

// percentages; an empty reference with a non-empty hypothesis scores
// 100 * hypothesis-token-count (unbounded above by construction)
double wer(const std::string& ref, const std::string& hyp);
double cer(const std::string& ref, const std::string& hyp);

struct sample_score {
    std::string id;
    std::string reference;
    std::string hypothesis;
    double wer = 0.0;
    double cer = 0.0;
    bool truncated = false;
    int word_edits = 0;
    int ref_words = 0;
    int char_edits = 0;
    int ref_chars = 0;
};

struct eval_report {
    std::vector<sample_score> samples;
    double corpus_wer = 0.0;  // micro-average: total edits / total reference words
    double corpus_cer = 0.0;
    int truncations = 0;

    void finalize();
};

std::string eval_report_tsv(const eval_report& r);
std::string eval_report_summary(const eval_report& r);

struct eval_options {
    int max_tokens = 150;
    bool oracle = false;         // bypass the projector, feed clean token embeddings
    bool normalize_hyp = true;   // normalize hypotheses before scoring
};

// greedy-decode every sample through [task] context [sep] and score it.
// projector/synth may be null in oracle mode. Per-sample work is
// independent, so the loop is parallel; report order matches input order.
template <class T>
eval_report evaluate(const projector_model<T>* proj, const synth_sfm<T>* synth,
                     const toy_decoder<T>& dec, const std::vector<corpus_sample>& samples,
                     const eval_options& opts = {}) {
    if (samples.empty()) throw argument_error("evaluate: empty corpus");
    if (!opts.oracle && (proj == nullptr || synth == nullptr)) {
        throw argument_error("evaluate: projector and synth required unless oracle mode");
    }
    const vocab& v = dec.vocabulary();
    eval_report report;
    report.samples.resize(samples.size());

    #pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < (long long)samples.size(); ++i) {
        const auto& s = samples[size_t(i)];
        const auto token_ids = tokenize(v, normalize(s.text));
        tensor<T> content;
        if (opts.oracle) {
            content = dec.embed_const(token_ids);
        } else {
            const uint64_t ss = sample_seed_of(s.id);
            const auto raw = synth->synth(token_ids, ss);
            const int t_raw = int(raw.size()) / synth->config().d_in;
            const auto avg = average_frames(raw, t_raw, synth->config().d_in,
                                            proj->config().avg_factor);
            const int t_avg = averaged_length(t_raw, proj->config().avg_factor);
            auto frames = tensor<T>::from({t_avg, synth->config().d_in}, avg);
            content = proj->forward(frames);
        }
        auto context = concat_rows<T>({dec.embed_const({vocab::task}), content,
                                       dec.embed_const({vocab::sep})});
        auto decoded = dec.greedy_decode(context, opts.max_tokens);

        sample_score sc;
        sc.id = s.id;
        sc.reference = normalize(s.text);
        std::string hyp;
        for (size_t j = 0; j < decoded.ids.size(); ++j) {
            if (j) hyp.push_back(' ');
            hyp += v.word(decoded.ids[j]);
        }
        sc.hypothesis = opts.normalize_hyp ? normalize(hyp) : hyp;
        sc.truncated = decoded.truncated;
        const auto rw = split_words(sc.reference);
        const auto hw = split_words(sc.hypothesis);
        sc.word_edits = edit_distance(rw, hw);
        sc.ref_words = int(rw.size());
        sc.char_edits = edit_distance_chars(sc.reference, sc.hypothesis);
        sc.ref_chars = int(sc.reference.size());
        sc.wer = wer(sc.reference, sc.hypothesis);
        sc.cer = cer(sc.reference, sc.hypothesis);
        report.samples[size_t(i)] = std::move(sc);
    }
    report.finalize();
    return report;
}

}  // namespace sm
