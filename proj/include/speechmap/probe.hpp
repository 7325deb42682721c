// Embedding-noise probe: perturb clean token embeddings at a ladder of
// noise degrees, greedy-decode the repeat task, and find the largest degree
// the frozen decoder tolerates (the embedding error threshold). Its square,
// in scaled units, becomes the stage-1 MSE training target.
#pragma once

#include "speechmap/decoder.hpp"
#include "speechmap/metrics.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace sm {

struct probe_config {
    std::vector<double> degrees = {0.0, 1e-1, 1e-2, 1e-3, 1e-4};
    int samples = 200;          // corpus subset size
    int max_tokens = 150;
    double tolerance_band = 1.0;  // degree passes while WER <= clean WER + band
    // degrees are interpreted relative to the embedding table RMS by default;
    // raw_degrees uses them as absolute perturbation magnitudes
    bool raw_degrees = false;
    bool signed_noise = false;  // draw each perturbation with a random sign

    void validate() const {
        if (degrees.empty()) throw config_error("probe.degrees must not be empty");
        for (size_t i = 0; i < degrees.size(); ++i) {
            if (degrees[i] < 0) throw config_error("probe.degrees must be non-negative");
            for (size_t j = i + 1; j < degrees.size(); ++j) {
                if (degrees[i] == degrees[j]) throw config_error("probe.degrees must be distinct");
            }
        }
        if (samples < 1) throw config_error("probe.samples must be positive");
        if (max_tokens < 1) throw config_error("probe.max_tokens must be positive");
        if (tolerance_band < 0) throw config_error("probe.tolerance_band must be non-negative");
    }
};

struct probe_row {
    double degree = 0.0;      // as configured
    double degree_abs = 0.0;  // absolute perturbation unit after scaling
    double wer = 0.0;
    double cer = 0.0;
    int truncations = 0;
};

struct eet_report {
    std::vector<probe_row> rows;
    double clean_wer = 0.0;
    double eet = 0.0;         // absolute units; largest tolerated degree
    double mse_target = 0.0;  // (mse_scale * eet)^2
    bool eet_found = false;
};

// per-dimension additive perturbation: for every row and dimension draw
// r ~ U{1..9} and add r * degree. degree 0 returns an identical copy.
template <class T>
std::vector<T> inject_noise(const std::vector<T>& embeddings, int n, int d, double degree,
                            rng& r, bool signed_noise = false) {
    if (degree < 0) throw argument_error("inject_noise: degree must be non-negative");
    std::vector<T> out(embeddings);
    if (degree == 0.0) return out;
    for (int i = 0; i < n; ++i) {
        T* row = out.data() + size_t(i) * d;
        for (int j = 0; j < d; ++j) {
            const double mag = double(r.uniform_int(1, 9)) * degree;
            const double s = signed_noise ? (r.bounded(2) ? 1.0 : -1.0) : 1.0;
            row[j] += T(s * mag);
        }
    }
    return out;
}

template <class T>
double embedding_table_rms(const toy_decoder<T>& dec) {
    const auto& v = dec.embedding_table().data();
    double sq = 0.0;
    for (const T x : v) sq += double(x) * double(x);
    return std::sqrt(sq / double(v.size()));
}

template <class T>
eet_report run_probe(const toy_decoder<T>& dec, const std::vector<corpus_sample>& corpus,
                     const probe_config& cfg, double mse_scale, uint64_t seed) {
    cfg.validate();
    if (!dec.frozen()) throw contract_error("run_probe: decoder must be frozen");
    if (corpus.empty()) throw argument_error("run_probe: empty corpus");

    std::vector<corpus_sample> subset(corpus.begin(),
                                      corpus.begin() + std::min(size_t(cfg.samples), corpus.size()));
    const vocab& v = dec.vocabulary();
    const int d = dec.config().d_model;
    const double unit = cfg.raw_degrees ? 1.0 : embedding_table_rms(dec);

    eet_report report;
    report.rows.resize(cfg.degrees.size());

    for (size_t di = 0; di < cfg.degrees.size(); ++di) {
        const double degree_abs = cfg.degrees[di] * unit;
        long word_edits = 0, ref_words = 0, char_edits = 0, ref_chars = 0;
        std::vector<int> truncated(subset.size(), 0);
        std::vector<std::array<long, 4>> counts(subset.size());

        #pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < (long long)subset.size(); ++i) {
            const auto& s = subset[size_t(i)];
            const auto token_ids = tokenize(v, normalize(s.text));
            auto clean = dec.embed_const(token_ids);
            rng noise_rng(seed_stream(seed, 0xee7 + di, uint64_t(i)));
            auto noisy = inject_noise(clean.data(), int(token_ids.size()), d, degree_abs,
                                      noise_rng, cfg.signed_noise);
            auto content = tensor<T>::from({int(token_ids.size()), d}, noisy);
            auto context = concat_rows<T>({dec.embed_const({vocab::task}), content,
                                           dec.embed_const({vocab::sep})});
            auto decoded = dec.greedy_decode(context, cfg.max_tokens);
            const std::string ref = normalize(s.text);
            const std::string hyp = detokenize(v, decoded.ids);
            const auto rw = split_words(ref);
            const auto hw = split_words(hyp);
            counts[size_t(i)] = {long(edit_distance(rw, hw)), long(rw.size()),
                                 long(edit_distance_chars(ref, hyp)), long(ref.size())};
            truncated[size_t(i)] = decoded.truncated ? 1 : 0;
        }
        probe_row row;
        row.degree = cfg.degrees[di];
        row.degree_abs = degree_abs;
        for (size_t i = 0; i < subset.size(); ++i) {
            word_edits += counts[i][0];
            ref_words += counts[i][1];
            char_edits += counts[i][2];
            ref_chars += counts[i][3];
            row.truncations += truncated[i];
        }
        row.wer = ref_words > 0 ? 100.0 * double(word_edits) / double(ref_words) : 0.0;
        row.cer = ref_chars > 0 ? 100.0 * double(char_edits) / double(ref_chars) : 0.0;
        report.rows[di] = row;
        if (cfg.degrees[di] == 0.0) report.clean_wer = row.wer;
    }

    // the threshold is the largest nonzero degree still inside the band
    for (const auto& row : report.rows) {
        if (row.degree == 0.0) continue;
        if (row.wer <= report.clean_wer + cfg.tolerance_band) {
            if (!report.eet_found || row.degree_abs > report.eet) {
                report.eet = row.degree_abs;
                report.eet_found = true;
            }
        }
    }
    if (report.eet_found) {
        const double scaled = mse_scale * report.eet;
        report.mse_target = scaled * scaled;
    }
    return report;
}

inline std::string probe_report_text(const eet_report& r) {
    std::string out = "degree      degree_abs      wer       cer  truncations\n";
    char buf[160];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof(buf), "%-10.6g %12.6g %8.3f %9.3f %12d\n",
                      row.degree, row.degree_abs, row.wer, row.cer, row.truncations);
        out += buf;
    }
    char kv[200];
    std::snprintf(kv, sizeof(kv), "clean_wer=%.4f eet=%.9g mse_target=%.9g eet_found=%d\n",
                  r.clean_wer, r.eet, r.mse_target, r.eet_found ? 1 : 0);
    out += kv;
    return out;
}

}  // namespace sm
