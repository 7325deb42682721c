#include "speechmap/metrics.hpp"

#include <cstdio>

namespace sm {

namespace {

template <class Seq>
int levenshtein(const Seq& a, const Seq& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return int(m);
    if (m == 0) return int(n);
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = int(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = int(i);
        for (size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

int edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    return levenshtein(ref, hyp);
}

int edit_distance_chars(const std::string& ref, const std::string& hyp) {
    return levenshtein(ref, hyp);
}

double wer(const std::string& ref, const std::string& hyp) {
    const auto rw = split_words(ref);
    const auto hw = split_words(hyp);
    if (rw.empty()) return hw.empty() ? 0.0 : 100.0 * double(hw.size());
    return 100.0 * double(edit_distance(rw, hw)) / double(rw.size());
}

double cer(const std::string& ref, const std::string& hyp) {
    if (ref.empty()) return hyp.empty() ? 0.0 : 100.0 * double(hyp.size());
    return 100.0 * double(edit_distance_chars(ref, hyp)) / double(ref.size());
}

void eval_report::finalize() {
    long total_word_edits = 0, total_ref_words = 0;
    long total_char_edits = 0, total_ref_chars = 0;
    truncations = 0;
    for (const auto& s : samples) {
        total_word_edits += s.word_edits;
        total_ref_words += s.ref_words;
        total_char_edits += s.char_edits;
        total_ref_chars += s.ref_chars;
        truncations += s.truncated ? 1 : 0;
    }
    corpus_wer = total_ref_words > 0 ? 100.0 * double(total_word_edits) / double(total_ref_words)
                                     : 100.0 * double(total_word_edits);
    corpus_cer = total_ref_chars > 0 ? 100.0 * double(total_char_edits) / double(total_ref_chars)
                                     : 100.0 * double(total_char_edits);
}

std::string eval_report_tsv(const eval_report& r) {
    std::string out = "id\twer\tcer\ttruncated\treference\thypothesis\n";
    char buf[64];
    for (const auto& s : r.samples) {
        out += s.id;
        std::snprintf(buf, sizeof(buf), "\t%.4f\t%.4f\t%d\t", s.wer, s.cer, s.truncated ? 1 : 0);
        out += buf;
        out += s.reference;
        out.push_back('\t');
        out += s.hypothesis;
        out.push_back('\n');
    }
    return out;
}

std::string eval_report_summary(const eval_report& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "samples=%zu corpus_wer=%.4f corpus_cer=%.4f truncations=%d\n",
                  r.samples.size(), r.corpus_wer, r.corpus_cer, r.truncations);
    return buf;
}

}  // namespace sm
