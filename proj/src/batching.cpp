#include "speechmap/batching.hpp"

#include <algorithm>
#include <numeric>

namespace sm {

epoch_batches make_epoch_batches(const std::vector<int>& lengths, long batch_cap,
                                 rng& shuffle_rng, length_mismatch_policy policy) {
    if (batch_cap < 1) throw config_error("dynamic batching: batch_cap must be positive");

    std::vector<int> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates with the epoch rng
    for (size_t i = order.size(); i > 1; --i) {
        const size_t j = size_t(shuffle_rng.bounded(i));
        std::swap(order[i - 1], order[j]);
    }

    epoch_batches out;
    std::vector<int> admissible;
    admissible.reserve(order.size());
    for (int idx : order) {
        const int len = lengths[size_t(idx)];
        if (len < 0) throw argument_error("dynamic batching: negative length");
        if (long(len) > batch_cap) {
            if (policy == length_mismatch_policy::abort_run) {
                throw length_error("dynamic batching: sample " + std::to_string(idx) + " has length " +
                                   std::to_string(len) + " above batch_cap " + std::to_string(batch_cap));
            }
            out.skipped.push_back(idx);
            continue;
        }
        admissible.push_back(idx);
    }

    // bucket by length while keeping the shuffled order among equals
    std::stable_sort(admissible.begin(), admissible.end(), [&](int a, int b) {
        return lengths[size_t(a)] < lengths[size_t(b)];
    });

    batch cur;
    for (int idx : admissible) {
        const long len = lengths[size_t(idx)];
        if (!cur.sample_indices.empty() && cur.total_frames + len > batch_cap) {
            out.batches.push_back(std::move(cur));
            cur = {};
        }
        cur.sample_indices.push_back(idx);
        cur.total_frames += len;
    }
    if (!cur.sample_indices.empty()) out.batches.push_back(std::move(cur));
    return out;
}

}  // namespace sm
