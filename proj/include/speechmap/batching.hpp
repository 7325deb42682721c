// Dynamic batching: packs variable-length samples into batches bounded by
// total frame count rather than sample count.
#pragma once

#include "speechmap/common.hpp"

#include <vector>

namespace sm {

enum class length_mismatch_policy { skip_warn, abort_run };

struct batch {
    std::vector<int> sample_indices;
    long total_frames = 0;
};

struct epoch_batches {
    std::vector<batch> batches;
    std::vector<int> skipped;  // oversize samples under skip_warn
};

// shuffle epoch-wise, sort by length (stable over the shuffled order),
// then greedily fill each batch until adding the next sample would exceed
// the cap in summed frames; every admissible sample appears exactly once
epoch_batches make_epoch_batches(const std::vector<int>& lengths, long batch_cap,
                                 rng& shuffle_rng, length_mismatch_policy policy);

}  // namespace sm
