#pragma once

#include <vector>

#include "seqcl/retrieval.hpp"
#include "seqcl/rng.hpp"

namespace seqcl::cl {

struct SubstitutionLog {
    int position = 0;
    ItemId old_id = 0;
    ItemId new_id = 0;
};

struct AugmentedView {
    std::vector<ItemId> items;  // same length as the source
    std::vector<SubstitutionLog> log;
};

struct AugmentedPair {
    AugmentedView first;
    AugmentedView second;
};

// Substitutes m = max(1, round(ratio * |seq|)) distinct positions with items
// drawn uniformly from the old item's candidate pool. Items whose pool is
// missing or empty are skipped and another position is drawn while any
// remain; a sequence with no substitutable position comes back unchanged
// with an empty log.
AugmentedView augment(const std::vector<ItemId>& seq, const retrieval::PoolMap& item_pools,
                      double ratio, DetRng& rng);

// Two independent augmentations of the same source; the views may coincide
// by chance.
AugmentedPair make_pair(const std::vector<ItemId>& seq, const retrieval::PoolMap& item_pools,
                        double ratio, DetRng& rng);

// Uniform positive selection for the non-learnable synthesizer ablation.
int32_t uniform_pool_draw(DetRng& rng, const retrieval::CandidatePool& pool);

}  // namespace seqcl::cl
