#include "seqcl/augment.hpp"

#include <cmath>
#include <numeric>

namespace seqcl::cl {

AugmentedView augment(const std::vector<ItemId>& seq, const retrieval::PoolMap& item_pools,
                      double ratio, DetRng& rng) {
    require(!seq.empty(), "augment: empty sequence");
    require(ratio > 0.0 && ratio <= 1.0, "augment: ratio must be in (0, 1]");
    AugmentedView view;
    view.items = seq;

    size_t m = static_cast<size_t>(
        std::max<long>(1, std::lround(ratio * static_cast<double>(seq.size()))));

    std::vector<int> positions(seq.size());
    std::iota(positions.begin(), positions.end(), 0);
    rng.shuffle(positions);

    size_t done = 0;
    for (int pos : positions) {
        if (done == m) break;
        ItemId old_id = seq[static_cast<size_t>(pos)];
        auto it = item_pools.find(old_id);
        if (it == item_pools.end() || it->second.empty()) continue;
        const auto& neighbors = it->second.neighbors;
        ItemId new_id = neighbors[rng.uniform_int(neighbors.size())].id;
        view.items[static_cast<size_t>(pos)] = new_id;
        view.log.push_back({pos, old_id, new_id});
        ++done;
    }
    return view;
}

AugmentedPair make_pair(const std::vector<ItemId>& seq, const retrieval::PoolMap& item_pools,
                        double ratio, DetRng& rng) {
    AugmentedPair pair;
    pair.first = augment(seq, item_pools, ratio, rng);
    pair.second = augment(seq, item_pools, ratio, rng);
    return pair;
}

int32_t uniform_pool_draw(DetRng& rng, const retrieval::CandidatePool& pool) {
    require(!pool.empty(), "uniform_pool_draw: empty pool");
    return pool.neighbors[rng.uniform_int(pool.neighbors.size())].id;
}

}  // namespace seqcl::cl
