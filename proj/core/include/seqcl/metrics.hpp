#pragma once

#include <string>
#include <vector>

#include "seqcl/common.hpp"

namespace seqcl::eval {

// Rank of the target among all item scores, 1 = best. Ties break by
// ascending item id: tied items with a smaller id than the target count as
// ranked above it. `scores[j]` is the score of item id j+1.
int rank_of_target(const std::vector<float>& scores, ItemId target);

double hr_at_k(const std::vector<int>& ranks, int k);
double ndcg_at_k(const std::vector<int>& ranks, int k);

// Length buckets from sorted edges {e1, e2, ...}: [<e1], [e1..e2], ...,
// [>e_last]. An empty edge list yields a single all-lengths bucket.
struct LengthBuckets {
    std::vector<int> edges{7, 10};

    int count() const { return static_cast<int>(edges.size()) + 1; }
    int bucket_of(int length) const;
    std::string name(int bucket) const;
};

struct MetricRow {
    std::string scope;   // "overall" or a bucket name
    std::string metric;  // "HR" | "NDCG"
    int k = 0;
    double value = 0.0;
    int n_users = 0;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    double get(const std::string& scope, const std::string& metric, int k) const;
    std::string to_csv() const;  // header: scope,metric,K,value,n_users
};

// Overall metrics plus per-bucket sub-reports. Empty buckets are absent from
// the report rather than reported as zero.
MetricReport make_report(const std::vector<int>& ranks, const std::vector<int>& lengths,
                         const std::vector<int>& ks, const LengthBuckets& buckets);

}  // namespace seqcl::eval
