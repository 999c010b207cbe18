#include "seqcl/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace seqcl::eval {

int rank_of_target(const std::vector<float>& scores, ItemId target) {
    require(target >= 1 && target <= static_cast<ItemId>(scores.size()),
            "rank_of_target: target out of range");
    float target_score = scores[static_cast<size_t>(target - 1)];
    int rank = 1;
    for (size_t j = 0; j < scores.size(); ++j) {
        ItemId id = static_cast<ItemId>(j + 1);
        if (id == target) continue;
        if (scores[j] > target_score || (scores[j] == target_score && id < target)) ++rank;
    }
    return rank;
}

double hr_at_k(const std::vector<int>& ranks, int k) {
    require(!ranks.empty(), "hr_at_k: empty rank set");
    require(k >= 1, "hr_at_k: k must be >= 1");
    size_t hits = 0;
    for (int r : ranks)
        if (r <= k) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(const std::vector<int>& ranks, int k) {
    require(!ranks.empty(), "ndcg_at_k: empty rank set");
    require(k >= 1, "ndcg_at_k: k must be >= 1");
    double sum = 0.0;
    for (int r : ranks) {
        if (r <= k) sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
    return sum / static_cast<double>(ranks.size());
}

// Default edges {7, 10} give [<7], [7-10] (both ends inclusive), [>10].
int LengthBuckets::bucket_of(int length) const {
    if (edges.empty()) return 0;
    if (length < edges.front()) return 0;
    for (size_t i = 1; i < edges.size(); ++i) {
        if (length <= edges[i]) return static_cast<int>(i);
    }
    return static_cast<int>(edges.size());
}

std::string LengthBuckets::name(int bucket) const {
    if (edges.empty()) return "all";
    if (bucket == 0) return "len<" + std::to_string(edges[0]);
    if (bucket == static_cast<int>(edges.size())) {
        return edges.size() == 1 ? "len>=" + std::to_string(edges.back())
                                 : "len>" + std::to_string(edges.back());
    }
    return "len" + std::to_string(edges[static_cast<size_t>(bucket - 1)]) + "-" +
           std::to_string(edges[static_cast<size_t>(bucket)]);
}

double MetricReport::get(const std::string& scope, const std::string& metric, int k) const {
    for (const auto& row : rows) {
        if (row.scope == scope && row.metric == metric && row.k == k) return row.value;
    }
    fail("metric report has no row (", scope, ", ", metric, "@", k, ")");
}

std::string MetricReport::to_csv() const {
    std::string out = "scope,metric,K,value,n_users\n";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", row.value);
        out += row.scope + "," + row.metric + "," + std::to_string(row.k) + "," + buf + "," +
               std::to_string(row.n_users) + "\n";
    }
    return out;
}

namespace {
void append_rows(MetricReport& report, const std::string& scope, const std::vector<int>& ranks,
                 const std::vector<int>& ks) {
    for (int k : ks) {
        report.rows.push_back(
            {scope, "HR", k, hr_at_k(ranks, k), static_cast<int>(ranks.size())});
    }
    for (int k : ks) {
        report.rows.push_back(
            {scope, "NDCG", k, ndcg_at_k(ranks, k), static_cast<int>(ranks.size())});
    }
}
}  // namespace

MetricReport make_report(const std::vector<int>& ranks, const std::vector<int>& lengths,
                         const std::vector<int>& ks, const LengthBuckets& buckets) {
    require(ranks.size() == lengths.size(), "make_report: ranks/lengths size mismatch");
    require(!ranks.empty(), "make_report: empty rank set");
    MetricReport report;
    append_rows(report, "overall", ranks, ks);
    std::vector<std::vector<int>> grouped(static_cast<size_t>(buckets.count()));
    for (size_t i = 0; i < ranks.size(); ++i) {
        grouped[static_cast<size_t>(buckets.bucket_of(lengths[i]))].push_back(ranks[i]);
    }
    for (int b = 0; b < buckets.count(); ++b) {
        if (grouped[static_cast<size_t>(b)].empty()) continue;  // absent, not zero
        append_rows(report, buckets.name(b), grouped[static_cast<size_t>(b)], ks);
    }
    return report;
}

}  // namespace seqcl::eval
