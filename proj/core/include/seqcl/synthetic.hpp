#pragma once

#include <filesystem>

#include "seqcl/data.hpp"
#include "seqcl/embedding_cache.hpp"

namespace seqcl::synth {

// Small clustered dataset with textual attributes; written as raw
// interactions + catalog files so the full pipeline (preprocess onward) can
// run on it offline. The bundled data/toy directory is one of these.
struct ToySpec {
    int users = 60;
    int items = 30;
    int clusters = 3;
    int min_len = 6;
    int max_len = 18;
    double follow_successor = 0.7;  // chance the walk takes the planted next item
    double stay_in_cluster = 0.9;
    uint64_t seed = 7;
};

void write_toy_files(const ToySpec& spec, const std::filesystem::path& dir);

// Memorizable dataset: items form one successor cycle and every sequence
// walks it, so next-item prediction is exactly learnable.
struct OverfitSpec {
    int users = 50;
    int items = 20;
    int len = 12;
    uint64_t seed = 11;
};

data::Dataset make_overfit_dataset(const OverfitSpec& spec);

// Planted-cluster dataset plus cluster-aligned semantic caches (centroid +
// gaussian noise, unit-normalized). Each user walks a personal subset of
// their cluster's items, so users are cluster-close but individually
// distinct. Used by the directional-benefit checks.
struct PlantedSpec {
    int users = 400;
    int items = 200;
    int clusters = 4;
    int min_len = 5;
    int max_len = 9;
    double follow_successor = 0.10;  // planted next-item signal
    double stay_personal = 0.55;     // draw from the user's own item subset
    double stay_in_cluster = 0.15;   // draw from the whole cluster
    int personal_items = 25;         // per-user subset of the cluster
    int sem_dim = 16;
    double sem_noise = 0.5;          // per-item spread around the centroid
    uint64_t seed = 1;
};

struct PlantedBundle {
    data::Dataset ds;
    sem::EmbeddingCache user_sem;
    sem::EmbeddingCache item_sem;
    std::vector<int> item_cluster;  // by dense item id (index 0 unused)
    std::vector<int> user_cluster;  // by dense user id (index 0 unused)
};

PlantedBundle make_planted(const PlantedSpec& spec);

}  // namespace seqcl::synth
