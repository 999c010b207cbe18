#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqcl/common.hpp"

namespace seqcl::data {

struct InteractionRecord {
    std::string user_key;
    std::string item_key;
    int64_t timestamp = 0;  // used only for ordering
};

struct LoadReport {
    size_t total_lines = 0;
    size_t malformed = 0;
    std::vector<size_t> malformed_line_numbers;  // 1-based, capped at 50
};

// Tab-separated `user \t item \t timestamp`. Unreadable file or a malformed
// rate above 1% is fatal; individual bad lines are counted and skipped.
std::vector<InteractionRecord> load_interactions(const std::filesystem::path& path,
                                                 LoadReport* report = nullptr);

// Iteratively removes users and items with fewer than `min_core`
// interactions until a fixpoint. May return an empty set.
std::vector<InteractionRecord> five_core_filter(std::vector<InteractionRecord> records,
                                                int min_core = 5);

struct InteractionSequence {
    UserId user_id = 0;
    std::vector<ItemId> items;  // chronological
    int length() const { return static_cast<int>(items.size()); }
};

// Dense ids are assigned in lexicographic raw-key order, so the mapping is a
// pure function of the surviving key set and survives input permutations.
// Id 0 is reserved for padding on both sides.
struct Vocab {
    std::vector<std::string> user_keys;  // index = dense id; [0] is a sentinel
    std::vector<std::string> item_keys;
    std::unordered_map<std::string, UserId> user_id_of;
    std::unordered_map<std::string, ItemId> item_id_of;

    int num_users() const { return static_cast<int>(user_keys.size()) - 1; }
    int num_items() const { return static_cast<int>(item_keys.size()) - 1; }
};

struct SequenceData {
    std::vector<InteractionSequence> sequences;  // ordered by user_id
    Vocab vocab;
};

// pre: records are core-filtered. Items per user sorted by timestamp,
// timestamp ties keep input file order.
SequenceData build_sequences(const std::vector<InteractionRecord>& records);

struct CatalogEntry {
    std::string title;
    std::string category;
    std::string brand;
    std::string description;
};

// One JSON object per line: {"item":key,"title":...,"category":...,...}.
std::unordered_map<std::string, CatalogEntry> load_catalog(const std::filesystem::path& path);

// Catalog re-keyed by dense item id; every id 1..|V| has an entry (missing
// raw entries become empty fields and are counted).
struct ItemCatalog {
    std::vector<CatalogEntry> entries;  // index = dense item id; [0] unused
    int missing = 0;

    const CatalogEntry& of(ItemId id) const { return entries.at(static_cast<size_t>(id)); }
    int num_items() const { return static_cast<int>(entries.size()) - 1; }
};

ItemCatalog normalize_catalog(const std::unordered_map<std::string, CatalogEntry>& raw,
                              const Vocab& vocab);

struct LeaveOneOut {
    std::vector<ItemId> train;  // items[:-2] when evaluable, whole sequence otherwise
    ItemId valid = kPaddingId;
    ItemId test = kPaddingId;
    bool has_eval = false;
};

// pre for evaluation: seq.length >= 3; shorter users keep their whole
// sequence for training and are excluded from validation/test.
LeaveOneOut leave_one_out(const InteractionSequence& seq);

// Left-pad convention: real tokens occupy the trailing positions, so the
// final position is always a real token. mask[i] is true for real tokens.
struct PaddedRow {
    std::vector<ItemId> ids;
    std::vector<uint8_t> mask;
};

PaddedRow truncate_pad(const std::vector<ItemId>& items, int n);

struct PaddedBatch {
    int n = 0;
    int size = 0;
    std::vector<ItemId> item_ids;   // size*n, row-major
    std::vector<uint8_t> attn_mask; // size*n, true = real token
    std::vector<ItemId> targets;    // size, never 0
};

PaddedBatch make_eval_batch(const std::vector<std::vector<ItemId>>& inputs,
                            const std::vector<ItemId>& targets, int n);

// Next-item training row. Input is the prefix without its last item,
// labels[i] is the item following position i (0 where ignored). In
// final-target mode only the last position keeps its label.
struct TrainRow {
    std::vector<ItemId> input;
    std::vector<ItemId> labels;
};

TrainRow make_train_row(const std::vector<ItemId>& train_items, int n, bool per_position);

// The unpadded input item list the training forward consumes: the train
// window without its final item (which is the last prediction target).
// Degenerate single-item users keep their one item so they still encode.
std::vector<ItemId> train_input_items(const std::vector<ItemId>& train_items, int n);

// The prepared per-user view the trainer and evaluator consume.
struct UserSplit {
    UserId user = 0;
    std::vector<ItemId> train;
    ItemId valid = kPaddingId;
    ItemId test = kPaddingId;
    bool has_eval = false;
    int full_length = 0;  // pre-split sequence length, used for length buckets
};

struct Dataset {
    Vocab vocab;
    ItemCatalog catalog;
    std::vector<InteractionSequence> sequences;
    std::vector<UserSplit> splits;
    int excluded_from_eval = 0;

    int num_users() const { return vocab.num_users(); }
    int num_items() const { return vocab.num_items(); }
};

Dataset make_dataset(SequenceData seq_data, ItemCatalog catalog);

// Preprocess stage artifacts (sequences.jsonl, vocab.json,
// catalog.norm.jsonl, stats.json) under `out_dir`.
struct PreprocessStats {
    size_t raw_records = 0;
    size_t malformed_lines = 0;
    size_t filtered_records = 0;
    int users = 0;
    int items = 0;
    int excluded_from_eval = 0;
    double avg_length = 0.0;
    double density = 0.0;
};

PreprocessStats write_prepared(const Dataset& ds, const LoadReport& load_report,
                               size_t raw_records, const std::filesystem::path& out_dir);

Dataset load_prepared(const std::filesystem::path& dir);

}  // namespace seqcl::data
