#pragma once

#include <string>
#include <vector>

#include "seqcl/data.hpp"

namespace seqcl::sem {

enum class PromptKind { user, item };

struct PromptText {
    PromptKind kind;
    std::string body;
};

struct PromptOptions {
    int max_desc_chars = 256;
    int max_item_seqs = 10;
};

// Numbered chronological item entries (title, category, brand, truncated
// description) followed by a fixed instruction block. Byte-deterministic for
// identical inputs; items missing catalog text render placeholder fields.
PromptText build_user_prompt(const std::vector<ItemId>& items,
                             const data::ItemCatalog& catalog,
                             const PromptOptions& opts = {},
                             int* missing_entries = nullptr);

// Item attributes plus up to `max_item_seqs` containing sequences rendered
// as title chains, then an instruction block asking for an item summary.
PromptText build_item_prompt(ItemId item, const data::ItemCatalog& catalog,
                             const std::vector<const std::vector<ItemId>*>& containing,
                             const PromptOptions& opts = {});

// The longest sequences containing `item`, ties by position in `sequences`
// (callers pass user-ordered lists, so ties resolve by ascending user id).
std::vector<const std::vector<ItemId>*> select_containing(
    const std::vector<std::vector<ItemId>>& sequences, ItemId item, int max_seqs);

}  // namespace seqcl::sem
