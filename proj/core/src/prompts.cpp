#include "seqcl/prompts.hpp"

#include <algorithm>

namespace seqcl::sem {

namespace {

std::string field_or(const std::string& value, const char* placeholder) {
    return value.empty() ? placeholder : value;
}

void append_item_attributes(std::string& out, const data::CatalogEntry& e,
                            const PromptOptions& opts) {
    out += "title: ";
    out += field_or(e.title, "(unknown title)");
    out += "; category: ";
    out += field_or(e.category, "(unknown category)");
    out += "; brand: ";
    out += field_or(e.brand, "(unknown brand)");
    if (!e.description.empty()) {
        std::string desc = e.description;
        if (static_cast<int>(desc.size()) > opts.max_desc_chars) {
            desc.resize(static_cast<size_t>(opts.max_desc_chars));
            desc += "...";
        }
        out += "; description: ";
        out += desc;
    }
}

}  // namespace

PromptText build_user_prompt(const std::vector<ItemId>& items,
                             const data::ItemCatalog& catalog,
                             const PromptOptions& opts, int* missing_entries) {
    require(!items.empty(), "build_user_prompt: empty sequence");
    std::string body;
    body += "Below is a user's interaction history, listed in chronological order\n";
    body += "(earliest first). Each entry gives the item's attributes.\n\n";
    int missing = 0;
    for (size_t i = 0; i < items.size(); ++i) {
        body += std::to_string(i + 1);
        body += ". ";
        if (items[i] >= 1 && items[i] <= catalog.num_items()) {
            const data::CatalogEntry& e = catalog.of(items[i]);
            if (e.title.empty() && e.category.empty() && e.brand.empty() &&
                e.description.empty()) {
                ++missing;
            }
            append_item_attributes(body, e, opts);
        } else {
            ++missing;
            append_item_attributes(body, data::CatalogEntry{}, opts);
        }
        body += "\n";
    }
    body += "\nSummarize this user's preferences: the item types they favor, the\n";
    body += "attributes they care about, and how their interests evolve over the\n";
    body += "sequence. Answer with a single concise paragraph.\n";
    if (missing_entries) *missing_entries = missing;
    return {PromptKind::user, std::move(body)};
}

std::vector<const std::vector<ItemId>*> select_containing(
    const std::vector<std::vector<ItemId>>& sequences, ItemId item, int max_seqs) {
    std::vector<std::pair<size_t, const std::vector<ItemId>*>> hits;
    for (size_t i = 0; i < sequences.size(); ++i) {
        const auto& seq = sequences[i];
        if (std::find(seq.begin(), seq.end(), item) != seq.end()) {
            hits.emplace_back(i, &seq);
        }
    }
    // longest first; equal lengths keep ascending input order
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        return a.second->size() > b.second->size();
    });
    if (static_cast<int>(hits.size()) > max_seqs) hits.resize(static_cast<size_t>(max_seqs));
    std::vector<const std::vector<ItemId>*> out;
    out.reserve(hits.size());
    for (const auto& [idx, seq] : hits) out.push_back(seq);
    return out;
}

PromptText build_item_prompt(ItemId item, const data::ItemCatalog& catalog,
                             const std::vector<const std::vector<ItemId>*>& containing,
                             const PromptOptions& opts) {
    require(item >= 1 && item <= catalog.num_items(), "build_item_prompt: item not in catalog");
    std::string body;
    body += "Below is an item from a recommendation catalog, followed by user\n";
    body += "interaction sequences in which it appears.\n\nItem ";
    append_item_attributes(body, catalog.of(item), opts);
    body += "\n";
    if (containing.empty()) {
        body += "\nNo interaction sequences contain this item.\n";
    } else {
        body += "\nSequences containing the item (item titles, in interaction order):\n";
        int shown = 0;
        for (const auto* seq : containing) {
            if (shown >= opts.max_item_seqs) break;
            ++shown;
            body += std::to_string(shown);
            body += ". ";
            for (size_t i = 0; i < seq->size(); ++i) {
                if (i > 0) body += " -> ";
                ItemId v = (*seq)[i];
                const std::string& title =
                    (v >= 1 && v <= catalog.num_items()) ? catalog.of(v).title : std::string();
                body += title.empty() ? "(untitled)" : title;
            }
            body += "\n";
        }
    }
    body += "\nSummarize what this item is and which kind of audience interacts\n";
    body += "with it, based on its attributes and the sequences above. Answer\n";
    body += "with a single concise paragraph.\n";
    return {PromptKind::item, std::move(body)};
}

}  // namespace seqcl::sem
