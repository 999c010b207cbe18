#pragma once

#include <functional>
#include <optional>

#include "seqcl/data.hpp"
#include "seqcl/embed_backend.hpp"
#include "seqcl/embedding_cache.hpp"

namespace seqcl::sem {

// Fills a cache for every requested id, journaling each finished vector to
// `<out>.partial` so an interrupted run resumes without recomputation, then
// freezes and persists the final cache. `out` may be empty for an
// in-memory-only cache (no journal).
EmbeddingCache populate_cache(OwnerKind kind, const std::vector<int32_t>& ids, int dim,
                              const std::function<std::vector<float>(int32_t)>& make_vector,
                              const std::filesystem::path& out = {});

// prompt -> summarize -> embed for every user (train-prefix view of the data)
EmbeddingCache build_user_cache(const data::Dataset& ds, LlmClient& client,
                                EmbedBackend& backend, const PromptOptions& opts,
                                const std::filesystem::path& out = {});

// item attributes + containing train sequences -> summarize -> embed
EmbeddingCache build_item_cache(const data::Dataset& ds, LlmClient& client,
                                EmbedBackend& backend, const PromptOptions& opts,
                                const std::filesystem::path& out = {});

// Raw concatenated attribute text, skipping the summarize step. Backs the
// no-LLM ablation.
std::string user_raw_text(const data::Dataset& ds, UserId u);
std::string item_raw_text(const data::Dataset& ds, ItemId v);

EmbeddingCache build_user_cache_raw(const data::Dataset& ds, EmbedBackend& backend,
                                    const std::filesystem::path& out = {});
EmbeddingCache build_item_cache_raw(const data::Dataset& ds, EmbedBackend& backend,
                                    const std::filesystem::path& out = {});

}  // namespace seqcl::sem
