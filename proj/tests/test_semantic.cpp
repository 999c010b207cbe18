#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "seqcl/embed_backend.hpp"
#include "seqcl/io_util.hpp"
#include "seqcl/llm_client.hpp"
#include "seqcl/prompts.hpp"
#include "seqcl/semantic_pipeline.hpp"
#include "seqcl/sha256.hpp"

using namespace seqcl;
using namespace seqcl::sem;

namespace {

data::ItemCatalog small_catalog() {
    data::ItemCatalog cat;
    cat.entries.resize(5);
    cat.entries[1] = {"Red Kettle", "kitchen", "acme", "A stovetop kettle."};
    cat.entries[2] = {"Blue Mug", "kitchen", "acme", ""};
    cat.entries[3] = {"Trail Shoes", "outdoor", "peak", "Grippy soles for wet rock."};
    cat.entries[4] = {"", "", "", ""};  // catalog entry with empty fields
    return cat;
}

}  // namespace

TEST_SUITE("semantic") {

TEST_CASE("user prompt: numbered chronological entries") {
    auto cat = small_catalog();
    PromptText p = build_user_prompt({3, 1, 2}, cat);
    CHECK(p.kind == PromptKind::user);
    size_t first = p.body.find("1. title: Trail Shoes");
    size_t second = p.body.find("2. title: Red Kettle");
    size_t third = p.body.find("3. title: Blue Mug");
    REQUIRE(first != std::string::npos);
    REQUIRE(second != std::string::npos);
    REQUIRE(third != std::string::npos);
    CHECK(first < second);
    CHECK(second < third);
}

TEST_CASE("user prompt is byte-deterministic") {
    auto cat = small_catalog();
    CHECK(build_user_prompt({1, 2, 3}, cat).body == build_user_prompt({1, 2, 3}, cat).body);
}

TEST_CASE("empty description is omitted, missing entries use placeholders") {
    auto cat = small_catalog();
    PromptText p = build_user_prompt({2}, cat);
    CHECK(p.body.find("description:") == std::string::npos);

    int missing = 0;
    PromptText q = build_user_prompt({4}, cat, {}, &missing);
    CHECK(missing == 1);
    CHECK(q.body.find("(unknown title)") != std::string::npos);
}

TEST_CASE("long descriptions truncate at the configured limit") {
    data::ItemCatalog cat;
    cat.entries.resize(2);
    cat.entries[1] = {"T", "c", "b", std::string(600, 'z')};
    PromptOptions opts;
    opts.max_desc_chars = 256;
    PromptText p = build_user_prompt({1}, cat, opts);
    CHECK(p.body.find(std::string(256, 'z') + "...") != std::string::npos);
    CHECK(p.body.find(std::string(257, 'z')) == std::string::npos);
}

TEST_CASE("user prompt template snapshot") {
    data::ItemCatalog cat;
    cat.entries.resize(2);
    cat.entries[1] = {"Lamp", "light", "lux", "Small desk lamp."};
    PromptText p = build_user_prompt({1}, cat);
    CHECK(p.body ==
          "Below is a user's interaction history, listed in chronological order\n"
          "(earliest first). Each entry gives the item's attributes.\n\n"
          "1. title: Lamp; category: light; brand: lux; description: Small desk lamp.\n"
          "\nSummarize this user's preferences: the item types they favor, the\n"
          "attributes they care about, and how their interests evolve over the\n"
          "sequence. Answer with a single concise paragraph.\n");
}

TEST_CASE("item prompt includes containing sequences up to the cap") {
    auto cat = small_catalog();
    std::vector<std::vector<ItemId>> seqs;
    // 25 sequences contain item 1, with varying lengths
    for (int s = 0; s < 25; ++s) {
        std::vector<ItemId> seq{1};
        for (int t = 0; t < s % 12; ++t) seq.push_back(2);
        seqs.push_back(seq);
    }
    auto picked = select_containing(seqs, 1, 10);
    CHECK(picked.size() == 10);
    // longest first
    for (size_t i = 1; i < picked.size(); ++i)
        CHECK(picked[i - 1]->size() >= picked[i]->size());

    PromptText p = build_item_prompt(1, cat, picked);
    CHECK(p.body.find("10. ") != std::string::npos);
    CHECK(p.body.find("11. ") == std::string::npos);
}

TEST_CASE("item prompt with three or zero containing sequences") {
    auto cat = small_catalog();
    std::vector<std::vector<ItemId>> seqs{{1, 2}, {2, 1, 3}, {1}};
    auto picked = select_containing(seqs, 1, 10);
    CHECK(picked.size() == 3);
    PromptText p = build_item_prompt(1, cat, picked);
    CHECK(p.body.find("3. ") != std::string::npos);

    PromptText empty = build_item_prompt(3, cat, select_containing({{1, 2}}, 3, 10));
    CHECK(empty.body.find("No interaction sequences contain this item.") != std::string::npos);
}

TEST_CASE("identity stub returns the prompt body") {
    IdentityStubClient stub;
    CHECK(stub.summarize({PromptKind::user, "X"}) == "X");
}

TEST_CASE("replay after record returns identical text with zero network calls") {
    test_helpers::TempDir dir("fixtures");
    append_fixture(dir.path(), Sha256::hash_hex("prompt body"), "recorded answer");
    ReplayClient replay(dir.path());
    CHECK(replay.summarize({PromptKind::user, "prompt body"}) == "recorded answer");
}

TEST_CASE("replay miss names the missing hash") {
    test_helpers::TempDir dir("fixtures");
    append_fixture(dir.path(), Sha256::hash_hex("known"), "answer");
    ReplayClient replay(dir.path());
    CHECK_THROWS_WITH_AS(replay.summarize({PromptKind::user, "unknown prompt"}),
                         doctest::Contains(Sha256::hash_hex("unknown prompt").c_str()), Error);
}

TEST_CASE("remote client retries transient failures with backoff (fake clock)") {
    test_helpers::TempDir dir("fixtures");
    int calls = 0;
    std::vector<int> sleeps;
    HttpTransport transport = [&](const std::string&, const std::string& body,
                                  const std::vector<Header>&) -> HttpResponse {
        ++calls;
        // request carries the pinned sampling settings
        CHECK(body.find("\"temperature\":0.0") != std::string::npos);
        CHECK(body.find("\"top_p\":0.001") != std::string::npos);
        if (calls <= 2) return {0, "", "connection reset"};
        return {200, R"({"choices":[{"message":{"content":"summary text"}}]})", ""};
    };
    SleepFn fake_sleep = [&](int ms) { sleeps.push_back(ms); };

    RemoteConfig rc;
    rc.endpoint = "http://fake.test/v1/chat/completions";
    rc.max_attempts = 3;
    rc.backoff_base_ms = 100;
    RemoteClient client(rc, dir.path(), transport, fake_sleep);
    CHECK(client.summarize({PromptKind::user, "p"}) == "summary text");
    CHECK(calls == 3);
    CHECK(sleeps == std::vector<int>{100, 200});  // exponential backoff

    // the response was recorded; a replay client can now serve it
    ReplayClient replay(dir.path());
    CHECK(replay.summarize({PromptKind::user, "p"}) == "summary text");
}

TEST_CASE("remote client gives up after max attempts") {
    test_helpers::TempDir dir("fixtures");
    int calls = 0;
    HttpTransport transport = [&](const std::string&, const std::string&,
                                  const std::vector<Header>&) -> HttpResponse {
        ++calls;
        return {503, "overloaded", ""};
    };
    RemoteConfig rc;
    rc.endpoint = "http://fake.test/v1/chat";
    rc.max_attempts = 3;
    RemoteClient client(rc, dir.path(), transport, [](int) {});
    CHECK_THROWS_WITH_AS(client.summarize({PromptKind::user, "p"}),
                         doctest::Contains("3 attempts"), Error);
    CHECK(calls == 3);
}

TEST_CASE("hash stub: identical vectors for identical and near-identical texts") {
    HashStubBackend backend(64, 42);
    auto a = backend.embed("The Red Kettle, kitchen acme");
    auto b = backend.embed("the red kettle  KITCHEN: acme!");  // same token multiset
    CHECK(a == b);
    auto c = backend.embed("kitchen acme kettle red the");  // order-independent
    CHECK(a == c);
}

TEST_CASE("hash stub: unit norm at the configured dimension") {
    HashStubBackend backend(64, 1);
    auto v = backend.embed("any text here");
    REQUIRE(v.size() == 64);
    double norm_sq = 0.0;
    for (float x : v) norm_sq += static_cast<double>(x) * x;
    CHECK(std::abs(std::sqrt(norm_sq) - 1.0) < 1e-6);
}

TEST_CASE("hash stub: distinct texts map to distinct vectors") {
    HashStubBackend backend(32, 7);
    DetRng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::string t1 = "text " + std::to_string(rng.next_u64());
        std::string t2 = "text " + std::to_string(rng.next_u64());
        auto v1 = backend.embed(t1);
        auto v2 = backend.embed(t2);
        CHECK(v1 != v2);
    }
}

TEST_CASE("cache rejects bad vectors and enforces freeze") {
    EmbeddingCache cache(OwnerKind::user, 3);
    CHECK_THROWS_AS(cache.put(1, {1.0f, 2.0f}), Error);            // dimension
    CHECK_THROWS_AS(cache.put(1, {0.0f, 0.0f, 0.0f}), Error);      // zero vector
    CHECK_THROWS_AS(cache.put(1, {1.0f, NAN, 0.0f}), Error);       // non-finite
    cache.put(1, {1.0f, 0.0f, 0.0f});
    CHECK_THROWS_WITH_AS(cache.freeze({1, 2, 3}), doctest::Contains("2,3"), Error);
    cache.put(2, {0.0f, 1.0f, 0.0f});
    cache.put(3, {0.0f, 0.0f, 1.0f});
    cache.freeze({1, 2, 3});
    CHECK(cache.frozen());
    CHECK_THROWS_AS(cache.put(4, {1.0f, 0.0f, 0.0f}), Error);  // write after freeze
}

TEST_CASE("populate covers all ids, freezes, persists, reloads identically") {
    test_helpers::TempDir dir("cache");
    auto out = dir.path() / "user.cache";
    HashStubBackend backend(16, 9);
    std::vector<int32_t> ids;
    for (int i = 1; i <= 100; ++i) ids.push_back(i);
    EmbeddingCache cache = populate_cache(
        OwnerKind::user, ids, 16,
        [&](int32_t id) { return backend.embed("user " + std::to_string(id)); }, out);
    CHECK(cache.size() == 100);
    CHECK(cache.frozen());
    EmbeddingCache loaded = EmbeddingCache::load(out);
    CHECK(loaded.checksum() == cache.checksum());

    // byte reproducibility of the persisted cache
    auto out2 = dir.path() / "user2.cache";
    populate_cache(OwnerKind::user, ids, 16,
                   [&](int32_t id) { return backend.embed("user " + std::to_string(id)); },
                   out2);
    CHECK(read_file(out) == read_file(out2));
}

TEST_CASE("interrupted population resumes without recomputing") {
    test_helpers::TempDir dir("resume");
    auto out = dir.path() / "item.cache";
    HashStubBackend backend(8, 3);
    std::vector<int32_t> ids;
    for (int i = 1; i <= 100; ++i) ids.push_back(i);

    int calls = 0;
    auto make = [&](int32_t id) {
        ++calls;
        if (calls == 51) fail("injected interrupt");
        return backend.embed("item " + std::to_string(id));
    };
    CHECK_THROWS(populate_cache(OwnerKind::item, ids, 8, make, out));
    CHECK(calls == 51);
    CHECK(std::filesystem::exists(dir.path() / "item.cache.partial"));

    calls = 0;
    auto resume = [&](int32_t id) {
        ++calls;
        return backend.embed("item " + std::to_string(id));
    };
    EmbeddingCache cache = populate_cache(OwnerKind::item, ids, 8, resume, out);
    CHECK(cache.size() == 100);
    CHECK(calls == 50);  // first 50 came from the journal
    CHECK_FALSE(std::filesystem::exists(dir.path() / "item.cache.partial"));
}

TEST_CASE("stub client + stub backend caches are byte-reproducible end to end") {
    std::vector<data::InteractionRecord> records;
    for (int u = 0; u < 6; ++u)
        for (int t = 0; t < 6; ++t)
            records.push_back({"u" + std::to_string(u), "i" + std::to_string((u + t) % 6), t});
    auto sd = data::build_sequences(data::five_core_filter(records, 5));
    std::unordered_map<std::string, data::CatalogEntry> raw;
    for (int i = 0; i < 6; ++i)
        raw["i" + std::to_string(i)] = {"Item " + std::to_string(i), "c", "b", "d"};
    auto cat = data::normalize_catalog(raw, sd.vocab);
    data::Dataset ds = data::make_dataset(std::move(sd), std::move(cat));

    IdentityStubClient client;
    HashStubBackend backend(16, 42);
    EmbeddingCache u1 = build_user_cache(ds, client, backend, {});
    EmbeddingCache u2 = build_user_cache(ds, client, backend, {});
    CHECK(u1.checksum() == u2.checksum());
    CHECK(u1.size() == static_cast<size_t>(ds.num_users()));
    EmbeddingCache i1 = build_item_cache(ds, client, backend, {});
    CHECK(i1.size() == static_cast<size_t>(ds.num_items()));

    // raw-text variants cover the vocab too (no-LLM ablation path)
    EmbeddingCache raw_u = build_user_cache_raw(ds, backend);
    CHECK(raw_u.size() == static_cast<size_t>(ds.num_users()));
    CHECK(raw_u.checksum() != u1.checksum());
}

}  // TEST_SUITE
