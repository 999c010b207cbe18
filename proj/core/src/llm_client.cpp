#include "seqcl/llm_client.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "seqcl/io_util.hpp"
#include "seqcl/log.hpp"
#include "seqcl/sha256.hpp"

namespace seqcl::sem {

using nlohmann::json;

namespace {
constexpr const char* kFixtureFile = "responses.jsonl";
}

std::unordered_map<std::string, std::string> load_fixtures(
    const std::filesystem::path& fixture_dir) {
    std::unordered_map<std::string, std::string> out;
    std::filesystem::path file = fixture_dir / kFixtureFile;
    if (!std::filesystem::exists(file)) return out;
    for (const std::string& line : read_lines(file)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        out[j.at("prompt_sha256").get<std::string>()] = j.at("response").get<std::string>();
    }
    return out;
}

void append_fixture(const std::filesystem::path& fixture_dir,
                    const std::string& prompt_sha256, const std::string& response) {
    std::filesystem::create_directories(fixture_dir);
    json j;
    j["prompt_sha256"] = prompt_sha256;
    j["response"] = response;
    std::ofstream out(fixture_dir / kFixtureFile, std::ios::binary | std::ios::app);
    require(out.good(), "cannot append fixture in ", fixture_dir.string());
    out << j.dump() << "\n";
}

ReplayClient::ReplayClient(const std::filesystem::path& fixture_dir) : dir_(fixture_dir) {
    fixtures_ = load_fixtures(fixture_dir);
    require(!fixtures_.empty(), "replay client: no fixtures found in ", fixture_dir.string());
}

std::string ReplayClient::summarize(const PromptText& prompt) {
    std::string hash = Sha256::hash_hex(prompt.body);
    auto it = fixtures_.find(hash);
    if (it == fixtures_.end()) {
        fail("replay client: no recorded response for prompt sha256 ", hash, " in ",
             dir_.string());
    }
    return it->second;
}

RemoteClient::RemoteClient(RemoteConfig config, std::filesystem::path fixture_dir,
                           HttpTransport transport, SleepFn sleep)
    : config_(std::move(config)), fixture_dir_(std::move(fixture_dir)),
      transport_(std::move(transport)), sleep_(std::move(sleep)) {
    require(!config_.endpoint.empty(), "remote client: endpoint not configured");
    if (!transport_) {
        transport_ = [](const std::string& url, const std::string& body,
                        const std::vector<Header>& headers) -> HttpResponse {
            size_t scheme_end = url.find("://");
            require(scheme_end != std::string::npos, "remote client: bad endpoint url: ", url);
            size_t path_start = url.find('/', scheme_end + 3);
            std::string host = url.substr(0, path_start);
            std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
            httplib::Client cli(host);
            cli.set_read_timeout(120, 0);
            httplib::Headers hs;
            for (const auto& [k, v] : headers) hs.emplace(k, v);
            auto res = cli.Post(path, hs, body, "application/json");
            if (!res) return {0, "", httplib::to_string(res.error())};
            return {res->status, res->body, ""};
        };
    }
    if (!sleep_) {
        sleep_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
    }
    recorded_ = load_fixtures(fixture_dir_);
}

std::string RemoteClient::summarize(const PromptText& prompt) {
    std::string hash = Sha256::hash_hex(prompt.body);
    if (auto it = recorded_.find(hash); it != recorded_.end()) return it->second;

    json req;
    req["model"] = config_.model;
    req["temperature"] = config_.temperature;
    req["top_p"] = config_.top_p;
    req["messages"] = json::array({json{{"role", "user"}, {"content", prompt.body}}});
    std::vector<Header> headers;
    if (!config_.api_key.empty())
        headers.emplace_back("Authorization", "Bearer " + config_.api_key);

    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        HttpResponse res = transport_(config_.endpoint, req.dump(), headers);
        bool transient = res.status == 0 || res.status == 429 || res.status >= 500;
        if (res.status == 200) {
            json parsed = json::parse(res.body);
            std::string text =
                parsed.at("choices").at(0).at("message").at("content").get<std::string>();
            append_fixture(fixture_dir_, hash, text);
            recorded_[hash] = text;
            return text;
        }
        last_error = res.status == 0 ? res.error
                                     : ("http " + std::to_string(res.status) + ": " + res.body);
        if (!transient) break;
        if (attempt < config_.max_attempts) {
            int delay = config_.backoff_base_ms << (attempt - 1);
            log_warn("embed", "remote call failed, retrying",
                     {{"attempt", attempt}, {"delay_ms", delay}});
            sleep_(delay);
        }
    }
    fail("remote client: request failed after ", config_.max_attempts,
         " attempts (", last_error, "); recorded responses are kept in ",
         fixture_dir_.string(), " so the batch can resume");
}

std::unique_ptr<LlmClient> make_client(const std::string& kind,
                                       const std::filesystem::path& fixture_dir,
                                       const RemoteConfig& remote) {
    if (kind == "stub") return std::make_unique<IdentityStubClient>();
    if (kind == "replay") return std::make_unique<ReplayClient>(fixture_dir);
    if (kind == "remote") return std::make_unique<RemoteClient>(remote, fixture_dir);
    fail("unknown llm client kind: ", kind, " (expected stub|replay|remote)");
}

}  // namespace seqcl::sem
