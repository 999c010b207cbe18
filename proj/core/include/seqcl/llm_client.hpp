#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqcl/prompts.hpp"

namespace seqcl::sem {

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string summarize(const PromptText& prompt) = 0;
    virtual std::string name() const = 0;
};

// Returns the prompt body itself. The offline default: combined with the
// hash embedding backend it makes the whole cache a deterministic function
// of the data.
class IdentityStubClient : public LlmClient {
public:
    std::string summarize(const PromptText& prompt) override { return prompt.body; }
    std::string name() const override { return "stub"; }
};

// Fixture files: one JSON object per line {"prompt_sha256":..., "response":...}.
std::unordered_map<std::string, std::string> load_fixtures(
    const std::filesystem::path& fixture_dir);
void append_fixture(const std::filesystem::path& fixture_dir,
                    const std::string& prompt_sha256, const std::string& response);

// Exact lookup by prompt hash; a miss is an error naming the missing hash.
class ReplayClient : public LlmClient {
public:
    explicit ReplayClient(const std::filesystem::path& fixture_dir);
    std::string summarize(const PromptText& prompt) override;
    std::string name() const override { return "replay"; }

private:
    std::unordered_map<std::string, std::string> fixtures_;
    std::filesystem::path dir_;
};

struct HttpResponse {
    int status = 0;        // 0 = transport-level failure
    std::string body;
    std::string error;     // set when status == 0
};

using Header = std::pair<std::string, std::string>;
// (url, json body, headers) -> response. Injectable so tests never touch
// the network.
using HttpTransport =
    std::function<HttpResponse(const std::string&, const std::string&, const std::vector<Header>&)>;
using SleepFn = std::function<void(int /*milliseconds*/)>;

struct RemoteConfig {
    std::string endpoint;       // chat-completions style URL
    std::string model;
    std::string api_key;        // usually from SEQCL_API_KEY
    double temperature = 0.0;
    double top_p = 0.001;
    int max_attempts = 3;
    int backoff_base_ms = 500;  // doubled per retry
};

// Calls a chat-completions endpoint and records every response into the
// fixture dir so subsequent runs can replay. Retries transient failures
// (transport errors, 429, 5xx) with exponential backoff.
class RemoteClient : public LlmClient {
public:
    RemoteClient(RemoteConfig config, std::filesystem::path fixture_dir,
                 HttpTransport transport = {}, SleepFn sleep = {});
    std::string summarize(const PromptText& prompt) override;
    std::string name() const override { return "remote"; }

private:
    RemoteConfig config_;
    std::filesystem::path fixture_dir_;
    HttpTransport transport_;
    SleepFn sleep_;
    std::unordered_map<std::string, std::string> recorded_;
};

std::unique_ptr<LlmClient> make_client(const std::string& kind,
                                       const std::filesystem::path& fixture_dir,
                                       const RemoteConfig& remote = {});

}  // namespace seqcl::sem
