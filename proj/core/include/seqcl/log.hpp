#pragma once

#include <iostream>
#include <string>

#include <json.hpp>

namespace seqcl {

// Line-delimited JSON logging to stderr. Keeps stdout clean for reports.
inline void log_json(const std::string& stage, const std::string& event,
                     nlohmann::json fields = nlohmann::json::object()) {
    fields["stage"] = stage;
    fields["event"] = event;
    std::cerr << fields.dump() << "\n";
}

inline void log_warn(const std::string& stage, const std::string& message,
                     nlohmann::json fields = nlohmann::json::object()) {
    fields["level"] = "warn";
    fields["message"] = message;
    log_json(stage, "warning", fields);
}

}  // namespace seqcl
