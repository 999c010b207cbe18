#include "seqcl/kv_config.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

namespace seqcl {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        require(eq != std::string::npos, "config line ", lineno, ": expected key=value, got '", t, "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        require(!key.empty(), "config line ", lineno, ": empty key");
        cfg.entries_[key] = value;
    }
    return cfg;
}

std::string KvConfig::echo() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

void KvConfig::set_f64(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    set(key, buf);
}

std::string KvConfig::get_str(const std::string& key, const std::string& dflt) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? dflt : it->second;
}

int64_t KvConfig::get_i64(const std::string& key, int64_t dflt) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return dflt;
    try {
        size_t pos = 0;
        int64_t v = std::stoll(it->second, &pos);
        require(pos == it->second.size(), "trailing characters");
        return v;
    } catch (const std::exception&) {
        fail("config key '", key, "': expected integer, got '", it->second, "'");
    }
}

double KvConfig::get_f64(const std::string& key, double dflt) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return dflt;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        require(pos == it->second.size(), "trailing characters");
        return v;
    } catch (const std::exception&) {
        fail("config key '", key, "': expected number, got '", it->second, "'");
    }
}

bool KvConfig::get_bool(const std::string& key, bool dflt) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return dflt;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    fail("config key '", key, "': expected boolean, got '", v, "'");
}

}  // namespace seqcl
