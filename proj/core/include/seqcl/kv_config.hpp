#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "seqcl/common.hpp"

namespace seqcl {

// Flat key=value config. '#' starts a comment, blank lines are ignored.
// echo() is canonical (keys sorted, "key=value\n"), so echoing a parsed
// echo reproduces it byte for byte.
class KvConfig {
public:
    static KvConfig parse(const std::string& text);

    std::string echo() const;

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void set_i64(const std::string& key, int64_t v) { set(key, std::to_string(v)); }
    void set_f64(const std::string& key, double v);

    std::string get_str(const std::string& key, const std::string& dflt) const;
    int64_t get_i64(const std::string& key, int64_t dflt) const;
    double get_f64(const std::string& key, double dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace seqcl
