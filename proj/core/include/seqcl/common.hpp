#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace seqcl {

// Dense ids start at 1; 0 is reserved for padding everywhere.
using UserId = int32_t;
using ItemId = int32_t;
constexpr ItemId kPaddingId = 0;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <class T, class... Rest>
void format_into(std::ostringstream& os, const T& head, const Rest&... rest) {
    os << head;
    format_into(os, rest...);
}
}  // namespace detail

template <class... Args>
[[noreturn]] void fail(const Args&... args) {
    std::ostringstream os;
    detail::format_into(os, args...);
    throw Error(os.str());
}

template <class... Args>
void require(bool cond, const Args&... args) {
    if (!cond) fail(args...);
}

}  // namespace seqcl
