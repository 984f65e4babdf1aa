#include "nppx/symbol.hpp"

#include "nppx/error.hpp"

#include <deque>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace nppx {

namespace {

class SymbolTable {
public:
    static SymbolTable& instance() {
        static SymbolTable table;
        return table;
    }

    std::uint32_t intern(std::string_view name) {
        {
            std::shared_lock lock(mutex_);
            if (auto it = ids_.find(name); it != ids_.end()) return it->second;
        }
        std::unique_lock lock(mutex_);
        if (auto it = ids_.find(name); it != ids_.end()) return it->second;
        const auto id = static_cast<std::uint32_t>(names_.size());
        names_.emplace_back(name);
        ids_.emplace(std::string_view(names_.back()), id);
        return id;
    }

    const std::string& name(std::uint32_t id) {
        std::shared_lock lock(mutex_);
        return names_.at(id);
    }

private:
    SymbolTable() { names_.emplace_back(""); ids_.emplace(std::string_view(names_.back()), 0); }

    std::shared_mutex mutex_;
    // deque keeps element addresses stable, so the map can key on views.
    std::deque<std::string> names_;
    std::unordered_map<std::string_view, std::uint32_t> ids_;
};

}  // namespace

Symbol Symbol::intern(std::string_view name) { return Symbol(SymbolTable::instance().intern(name)); }

const std::string& Symbol::name() const { return SymbolTable::instance().name(id_); }

Symbol Value::as_symbol() const { return Symbol(static_cast<std::uint32_t>(payload_)); }

std::string Value::to_string() const {
    if (is_symbol_) return SymbolTable::instance().name(static_cast<std::uint32_t>(payload_));
    return std::to_string(payload_);
}

std::strong_ordering canonical_compare(const Value& a, const Value& b) {
    if (a.is_symbol_ != b.is_symbol_) return a.is_symbol_ ? std::strong_ordering::greater : std::strong_ordering::less;
    if (!a.is_symbol_) return a.payload_ <=> b.payload_;
    if (a.payload_ == b.payload_) return std::strong_ordering::equal;
    auto& table = SymbolTable::instance();
    const int c = table.name(static_cast<std::uint32_t>(a.payload_)).compare(
        table.name(static_cast<std::uint32_t>(b.payload_)));
    return c < 0 ? std::strong_ordering::less : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
}

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Syntax: return "syntax";
        case ErrorKind::Safety: return "safety";
        case ErrorKind::Arity: return "arity";
        case ErrorKind::Interval: return "interval";
        case ErrorKind::Limit: return "limit";
        case ErrorKind::NotFound: return "not_found";
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::Io: return "io";
        case ErrorKind::Conflict: return "conflict";
        case ErrorKind::Internal: return "internal";
    }
    return "unknown";
}

}  // namespace nppx
