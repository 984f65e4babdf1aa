#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace nppx {

/// Interned symbolic constant or predicate name.
///
/// Symbols are process-wide and never freed. Ids depend on interning order, so
/// anything that must be reproducible (output order, canonical forms) compares
/// by name instead of id.
class Symbol {
public:
    Symbol() = default;

    static Symbol intern(std::string_view name);

    const std::string& name() const;
    std::uint32_t id() const noexcept { return id_; }

    friend bool operator==(Symbol a, Symbol b) noexcept { return a.id_ == b.id_; }

private:
    friend class Value;
    explicit Symbol(std::uint32_t id) : id_(id) {}

    std::uint32_t id_ = 0;
};

/// Ground constant: an integer or a symbol.
///
/// The canonical order puts every integer before every symbol; integers are
/// compared numerically and symbols by name.
class Value {
public:
    Value() = default;

    static Value integer(std::int64_t v) { return Value(v, false); }
    static Value symbol(Symbol s) { return Value(static_cast<std::int64_t>(s.id()), true); }
    static Value symbol(std::string_view name) { return symbol(Symbol::intern(name)); }

    bool is_integer() const noexcept { return !is_symbol_; }
    bool is_symbol() const noexcept { return is_symbol_; }
    std::int64_t as_integer() const noexcept { return payload_; }
    Symbol as_symbol() const;

    std::string to_string() const;

    friend bool operator==(const Value& a, const Value& b) noexcept {
        return a.payload_ == b.payload_ && a.is_symbol_ == b.is_symbol_;
    }
    /// Canonical three-way comparison (see class comment).
    friend std::strong_ordering canonical_compare(const Value& a, const Value& b);

    std::size_t hash() const noexcept {
        return std::hash<std::int64_t>{}(payload_) * 31 + (is_symbol_ ? 17 : 0);
    }

private:
    Value(std::int64_t payload, bool is_symbol) : payload_(payload), is_symbol_(is_symbol) {}

    std::int64_t payload_ = 0;
    bool is_symbol_ = false;
};

std::strong_ordering canonical_compare(const Value& a, const Value& b);

}  // namespace nppx

template <>
struct std::hash<nppx::Value> {
    std::size_t operator()(const nppx::Value& v) const noexcept { return v.hash(); }
};

template <>
struct std::hash<nppx::Symbol> {
    std::size_t operator()(nppx::Symbol s) const noexcept { return std::hash<std::uint32_t>{}(s.id()); }
};
