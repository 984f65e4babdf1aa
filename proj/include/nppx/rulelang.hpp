#pragma once

// Rule language: AST, parser, printer and safety checks.
//
// The language is a small clingo-like subset: facts, normal rules with
// default negation, constraints, integer arithmetic (+, -), comparison
// literals, and pooling (`;`) / intervals (`..`) inside facts. The grammar
// is documented in docs/grammar.md.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nppx {

struct Term {
    enum class Kind : std::uint8_t { Integer, Symbol, Variable, Binary, Interval };

    Kind kind = Kind::Integer;
    std::int64_t number = 0;   // Integer
    std::string name;          // Symbol, Variable
    char op = 0;               // Binary: '+' or '-'
    std::vector<Term> operands;  // Binary: lhs, rhs; Interval: lo, hi

    static Term integer(std::int64_t v);
    static Term symbol(std::string name);
    static Term variable(std::string name);
    static Term binary(char op, Term lhs, Term rhs);
    static Term interval(std::int64_t lo, std::int64_t hi);

    bool is_ground() const;
    void collect_variables(std::vector<std::string>& out) const;
    std::string to_string() const;

    bool operator==(const Term&) const = default;
};

struct Atom {
    std::string predicate;
    std::vector<Term> args;

    std::size_t arity() const { return args.size(); }
    std::string to_string() const;

    bool operator==(const Atom&) const = default;
};

enum class CompareOp : std::uint8_t { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

const char* to_string(CompareOp op);

struct Literal {
    enum class Kind : std::uint8_t { Positive, Negative, Comparison };

    Kind kind = Kind::Positive;
    Atom atom;                         // Positive, Negative
    Term lhs;                          // Comparison
    CompareOp op = CompareOp::Equal;   // Comparison
    Term rhs;                          // Comparison

    static Literal positive(Atom a);
    static Literal negative(Atom a);
    static Literal comparison(Term lhs, CompareOp op, Term rhs);

    std::string to_string() const;

    bool operator==(const Literal&) const = default;
};

struct Rule {
    std::optional<Atom> head;  // empty for constraints
    std::vector<Literal> body;

    bool is_fact() const { return head.has_value() && body.empty(); }
    bool is_constraint() const { return !head.has_value(); }

    /// r+ : atoms of the positive body literals.
    std::vector<Atom> positive_body() const;
    /// r- : atoms of the negated body literals.
    std::vector<Atom> negative_body() const;

    std::string to_string() const;

    bool operator==(const Rule&) const = default;
};

/// Ordered rule list with a fixed arity per predicate.
class Program {
public:
    Program() = default;

    const std::vector<Rule>& rules() const { return rules_; }
    const std::map<std::string, std::size_t>& arities() const { return arities_; }

    /// Appends a rule after checking safety and arity consistency.
    void add(Rule rule);
    /// Appends every rule of `other`.
    void append(const Program& other);

    std::size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }

    bool operator==(const Program& other) const { return rules_ == other.rules_; }

private:
    void register_arity(const Atom& atom, const Rule& rule);

    std::vector<Rule> rules_;
    std::map<std::string, std::size_t> arities_;
};

/// Names of variables that violate safety, in order of first occurrence.
///
/// A variable is bound when it appears as a plain argument of a positive body
/// atom. Every variable of the head, of a negated literal, of a comparison, or
/// inside an arithmetic argument must be bound.
std::vector<std::string> unsafe_variables(const Rule& rule);

/// Parses rule-language source. Pools and intervals in facts are expanded.
/// Throws ParseError on syntax errors and Error (Safety, Arity, Interval) on
/// semantic errors.
Program parse_program(std::string_view text, std::string_view source_name = "<input>");

/// Parses a single variable-free atom such as `p(a,1)`.
Atom parse_atom(std::string_view text);

/// One statement per line; round-trips through parse_program.
std::string format_program(const Program& program);

}  // namespace nppx
