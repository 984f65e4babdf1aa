#include "nppx/rulelang.hpp"

#include "nppx/error.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace nppx {

// ---------------------------------------------------------------------------
// AST helpers

Term Term::integer(std::int64_t v) {
    Term t;
    t.kind = Kind::Integer;
    t.number = v;
    return t;
}

Term Term::symbol(std::string name) {
    Term t;
    t.kind = Kind::Symbol;
    t.name = std::move(name);
    return t;
}

Term Term::variable(std::string name) {
    Term t;
    t.kind = Kind::Variable;
    t.name = std::move(name);
    return t;
}

Term Term::binary(char op, Term lhs, Term rhs) {
    Term t;
    t.kind = Kind::Binary;
    t.op = op;
    t.operands.push_back(std::move(lhs));
    t.operands.push_back(std::move(rhs));
    return t;
}

Term Term::interval(std::int64_t lo, std::int64_t hi) {
    Term t;
    t.kind = Kind::Interval;
    t.operands.push_back(integer(lo));
    t.operands.push_back(integer(hi));
    return t;
}

bool Term::is_ground() const {
    if (kind == Kind::Variable) return false;
    return std::all_of(operands.begin(), operands.end(), [](const Term& t) { return t.is_ground(); });
}

void Term::collect_variables(std::vector<std::string>& out) const {
    if (kind == Kind::Variable) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        return;
    }
    for (const auto& t : operands) t.collect_variables(out);
}

std::string Term::to_string() const {
    switch (kind) {
        case Kind::Integer: return std::to_string(number);
        case Kind::Symbol:
        case Kind::Variable: return name;
        case Kind::Interval: return operands[0].to_string() + ".." + operands[1].to_string();
        case Kind::Binary: {
            // Operators are left-associative, so only a compound right operand
            // needs parentheses.
            std::string rhs = operands[1].to_string();
            if (operands[1].kind == Kind::Binary) rhs = "(" + rhs + ")";
            return operands[0].to_string() + op + rhs;
        }
    }
    return {};
}

std::string Atom::to_string() const {
    if (args.empty()) return predicate;
    std::string s = predicate + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) s += ',';
        s += args[i].to_string();
    }
    return s + ")";
}

const char* to_string(CompareOp op) {
    switch (op) {
        case CompareOp::Less: return "<";
        case CompareOp::LessEqual: return "<=";
        case CompareOp::Greater: return ">";
        case CompareOp::GreaterEqual: return ">=";
        case CompareOp::Equal: return "=";
        case CompareOp::NotEqual: return "!=";
    }
    return "?";
}

Literal Literal::positive(Atom a) {
    Literal l;
    l.kind = Kind::Positive;
    l.atom = std::move(a);
    return l;
}

Literal Literal::negative(Atom a) {
    Literal l;
    l.kind = Kind::Negative;
    l.atom = std::move(a);
    return l;
}

Literal Literal::comparison(Term lhs, CompareOp op, Term rhs) {
    Literal l;
    l.kind = Kind::Comparison;
    l.lhs = std::move(lhs);
    l.op = op;
    l.rhs = std::move(rhs);
    return l;
}

std::string Literal::to_string() const {
    switch (kind) {
        case Kind::Positive: return atom.to_string();
        case Kind::Negative: return "not " + atom.to_string();
        case Kind::Comparison: return lhs.to_string() + nppx::to_string(op) + rhs.to_string();
    }
    return {};
}

std::vector<Atom> Rule::positive_body() const {
    std::vector<Atom> out;
    for (const auto& l : body)
        if (l.kind == Literal::Kind::Positive) out.push_back(l.atom);
    return out;
}

std::vector<Atom> Rule::negative_body() const {
    std::vector<Atom> out;
    for (const auto& l : body)
        if (l.kind == Literal::Kind::Negative) out.push_back(l.atom);
    return out;
}

std::string Rule::to_string() const {
    std::string s;
    if (head) s = head->to_string();
    if (!body.empty()) {
        s += head ? " :- " : ":- ";
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (i) s += ", ";
            s += body[i].to_string();
        }
    }
    return s + ".";
}

// ---------------------------------------------------------------------------
// Safety and arity

std::vector<std::string> unsafe_variables(const Rule& rule) {
    std::vector<std::string> bound;
    for (const auto& l : rule.body) {
        if (l.kind != Literal::Kind::Positive) continue;
        for (const auto& arg : l.atom.args)
            if (arg.kind == Term::Kind::Variable &&
                std::find(bound.begin(), bound.end(), arg.name) == bound.end())
                bound.push_back(arg.name);
    }

    std::vector<std::string> needed;
    if (rule.head)
        for (const auto& arg : rule.head->args) arg.collect_variables(needed);
    for (const auto& l : rule.body) {
        switch (l.kind) {
            case Literal::Kind::Positive:
                for (const auto& arg : l.atom.args)
                    if (arg.kind == Term::Kind::Binary) arg.collect_variables(needed);
                break;
            case Literal::Kind::Negative:
                for (const auto& arg : l.atom.args) arg.collect_variables(needed);
                break;
            case Literal::Kind::Comparison:
                l.lhs.collect_variables(needed);
                l.rhs.collect_variables(needed);
                break;
        }
    }

    std::vector<std::string> unsafe;
    for (const auto& v : needed)
        if (std::find(bound.begin(), bound.end(), v) == bound.end()) unsafe.push_back(v);
    return unsafe;
}

void Program::register_arity(const Atom& atom, const Rule& rule) {
    auto [it, inserted] = arities_.emplace(atom.predicate, atom.arity());
    if (!inserted && it->second != atom.arity())
        throw Error(ErrorKind::Arity, "predicate '" + atom.predicate + "' used with arity " +
                                          std::to_string(atom.arity()) + " and " + std::to_string(it->second) +
                                          " in rule '" + rule.to_string() + "'");
}

void Program::add(Rule rule) {
    if (auto unsafe = unsafe_variables(rule); !unsafe.empty())
        throw Error(ErrorKind::Safety, "unsafe variable " + unsafe.front() + " in rule '" + rule.to_string() + "'");
    if (rule.head) register_arity(*rule.head, rule);
    for (const auto& l : rule.body)
        if (l.kind != Literal::Kind::Comparison) register_arity(l.atom, rule);
    rules_.push_back(std::move(rule));
}

void Program::append(const Program& other) {
    for (const auto& r : other.rules_) add(r);
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
    Ident,
    Variable,
    Number,
    Not,
    LParen,
    RParen,
    Comma,
    Semicolon,
    Dot,
    DotDot,
    If,  // :-
    Plus,
    Minus,
    Less,
    LessEqual,
    Greater,
    GreaterEqual,
    Equal,
    NotEqual,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::int64_t number = 0;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> tokenize() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.line = line_;
            t.column = column_;
            if (pos_ >= text_.size()) {
                out.push_back(t);
                return out;
            }
            const char c = text_[pos_];
            if (std::islower(static_cast<unsigned char>(c))) {
                t.text = take_identifier();
                t.kind = t.text == "not" ? Tok::Not : Tok::Ident;
            } else if (std::isupper(static_cast<unsigned char>(c))) {
                t.text = take_identifier();
                t.kind = Tok::Variable;
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                t.kind = Tok::Number;
                t.text = take_number(t);
            } else {
                t.kind = take_punct(t);
            }
            out.push_back(std::move(t));
        }
    }

private:
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }

    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
            if (text_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
            ++pos_;
        }
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '%') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    std::string take_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            advance();
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string take_number(Token& t) {
        const std::size_t start = pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        std::string digits(text_.substr(start, pos_ - start));
        try {
            t.number = std::stoll(digits);
        } catch (const std::out_of_range&) {
            throw ParseError("integer out of range: " + digits, t.line, t.column);
        }
        return digits;
    }

    Tok take_punct(Token& t) {
        const char c = peek();
        const char n = peek(1);
        auto one = [&](Tok k) {
            t.text = std::string(1, c);
            advance();
            return k;
        };
        auto two = [&](Tok k) {
            t.text = std::string{c, n};
            advance(2);
            return k;
        };
        switch (c) {
            case '(': return one(Tok::LParen);
            case ')': return one(Tok::RParen);
            case ',': return one(Tok::Comma);
            case ';': return one(Tok::Semicolon);
            case '+': return one(Tok::Plus);
            case '-': return one(Tok::Minus);
            case '=': return one(Tok::Equal);
            case '.': return n == '.' ? two(Tok::DotDot) : one(Tok::Dot);
            case ':':
                if (n == '-') return two(Tok::If);
                break;
            case '<': return n == '=' ? two(Tok::LessEqual) : one(Tok::Less);
            case '>': return n == '=' ? two(Tok::GreaterEqual) : one(Tok::Greater);
            case '!':
                if (n == '=') return two(Tok::NotEqual);
                break;
            default: break;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

// One argument position of a fact may hold several alternatives (pooling);
// an interval alternative expands to one alternative per integer.
using Alternatives = std::vector<Term>;

struct RawAtom {
    std::string predicate;
    std::vector<Alternatives> args;
    int line = 0;
    int column = 0;

    bool is_plain() const {
        return std::all_of(args.begin(), args.end(), [](const Alternatives& a) {
            return a.size() == 1 && a[0].kind != Term::Kind::Interval;
        });
    }

    Atom plain() const {
        Atom atom{predicate, {}};
        for (const auto& a : args) atom.args.push_back(a[0]);
        return atom;
    }
};

class Parser {
public:
    Parser(std::vector<Token> tokens, std::string_view source)
        : tokens_(std::move(tokens)), source_(source) {}

    Program parse() {
        Program program;
        while (cur().kind != Tok::End) parse_statement(program);
        return program;
    }

    Atom parse_single_atom() {
        RawAtom raw = parse_raw_atom();
        expect(Tok::End, "end of input");
        if (!raw.is_plain()) fail("pools and intervals are not allowed here", raw.line, raw.column);
        return raw.plain();
    }

private:
    const Token& cur() const { return tokens_[pos_]; }
    const Token& ahead(std::size_t n = 1) const { return tokens_[std::min(pos_ + n, tokens_.size() - 1)]; }
    void next() {
        if (pos_ + 1 < tokens_.size()) ++pos_;
    }

    [[noreturn]] void fail(const std::string& message, int line, int column) const {
        throw ParseError(std::string(source_) + ": " + message, line, column);
    }
    [[noreturn]] void fail(const std::string& message) const { fail(message, cur().line, cur().column); }

    std::string describe(const Token& t) const { return t.kind == Tok::End ? "end of input" : "'" + t.text + "'"; }

    void expect(Tok kind, const char* what) {
        if (cur().kind != kind) fail(std::string("expected ") + what + ", found " + describe(cur()));
        next();
    }

    void parse_statement(Program& program) {
        const int line = cur().line;
        Rule rule;
        std::optional<RawAtom> head;
        if (cur().kind == Tok::If) {
            next();
            rule.body = parse_body();
        } else {
            head = parse_raw_atom();
            if (cur().kind == Tok::If) {
                next();
                rule.body = parse_body();
            }
        }
        expect(Tok::Dot, "'.'");

        try {
            if (head && rule.body.empty()) {
                expand_fact(*head, program);
                return;
            }
            if (head) {
                if (!head->is_plain()) fail("pools and intervals are only allowed in facts", head->line, head->column);
                rule.head = head->plain();
            }
            program.add(std::move(rule));
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(source_) + ":" + std::to_string(line) + ": " + e.what());
        }
    }

    void expand_fact(const RawAtom& raw, Program& program) {
        std::vector<Alternatives> positions;
        for (const auto& alts : raw.args) {
            Alternatives expanded;
            for (const auto& t : alts) {
                if (t.kind != Term::Kind::Interval) {
                    expanded.push_back(t);
                    continue;
                }
                const auto lo = t.operands[0].number;
                const auto hi = t.operands[1].number;
                if (lo > hi)
                    throw Error(ErrorKind::Interval, "empty interval " + t.to_string() + " in fact " + raw.predicate);
                for (auto v = lo; v <= hi; ++v) expanded.push_back(Term::integer(v));
            }
            positions.push_back(std::move(expanded));
        }
        // Cartesian product, first argument varying slowest.
        std::vector<std::size_t> index(positions.size(), 0);
        for (;;) {
            Rule fact;
            fact.head = Atom{raw.predicate, {}};
            for (std::size_t i = 0; i < positions.size(); ++i) fact.head->args.push_back(positions[i][index[i]]);
            program.add(std::move(fact));
            std::size_t k = positions.size();
            while (k > 0) {
                --k;
                if (++index[k] < positions[k].size()) break;
                index[k] = 0;
                if (k == 0) return;
            }
            if (positions.empty()) return;
        }
    }

    std::vector<Literal> parse_body() {
        std::vector<Literal> body;
        body.push_back(parse_literal());
        while (cur().kind == Tok::Comma) {
            next();
            body.push_back(parse_literal());
        }
        return body;
    }

    static std::optional<CompareOp> compare_op(Tok t) {
        switch (t) {
            case Tok::Less: return CompareOp::Less;
            case Tok::LessEqual: return CompareOp::LessEqual;
            case Tok::Greater: return CompareOp::Greater;
            case Tok::GreaterEqual: return CompareOp::GreaterEqual;
            case Tok::Equal: return CompareOp::Equal;
            case Tok::NotEqual: return CompareOp::NotEqual;
            default: return std::nullopt;
        }
    }

    Literal parse_literal() {
        if (cur().kind == Tok::Not) {
            next();
            RawAtom raw = parse_raw_atom();
            if (!raw.is_plain()) fail("pools and intervals are only allowed in facts", raw.line, raw.column);
            return Literal::negative(raw.plain());
        }
        const bool atom_like = cur().kind == Tok::Ident && !compare_op(ahead().kind);
        if (atom_like) {
            RawAtom raw = parse_raw_atom();
            if (!raw.is_plain()) fail("pools and intervals are only allowed in facts", raw.line, raw.column);
            if (compare_op(cur().kind)) fail("an atom cannot be compared");
            return Literal::positive(raw.plain());
        }
        Term lhs = parse_term();
        auto op = compare_op(cur().kind);
        if (!op) fail("expected comparison operator, found " + describe(cur()));
        next();
        Term rhs = parse_term();
        return Literal::comparison(std::move(lhs), *op, std::move(rhs));
    }

    RawAtom parse_raw_atom() {
        RawAtom raw;
        raw.line = cur().line;
        raw.column = cur().column;
        if (cur().kind != Tok::Ident) fail("expected predicate name, found " + describe(cur()));
        raw.predicate = cur().text;
        next();
        if (cur().kind != Tok::LParen) return raw;
        next();
        raw.args.push_back(parse_alternatives());
        while (cur().kind == Tok::Comma) {
            next();
            raw.args.push_back(parse_alternatives());
        }
        expect(Tok::RParen, "')'");
        return raw;
    }

    Alternatives parse_alternatives() {
        Alternatives alts;
        alts.push_back(parse_pool_term());
        while (cur().kind == Tok::Semicolon) {
            next();
            alts.push_back(parse_pool_term());
        }
        return alts;
    }

    Term parse_pool_term() {
        const int line = cur().line;
        const int column = cur().column;
        Term t = parse_term();
        if (cur().kind != Tok::DotDot) return t;
        next();
        Term hi = parse_term();
        if (t.kind != Term::Kind::Integer || hi.kind != Term::Kind::Integer)
            fail("interval bounds must be integers", line, column);
        return Term::interval(t.number, hi.number);
    }

    // term := unary (('+'|'-') unary)*, constant subexpressions folded.
    Term parse_term() {
        Term lhs = parse_unary();
        while (cur().kind == Tok::Plus || cur().kind == Tok::Minus) {
            const char op = cur().kind == Tok::Plus ? '+' : '-';
            const int line = cur().line;
            const int column = cur().column;
            next();
            Term rhs = parse_unary();
            lhs = make_binary(op, std::move(lhs), std::move(rhs), line, column);
        }
        return lhs;
    }

    Term make_binary(char op, Term lhs, Term rhs, int line, int column) {
        if (lhs.kind == Term::Kind::Symbol || rhs.kind == Term::Kind::Symbol)
            fail("arithmetic on a symbolic constant", line, column);
        if (lhs.kind == Term::Kind::Integer && rhs.kind == Term::Kind::Integer)
            return Term::integer(op == '+' ? lhs.number + rhs.number : lhs.number - rhs.number);
        return Term::binary(op, std::move(lhs), std::move(rhs));
    }

    Term parse_unary() {
        if (cur().kind == Tok::Minus) {
            const int line = cur().line;
            const int column = cur().column;
            next();
            Term operand = parse_unary();
            return make_binary('-', Term::integer(0), std::move(operand), line, column);
        }
        return parse_primary();
    }

    Term parse_primary() {
        const Token& t = cur();
        switch (t.kind) {
            case Tok::Number: {
                Term out = Term::integer(t.number);
                next();
                return out;
            }
            case Tok::Ident: {
                if (ahead().kind == Tok::LParen) fail("function terms are not supported");
                Term out = Term::symbol(t.text);
                next();
                return out;
            }
            case Tok::Variable: {
                Term out = Term::variable(t.text);
                next();
                return out;
            }
            case Tok::LParen: {
                next();
                Term inner = parse_term();
                expect(Tok::RParen, "')'");
                return inner;
            }
            default: fail("expected a term, found " + describe(t));
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::string_view source_;
};

}  // namespace

Program parse_program(std::string_view text, std::string_view source_name) {
    Parser parser(Lexer(text).tokenize(), source_name);
    return parser.parse();
}

Atom parse_atom(std::string_view text) {
    Parser parser(Lexer(text).tokenize(), "<atom>");
    Atom atom = parser.parse_single_atom();
    for (const auto& arg : atom.args)
        if (!arg.is_ground()) throw Error(ErrorKind::InvalidArgument, "atom is not ground: " + std::string(text));
    return atom;
}

std::string format_program(const Program& program) {
    std::string out;
    for (const auto& rule : program.rules()) {
        out += rule.to_string();
        out += '\n';
    }
    return out;
}

}  // namespace nppx
