#include "nppx/engine.hpp"
#include "nppx/error.hpp"

#include <algorithm>
#include <unordered_set>

namespace nppx {

namespace {

// ---------------------------------------------------------------------------
// Compiled terms

struct CTerm {
    enum class Kind : std::uint8_t { Const, Var, Binary };
    Kind kind = Kind::Const;
    Value value;
    int slot = -1;
    char op = 0;
    std::vector<CTerm> kids;
    std::uint64_t vars = 0;  // mask of slots used
};

using Binding = std::vector<Value>;

std::optional<Value> eval(const CTerm& t, const Binding& b) {
    switch (t.kind) {
        case CTerm::Kind::Const: return t.value;
        case CTerm::Kind::Var: return b[t.slot];
        case CTerm::Kind::Binary: {
            auto l = eval(t.kids[0], b);
            auto r = eval(t.kids[1], b);
            if (!l || !r || !l->is_integer() || !r->is_integer()) return std::nullopt;
            return Value::integer(t.op == '+' ? l->as_integer() + r->as_integer() : l->as_integer() - r->as_integer());
        }
    }
    return std::nullopt;
}

bool compare(const Value& l, CompareOp op, const Value& r) {
    const auto c = canonical_compare(l, r);
    switch (op) {
        case CompareOp::Less: return c < 0;
        case CompareOp::LessEqual: return c <= 0;
        case CompareOp::Greater: return c > 0;
        case CompareOp::GreaterEqual: return c >= 0;
        case CompareOp::Equal: return c == 0;
        case CompareOp::NotEqual: return c != 0;
    }
    return false;
}

struct CAtom {
    Symbol predicate;
    std::vector<CTerm> args;
    std::uint64_t arith_vars = 0;  // vars that must be bound before matching
};

struct CComparison {
    CTerm lhs;
    CompareOp op;
    CTerm rhs;
    std::uint64_t vars = 0;
};

struct CRule {
    std::size_t source = 0;
    std::optional<CAtom> head;
    std::vector<CAtom> pos;
    std::vector<CAtom> neg;
    std::vector<CComparison> comparisons;
    std::size_t slots = 0;
    std::string text;
};

class Compiler {
public:
    CRule compile(const Rule& rule, std::size_t source) {
        slots_.clear();
        CRule out;
        out.source = source;
        out.text = rule.to_string();
        if (rule.head) out.head = atom(*rule.head);
        for (const auto& lit : rule.body) {
            switch (lit.kind) {
                case Literal::Kind::Positive: out.pos.push_back(atom(lit.atom)); break;
                case Literal::Kind::Negative: out.neg.push_back(atom(lit.atom)); break;
                case Literal::Kind::Comparison: {
                    CComparison c{term(lit.lhs), lit.op, term(lit.rhs), 0};
                    c.vars = c.lhs.vars | c.rhs.vars;
                    out.comparisons.push_back(std::move(c));
                    break;
                }
            }
        }
        out.slots = slots_.size();
        return out;
    }

private:
    CAtom atom(const Atom& a) {
        CAtom out{Symbol::intern(a.predicate), {}, 0};
        for (const auto& t : a.args) {
            out.args.push_back(term(t));
            if (out.args.back().kind == CTerm::Kind::Binary) out.arith_vars |= out.args.back().vars;
        }
        return out;
    }

    CTerm term(const Term& t) {
        CTerm out;
        switch (t.kind) {
            case Term::Kind::Integer: out.value = Value::integer(t.number); break;
            case Term::Kind::Symbol: out.value = Value::symbol(t.name); break;
            case Term::Kind::Variable: {
                out.kind = CTerm::Kind::Var;
                auto it = std::find(slots_.begin(), slots_.end(), t.name);
                out.slot = static_cast<int>(it - slots_.begin());
                if (it == slots_.end()) slots_.push_back(t.name);
                if (out.slot >= 64) throw Error(ErrorKind::Limit, "more than 64 variables in one rule");
                out.vars = std::uint64_t{1} << out.slot;
                break;
            }
            case Term::Kind::Binary:
                out.kind = CTerm::Kind::Binary;
                out.op = t.op;
                out.kids.push_back(term(t.operands[0]));
                out.kids.push_back(term(t.operands[1]));
                out.vars = out.kids[0].vars | out.kids[1].vars;
                break;
            case Term::Kind::Interval: throw Error(ErrorKind::Internal, "interval survived parsing");
        }
        return out;
    }

    std::vector<std::string> slots_;
};

// ---------------------------------------------------------------------------
// Relations

struct RelKey {
    std::uint32_t predicate;
    std::size_t arity;
    bool operator==(const RelKey&) const = default;
};

struct RelKeyHash {
    std::size_t operator()(const RelKey& k) const noexcept { return k.predicate * 1315423911u + k.arity; }
};

struct Relation {
    std::vector<AtomId> tuples;
    std::vector<std::unordered_map<Value, std::vector<std::uint32_t>>> index;  // per position
    std::uint32_t old_end = 0;    // [0,old_end) = Old
    std::uint32_t delta_end = 0;  // [old_end,delta_end) = Delta
};

struct Range {
    std::uint32_t lo, hi;
};

class Grounder {
public:
    Grounder(const Program& program, std::span<const GroundAtom> extra, const GroundOptions& options)
        : program_(program), extra_(extra), options_(options), table_(std::make_shared<AtomTable>()) {}

    GroundProgram run() {
        Compiler compiler;
        for (std::size_t i = 0; i < program_.rules().size(); ++i)
            rules_.push_back(compiler.compile(program_.rules()[i], i));

        // Bodies without positive atoms are ground by safety and fire once.
        for (const auto& r : rules_)
            if (r.pos.empty()) instantiate_without_positive(r);
        for (const auto& fact : extra_) {
            GroundRule gr;
            gr.head = intern_head(fact);
            emit(std::move(gr), nullptr);
        }

        for (;;) {
            bool any_delta = false;
            for (auto& [key, rel] : relations_) {
                rel.old_end = rel.delta_end;
                rel.delta_end = static_cast<std::uint32_t>(rel.tuples.size());
                any_delta |= rel.delta_end > rel.old_end;
            }
            if (!any_delta) break;
            for (const auto& r : rules_) {
                if (r.pos.empty()) continue;
                for (std::size_t i = 0; i < r.pos.size(); ++i) {
                    Relation* rel = relation(r.pos[i].predicate, r.pos[i].args.size());
                    if (!rel || rel->delta_end == rel->old_end) continue;
                    join_with_delta(r, i);
                }
            }
        }
        return GroundProgram(table_, std::move(out_));
    }

private:
    Relation* relation(Symbol predicate, std::size_t arity) {
        auto it = relations_.find(RelKey{predicate.id(), arity});
        return it == relations_.end() ? nullptr : &it->second;
    }

    AtomId intern_head(const GroundAtom& atom) {
        const AtomId id = table_->intern(atom);
        if (id >= derivable_.size()) derivable_.resize(id + 1, false);
        if (!derivable_[id]) {
            derivable_[id] = true;
            Relation& rel = relations_[RelKey{atom.predicate.id(), atom.args.size()}];
            if (rel.index.size() < atom.args.size()) rel.index.resize(atom.args.size());
            const auto pos = static_cast<std::uint32_t>(rel.tuples.size());
            rel.tuples.push_back(id);
            for (std::size_t k = 0; k < atom.args.size(); ++k) rel.index[k][atom.args[k]].push_back(pos);
        }
        return id;
    }

    void emit(GroundRule gr, const CRule* source) {
        std::sort(gr.pos.begin(), gr.pos.end());
        gr.pos.erase(std::unique(gr.pos.begin(), gr.pos.end()), gr.pos.end());
        std::sort(gr.neg.begin(), gr.neg.end());
        gr.neg.erase(std::unique(gr.neg.begin(), gr.neg.end()), gr.neg.end());
        std::string key = std::to_string(gr.source) + ':' + (gr.head ? std::to_string(*gr.head) : "-") + '|';
        for (auto a : gr.pos) key += std::to_string(a) + ',';
        key += '|';
        for (auto a : gr.neg) key += std::to_string(a) + ',';
        if (!seen_.insert(std::move(key)).second) return;
        if (out_.size() >= options_.max_ground_rules)
            throw Error(ErrorKind::Limit, "ground rule limit of " + std::to_string(options_.max_ground_rules) +
                                              " exceeded while instantiating '" +
                                              (source ? source->text : std::string("extra facts")) + "'");
        out_.push_back(std::move(gr));
    }

    std::optional<GroundAtom> instantiate(const CAtom& a, const Binding& b) {
        GroundAtom g{a.predicate, {}};
        g.args.reserve(a.args.size());
        for (const auto& t : a.args) {
            auto v = eval(t, b);
            if (!v) return std::nullopt;
            g.args.push_back(*v);
        }
        return g;
    }

    // Checks the comparisons whose variables became bound in this step.
    static bool comparisons_hold(const CRule& r, const Binding& b, std::uint64_t before, std::uint64_t after) {
        for (const auto& c : r.comparisons) {
            if (c.vars == 0 || (after & c.vars) != c.vars || (before & c.vars) == c.vars) continue;
            auto l = eval(c.lhs, b);
            auto rv = eval(c.rhs, b);
            if (!l || !rv || !compare(*l, c.op, *rv)) return false;
        }
        return true;
    }

    void finish(const CRule& r, const Binding& b, const std::vector<AtomId>& matched) {
        GroundRule gr;
        gr.source = r.source;
        gr.pos = matched;
        for (const auto& n : r.neg) {
            auto g = instantiate(n, b);
            if (!g) return;
            gr.neg.push_back(table_->intern(*g));
        }
        for (const auto& c : r.comparisons) {
            auto l = eval(c.lhs, b);
            auto rv = eval(c.rhs, b);
            gr.comparisons.push_back(l->to_string() + to_string(c.op) + rv->to_string());
        }
        if (r.head) {
            auto h = instantiate(*r.head, b);
            if (!h) return;
            gr.head = intern_head(*h);
        }
        emit(std::move(gr), &r);
    }

    void instantiate_without_positive(const CRule& r) {
        Binding b(r.slots);
        for (const auto& c : r.comparisons) {
            auto l = eval(c.lhs, b);
            auto rv = eval(c.rhs, b);
            if (!l || !rv || !compare(*l, c.op, *rv)) return;
        }
        finish(r, b, {});
    }

    Range range_for(const Relation& rel, std::size_t literal, std::size_t delta_literal) const {
        if (literal < delta_literal) return {0, rel.old_end};
        if (literal == delta_literal) return {rel.old_end, rel.delta_end};
        return {0, rel.delta_end};
    }

    // Candidate tuple positions of a literal under the current binding:
    // the smallest index bucket among bound positions, or the whole range.
    struct Candidates {
        const std::vector<std::uint32_t>* bucket = nullptr;  // null = contiguous range
        std::size_t begin = 0, end = 0;                      // into bucket, or tuple positions
        std::size_t count() const { return end - begin; }
        bool empty = false;
    };

    Candidates candidates(const CAtom& a, const Relation& rel, Range range, const Binding& b, std::uint64_t bound) {
        Candidates best;
        best.begin = range.lo;
        best.end = range.hi;
        for (std::size_t k = 0; k < a.args.size(); ++k) {
            const CTerm& t = a.args[k];
            if ((t.vars & bound) != t.vars) continue;
            auto v = eval(t, b);
            if (!v) {
                best.empty = true;
                best.begin = best.end = 0;
                return best;
            }
            auto it = rel.index[k].find(*v);
            if (it == rel.index[k].end()) {
                best.empty = true;
                best.bucket = nullptr;
                best.begin = best.end = 0;
                return best;
            }
            const auto& bucket = it->second;
            const auto lo = std::lower_bound(bucket.begin(), bucket.end(), range.lo) - bucket.begin();
            const auto hi = std::lower_bound(bucket.begin(), bucket.end(), range.hi) - bucket.begin();
            if (static_cast<std::size_t>(hi - lo) < best.count()) {
                best.bucket = &bucket;
                best.begin = lo;
                best.end = hi;
            }
        }
        return best;
    }

    void join_with_delta(const CRule& r, std::size_t delta_literal) {
        Binding b(r.slots);
        std::vector<bool> done(r.pos.size(), false);
        std::vector<AtomId> matched;
        // Ground comparisons (no variables) are checked once up front.
        for (const auto& c : r.comparisons)
            if (c.vars == 0) {
                auto l = eval(c.lhs, b);
                auto rv = eval(c.rhs, b);
                if (!l || !rv || !compare(*l, c.op, *rv)) return;
            }
        search(r, delta_literal, b, 0, done, matched, r.pos.size());
    }

    void search(const CRule& r, std::size_t delta_literal, Binding& b, std::uint64_t bound, std::vector<bool>& done,
                std::vector<AtomId>& matched, std::size_t remaining) {
        if (remaining == 0) {
            finish(r, b, matched);
            return;
        }
        // Greedy choice: eligible literal with the fewest candidates.
        std::size_t pick = SIZE_MAX;
        Candidates pick_cands;
        Relation* pick_rel = nullptr;
        for (std::size_t i = 0; i < r.pos.size(); ++i) {
            if (done[i]) continue;
            const CAtom& a = r.pos[i];
            if ((a.arith_vars & bound) != a.arith_vars) continue;
            Relation* rel = relation(a.predicate, a.args.size());
            if (!rel) return;
            Candidates c = candidates(a, *rel, range_for(*rel, i, delta_literal), b, bound);
            if (c.empty || c.count() == 0) return;
            if (pick == SIZE_MAX || c.count() < pick_cands.count()) {
                pick = i;
                pick_cands = c;
                pick_rel = rel;
            }
        }
        if (pick == SIZE_MAX) throw Error(ErrorKind::Internal, "no eligible literal in '" + r.text + "'");

        const CAtom& a = r.pos[pick];
        done[pick] = true;
        const std::uint64_t before = bound;
        for (std::size_t k = pick_cands.begin; k < pick_cands.end; ++k) {
            const std::uint32_t position = pick_cands.bucket ? (*pick_cands.bucket)[k] : static_cast<std::uint32_t>(k);
            const AtomId id = pick_rel->tuples[position];
            const GroundAtom& g = (*table_)[id];
            std::uint64_t now = before;
            bool ok = true;
            for (std::size_t j = 0; j < a.args.size() && ok; ++j) {
                const CTerm& t = a.args[j];
                if (t.kind == CTerm::Kind::Var && !(now & t.vars)) {
                    b[t.slot] = g.args[j];
                    now |= t.vars;
                } else {
                    auto v = eval(t, b);
                    ok = v && *v == g.args[j];
                }
            }
            if (!ok || !comparisons_hold(r, b, before, now)) continue;
            matched.push_back(id);
            search(r, delta_literal, b, now, done, matched, remaining - 1);
            matched.pop_back();
        }
        done[pick] = false;
    }

    const Program& program_;
    std::span<const GroundAtom> extra_;
    GroundOptions options_;
    std::shared_ptr<AtomTable> table_;
    std::vector<CRule> rules_;
    std::unordered_map<RelKey, Relation, RelKeyHash> relations_;
    std::vector<bool> derivable_;
    std::vector<GroundRule> out_;
    std::unordered_set<std::string> seen_;
};

}  // namespace

GroundProgram ground(const Program& program, std::span<const GroundAtom> extra_facts, const GroundOptions& options) {
    return Grounder(program, extra_facts, options).run();
}

}  // namespace nppx
