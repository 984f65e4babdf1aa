#include "nppx/engine.hpp"
#include "nppx/error.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "json.hpp"

namespace nppx {

// ---------------------------------------------------------------------------
// Ground atoms

std::string GroundAtom::to_string() const {
    std::string s = predicate.name();
    if (args.empty()) return s;
    s += '(';
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) s += ',';
        s += args[i].to_string();
    }
    return s + ')';
}

std::strong_ordering canonical_compare(const GroundAtom& a, const GroundAtom& b) {
    if (a.predicate != b.predicate) {
        const int c = a.predicate.name().compare(b.predicate.name());
        return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    if (a.args.size() != b.args.size()) return a.args.size() <=> b.args.size();
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (auto c = canonical_compare(a.args[i], b.args[i]); c != 0) return c;
    return std::strong_ordering::equal;
}

std::size_t GroundAtomHash::operator()(const GroundAtom& a) const noexcept {
    std::size_t h = std::hash<Symbol>{}(a.predicate);
    for (const auto& v : a.args) h = h * 1000003u ^ v.hash();
    return h;
}

GroundAtom parse_ground_atom(std::string_view text) {
    const Atom atom = parse_atom(text);
    GroundAtom g{Symbol::intern(atom.predicate), {}};
    for (const auto& t : atom.args) {
        if (t.kind == Term::Kind::Integer) g.args.push_back(Value::integer(t.number));
        else if (t.kind == Term::Kind::Symbol) g.args.push_back(Value::symbol(t.name));
        else throw Error(ErrorKind::InvalidArgument, "not a ground atom: " + std::string(text));
    }
    return g;
}

AtomId AtomTable::intern(const GroundAtom& atom) {
    if (auto it = ids_.find(atom); it != ids_.end()) return it->second;
    const auto id = static_cast<AtomId>(atoms_.size());
    atoms_.push_back(atom);
    ids_.emplace(atom, id);
    return id;
}

std::optional<AtomId> AtomTable::find(const GroundAtom& atom) const {
    if (auto it = ids_.find(atom); it != ids_.end()) return it->second;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Ground programs and interpretations

GroundProgram::GroundProgram(std::shared_ptr<const AtomTable> atoms, std::vector<GroundRule> rules)
    : atoms_(std::move(atoms)), rules_(std::move(rules)), by_head_(atoms_->size()) {
    for (std::uint32_t i = 0; i < rules_.size(); ++i)
        if (rules_[i].head) by_head_[*rules_[i].head].push_back(i);
}

bool GroundProgram::is_fact(AtomId atom) const {
    for (auto r : by_head_[atom])
        if (rules_[r].is_fact()) return true;
    return false;
}

std::optional<AtomId> GroundProgram::find(std::string_view atom_text) const {
    return atoms_->find(parse_ground_atom(atom_text));
}

GroundProgram make_propositional(std::size_t atoms, std::vector<GroundRule> rules, std::string_view prefix) {
    auto table = std::make_shared<AtomTable>();
    for (std::size_t i = 0; i < atoms; ++i)
        table->intern(GroundAtom{Symbol::intern(std::string(prefix) + std::to_string(i)), {}});
    for (auto& r : rules) {
        std::sort(r.pos.begin(), r.pos.end());
        r.pos.erase(std::unique(r.pos.begin(), r.pos.end()), r.pos.end());
        std::sort(r.neg.begin(), r.neg.end());
        r.neg.erase(std::unique(r.neg.begin(), r.neg.end()), r.neg.end());
    }
    return GroundProgram(std::move(table), std::move(rules));
}

Interpretation::Interpretation(std::size_t universe, std::span<const AtomId> atoms) : bits_(universe, false) {
    for (auto a : atoms) insert(a);
}

void Interpretation::insert(AtomId id) {
    if (id >= bits_.size()) throw Error(ErrorKind::InvalidArgument, "atom id outside the universe");
    bits_[id] = true;
}

std::size_t Interpretation::size() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true)); }

std::vector<AtomId> Interpretation::atoms() const {
    std::vector<AtomId> out;
    for (AtomId i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(i);
    return out;
}

bool Interpretation::operator==(const Interpretation& other) const {
    const std::size_t n = std::max(bits_.size(), other.bits_.size());
    for (AtomId i = 0; i < n; ++i)
        if (contains(i) != other.contains(i)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Reduct and least model

GroundProgram reduct(const GroundProgram& gp, const Interpretation& i) {
    std::vector<GroundRule> kept;
    kept.reserve(gp.rules().size());
    for (const auto& r : gp.rules()) {
        if (std::any_of(r.neg.begin(), r.neg.end(), [&](AtomId a) { return i.contains(a); })) continue;
        GroundRule copy = r;
        copy.neg.clear();
        kept.push_back(std::move(copy));
    }
    return gp.with_rules(std::move(kept));
}

namespace {

// Forward chaining with per-rule counters of still-missing body atoms.
// `usable` filters rules; `model` is extended in place.
template <class Usable>
void forward_chain(const GroundProgram& gp, Interpretation& model, std::span<const std::uint32_t> rules, Usable usable,
                   const std::vector<std::vector<std::uint32_t>>& watchers, std::vector<std::uint32_t>& missing) {
    std::vector<AtomId> queue;
    auto fire = [&](const GroundRule& r) {
        if (r.head && !model.contains(*r.head)) {
            model.insert(*r.head);
            queue.push_back(*r.head);
        }
    };
    // Count first, fire second: a head set while counting would be counted
    // as present by later rules and then decremented again from the queue.
    for (auto idx : rules) {
        const GroundRule& r = gp.rules()[idx];
        if (!usable(r)) {
            missing[idx] = UINT32_MAX;
            continue;
        }
        std::uint32_t m = 0;
        for (auto a : r.pos) m += !model.contains(a);
        missing[idx] = m;
    }
    for (auto idx : rules)
        if (missing[idx] == 0) fire(gp.rules()[idx]);
    while (!queue.empty()) {
        const AtomId a = queue.back();
        queue.pop_back();
        for (auto idx : watchers[a]) {
            if (missing[idx] == UINT32_MAX || missing[idx] == 0) continue;
            if (--missing[idx] == 0) fire(gp.rules()[idx]);
        }
    }
}

std::vector<std::vector<std::uint32_t>> pos_watchers(const GroundProgram& gp) {
    std::vector<std::vector<std::uint32_t>> w(gp.universe_size());
    for (std::uint32_t i = 0; i < gp.rules().size(); ++i)
        for (auto a : gp.rules()[i].pos) w[a].push_back(i);
    return w;
}

std::vector<std::uint32_t> all_rule_indices(const GroundProgram& gp) {
    std::vector<std::uint32_t> idx(gp.rules().size());
    std::iota(idx.begin(), idx.end(), 0u);
    return idx;
}

}  // namespace

Interpretation least_model(const GroundProgram& gp) {
    for (const auto& r : gp.rules())
        if (!r.neg.empty()) throw Error(ErrorKind::InvalidArgument, "least_model needs a negation-free program");
    Interpretation model(gp.universe_size());
    std::vector<std::uint32_t> missing(gp.rules().size());
    const auto idx = all_rule_indices(gp);
    forward_chain(gp, model, idx, [](const GroundRule&) { return true; }, pos_watchers(gp), missing);
    return model;
}

bool satisfies_constraints(const GroundProgram& gp, const Interpretation& i) {
    for (const auto& r : gp.rules()) {
        if (r.head) continue;
        const bool body = std::all_of(r.pos.begin(), r.pos.end(), [&](AtomId a) { return i.contains(a); }) &&
                          std::none_of(r.neg.begin(), r.neg.end(), [&](AtomId a) { return i.contains(a); });
        if (body) return false;
    }
    return true;
}

bool is_answer_set(const GroundProgram& gp, const Interpretation& i) {
    for (AtomId a : i.atoms())
        if (a >= gp.universe_size()) return false;
    return least_model(reduct(gp, i)) == i && satisfies_constraints(gp, i);
}

std::vector<AtomId> nant(const GroundProgram& gp) {
    std::vector<bool> seen(gp.universe_size(), false);
    for (const auto& r : gp.rules())
        for (auto a : r.neg) seen[a] = true;
    std::vector<AtomId> out;
    for (AtomId a = 0; a < seen.size(); ++a)
        if (seen[a]) out.push_back(a);
    return out;
}

// ---------------------------------------------------------------------------
// Stratified evaluation

namespace {

// Strongly connected components of the atom dependency graph (head -> body),
// emitted dependencies first. Iterative Tarjan.
std::vector<std::vector<AtomId>> dependency_sccs(const GroundProgram& gp, std::vector<std::uint32_t>& component_of) {
    const std::size_t n = gp.universe_size();
    std::vector<std::vector<AtomId>> succ(n);
    for (const auto& r : gp.rules()) {
        if (!r.head) continue;
        for (auto a : r.pos) succ[*r.head].push_back(a);
        for (auto a : r.neg) succ[*r.head].push_back(a);
    }
    constexpr std::uint32_t unvisited = UINT32_MAX;
    std::vector<std::uint32_t> index(n, unvisited), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<AtomId> stack;
    std::vector<std::vector<AtomId>> sccs;
    component_of.assign(n, 0);
    std::uint32_t counter = 0;

    struct Frame {
        AtomId v;
        std::size_t next;
    };
    std::vector<Frame> frames;
    for (AtomId root = 0; root < n; ++root) {
        if (index[root] != unvisited) continue;
        frames.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.next < succ[f.v].size()) {
                const AtomId w = succ[f.v][f.next++];
                if (index[w] == unvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const AtomId v = f.v;
            frames.pop_back();
            if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
            if (low[v] == index[v]) {
                std::vector<AtomId> scc;
                AtomId w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    component_of[w] = static_cast<std::uint32_t>(sccs.size());
                    scc.push_back(w);
                } while (w != v);
                sccs.push_back(std::move(scc));
            }
        }
    }
    return sccs;
}

bool stratified_given(const GroundProgram& gp, const std::vector<std::uint32_t>& component_of) {
    for (const auto& r : gp.rules()) {
        if (!r.head) continue;
        for (auto a : r.neg)
            if (component_of[a] == component_of[*r.head]) return false;
    }
    return true;
}

// Unique answer-set candidate of a stratified program (constraints not checked).
Interpretation stratified_model(const GroundProgram& gp, const std::vector<std::vector<AtomId>>& sccs,
                                const std::vector<std::uint32_t>& component_of) {
    std::vector<std::vector<std::uint32_t>> rules_of(sccs.size());
    for (std::uint32_t i = 0; i < gp.rules().size(); ++i)
        if (gp.rules()[i].head) rules_of[component_of[*gp.rules()[i].head]].push_back(i);

    // Watchers only for body atoms inside the same component; atoms of earlier
    // components are already decided when a component is evaluated.
    std::vector<std::vector<std::uint32_t>> watchers(gp.universe_size());
    for (std::uint32_t i = 0; i < gp.rules().size(); ++i) {
        const auto& r = gp.rules()[i];
        if (!r.head) continue;
        for (auto a : r.pos)
            if (component_of[a] == component_of[*r.head]) watchers[a].push_back(i);
    }

    Interpretation model(gp.universe_size());
    std::vector<std::uint32_t> missing(gp.rules().size(), UINT32_MAX);
    for (std::size_t c = 0; c < sccs.size(); ++c) {
        auto usable = [&](const GroundRule& r) {
            for (auto a : r.neg)
                if (model.contains(a)) return false;
            for (auto a : r.pos)
                if (component_of[a] != c && !model.contains(a)) return false;
            return true;
        };
        forward_chain(gp, model, rules_of[c], usable, watchers, missing);
    }
    return model;
}

bool lex_less(const GroundProgram& gp, const Interpretation& a, const Interpretation& b) {
    const auto sa = sorted_atoms(gp, a);
    const auto sb = sorted_atoms(gp, b);
    return std::lexicographical_compare(sa.begin(), sa.end(), sb.begin(), sb.end(), canonical_less);
}

}  // namespace

bool is_stratified(const GroundProgram& gp) {
    std::vector<std::uint32_t> component_of;
    dependency_sccs(gp, component_of);
    return stratified_given(gp, component_of);
}

std::vector<Interpretation> answer_sets_by_guessing(const GroundProgram& gp, std::size_t limit,
                                                    const SolveOptions& options) {
    if (limit == 0) throw Error(ErrorKind::InvalidArgument, "answer set limit must be at least 1");
    const auto negs = nant(gp);
    if (negs.size() > options.nant_bound)
        throw Error(ErrorKind::Limit, "program too hard for exact enumeration: " + std::to_string(negs.size()) +
                                          " negation atoms exceed the bound of " + std::to_string(options.nant_bound));
    std::vector<Interpretation> found;
    const std::uint64_t total = std::uint64_t{1} << negs.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        Interpretation guess(gp.universe_size());
        for (std::size_t k = 0; k < negs.size(); ++k)
            if (mask >> k & 1) guess.insert(negs[k]);
        Interpretation model = least_model(reduct(gp, guess));
        bool consistent = true;
        for (std::size_t k = 0; k < negs.size() && consistent; ++k)
            consistent = model.contains(negs[k]) == static_cast<bool>(mask >> k & 1);
        if (!consistent || !satisfies_constraints(gp, model)) continue;
        if (std::find(found.begin(), found.end(), model) == found.end()) found.push_back(std::move(model));
    }
    std::sort(found.begin(), found.end(), [&](const auto& a, const auto& b) { return lex_less(gp, a, b); });
    if (found.size() > limit) found.resize(limit);
    return found;
}

std::vector<Interpretation> answer_sets(const GroundProgram& gp, std::size_t limit, const SolveOptions& options) {
    if (limit == 0) throw Error(ErrorKind::InvalidArgument, "answer set limit must be at least 1");
    std::vector<std::uint32_t> component_of;
    const auto sccs = dependency_sccs(gp, component_of);
    if (!stratified_given(gp, component_of)) return answer_sets_by_guessing(gp, limit, options);
    Interpretation model = stratified_model(gp, sccs, component_of);
    if (!satisfies_constraints(gp, model)) return {};
    return {std::move(model)};
}

// ---------------------------------------------------------------------------
// Consequences and assumptions

Consequences cautious_consequences(const GroundProgram& gp, const SolveOptions& options) {
    const auto sets = answer_sets(gp, SIZE_MAX, options);
    const std::size_t n = gp.universe_size();
    Consequences out{Interpretation(n), Interpretation(n), sets.empty()};
    for (AtomId a = 0; a < n; ++a) {
        const bool in_all = std::all_of(sets.begin(), sets.end(), [&](const auto& s) { return s.contains(a); });
        const bool in_none = std::none_of(sets.begin(), sets.end(), [&](const auto& s) { return s.contains(a); });
        if (in_all) out.plus.insert(a);
        if (in_none) out.minus.insert(a);
    }
    return out;
}

bool is_assumption_set(const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u,
                       const SolveOptions& options) {
    std::vector<GroundRule> kept;
    for (const auto& r : gp.rules())
        if (!r.head || !std::binary_search(u.begin(), u.end(), *r.head)) kept.push_back(r);
    const auto sets = answer_sets(gp.with_rules(std::move(kept)), 2, options);
    return sets.size() == 1 && sets.front() == a;
}

std::vector<AssumptionSet> assumption_sets(const GroundProgram& gp, const Interpretation& a,
                                           const SolveOptions& options) {
    if (!is_answer_set(gp, a)) throw Error(ErrorKind::InvalidArgument, "interpretation is not an answer set");
    const auto cons = cautious_consequences(gp, options);
    std::vector<AtomId> candidates;
    for (AtomId x : nant(gp))
        if (!a.contains(x) && !cons.plus.contains(x) && !cons.minus.contains(x)) candidates.push_back(x);
    if (candidates.size() > options.nant_bound)
        throw Error(ErrorKind::Limit, "program too hard for exact enumeration: " + std::to_string(candidates.size()) +
                                          " assumption candidates exceed the bound of " +
                                          std::to_string(options.nant_bound));

    // Masks ordered by size, so any superset of a hit is seen after it.
    std::vector<std::uint64_t> masks(std::uint64_t{1} << candidates.size());
    std::iota(masks.begin(), masks.end(), 0u);
    std::stable_sort(masks.begin(), masks.end(),
                     [](std::uint64_t x, std::uint64_t y) { return std::popcount(x) < std::popcount(y); });
    std::vector<std::uint64_t> hits;
    for (auto mask : masks) {
        if (std::any_of(hits.begin(), hits.end(), [&](std::uint64_t h) { return (h & mask) == h; })) continue;
        AssumptionSet u;
        for (std::size_t k = 0; k < candidates.size(); ++k)
            if (mask >> k & 1) u.push_back(candidates[k]);
        if (is_assumption_set(gp, a, u, options)) hits.push_back(mask);
    }

    std::vector<AssumptionSet> out;
    for (auto mask : hits) {
        AssumptionSet u;
        for (std::size_t k = 0; k < candidates.size(); ++k)
            if (mask >> k & 1) u.push_back(candidates[k]);
        out.push_back(std::move(u));
    }
    std::sort(out.begin(), out.end(), [&](const AssumptionSet& x, const AssumptionSet& y) {
        if (x.size() != y.size()) return x.size() < y.size();
        const auto sx = sorted_atoms(gp, x);
        const auto sy = sorted_atoms(gp, y);
        return std::lexicographical_compare(sx.begin(), sx.end(), sy.begin(), sy.end(), canonical_less);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::vector<GroundAtom> sorted_atoms(const GroundProgram& gp, std::span<const AtomId> ids) {
    std::vector<GroundAtom> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(gp.atom(id));
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
}

std::vector<GroundAtom> sorted_atoms(const GroundProgram& gp, const Interpretation& i) {
    const auto ids = i.atoms();
    return sorted_atoms(gp, std::span<const AtomId>(ids));
}

std::string answer_set_text(const GroundProgram& gp, const Interpretation& i) {
    std::string out;
    for (const auto& a : sorted_atoms(gp, i)) {
        out += a.to_string();
        out += '\n';
    }
    return out;
}

std::string answer_set_json(const GroundProgram& gp, const Interpretation& i) {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["atoms"] = nlohmann::json::array();
    for (const auto& a : sorted_atoms(gp, i)) doc["atoms"].push_back(a.to_string());
    return doc.dump();
}

}  // namespace nppx
