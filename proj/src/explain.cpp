#include "nppx/explain.hpp"
#include "nppx/error.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "json.hpp"

namespace nppx {

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Positive: return "positive";
        case NodeKind::Negative: return "negative";
        case NodeKind::Top: return "top";
        case NodeKind::Bottom: return "bottom";
        case NodeKind::Assume: return "assume";
        case NodeKind::Comparison: return "comparison";
    }
    return "?";
}

const char* to_string(EdgeLabel label) {
    switch (label) {
        case EdgeLabel::Plus: return "+";
        case EdgeLabel::Minus: return "-";
        case EdgeLabel::Circle: return "o";
    }
    return "?";
}

std::string ExplanationNode::display() const {
    switch (kind) {
        case NodeKind::Positive:
        case NodeKind::Comparison: return atom;
        case NodeKind::Negative: return "~" + atom;
        case NodeKind::Top: return "⊤";
        case NodeKind::Bottom: return "⊥";
        case NodeKind::Assume: return "assume";
    }
    return {};
}

std::optional<std::size_t> ExplanationGraph::find(const ExplanationNode& node) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i] == node) return i;
    return std::nullopt;
}

std::size_t ExplanationGraph::add_node(const ExplanationNode& node) {
    if (auto i = find(node)) return *i;
    nodes.push_back(node);
    return nodes.size() - 1;
}

void ExplanationGraph::add_edge(const ExplanationNode& from, const ExplanationNode& to, EdgeLabel label) {
    const auto f = add_node(from);
    const auto t = add_node(to);
    edges.push_back({f, t, label});
}

void ExplanationGraph::canonicalize() {
    std::vector<std::size_t> order(nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return nodes[x] < nodes[y]; });
    std::vector<std::size_t> new_index(nodes.size());
    std::vector<ExplanationNode> sorted;
    sorted.reserve(nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        new_index[order[i]] = i;
        sorted.push_back(std::move(nodes[order[i]]));
    }
    nodes = std::move(sorted);
    for (auto& e : edges) {
        e.from = new_index[e.from];
        e.to = new_index[e.to];
    }
    if (root < new_index.size()) root = new_index[root];
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

bool canonical_less(const ExplanationGraph& a, const ExplanationGraph& b) {
    if (a.nodes.size() != b.nodes.size()) return a.nodes.size() < b.nodes.size();
    if (a.edges.size() != b.edges.size()) return a.edges.size() < b.edges.size();
    return to_json(a) < to_json(b);
}

bool same_structure(const ExplanationGraph& a, const ExplanationGraph& b) {
    ExplanationGraph x = a, y = b;
    x.canonicalize();
    y.canonicalize();
    return x == y;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

constexpr AtomId kNoAtom = UINT32_MAX;

struct Target {
    ExplanationNode node;
    AtomId atom = kNoAtom;
    EdgeLabel label = EdgeLabel::Plus;

    bool operator<(const Target& o) const {
        return std::tie(node, label) < std::tie(o.node, o.label);
    }
    bool operator==(const Target& o) const { return node == o.node && label == o.label; }
};

using Support = std::vector<Target>;  // sorted

// A literal that falsifies a rule body under the answer set.
struct Refuter {
    AtomId atom;
    bool positive_body;  // true: b in r+ with b false; false: c in r- with c true

    auto operator<=>(const Refuter&) const = default;
};

class Generator {
public:
    Generator(const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u, std::size_t max_graphs)
        : gp_(gp), a_(a), u_(u), max_(max_graphs) {}

    GraphSet run(AtomId root) {
        const bool truth = a_.contains(root);
        add(atom_node(root, truth), root);
        graph_.root = 0;
        step();
        GraphSet out;
        out.truncated = truncated_;
        out.graphs = std::move(found_);
        std::sort(out.graphs.begin(), out.graphs.end(), [](const ExplanationGraph& x, const ExplanationGraph& y) { return canonical_less(x, y); });
        if (out.graphs.size() > max_) out.graphs.resize(max_);
        return out;
    }

private:
    ExplanationNode atom_node(AtomId atom, bool truth) const {
        return truth ? ExplanationNode::positive(gp_.atom_string(atom)) : ExplanationNode::negative(gp_.atom_string(atom));
    }

    std::size_t add(const ExplanationNode& node, AtomId atom) {
        if (auto i = graph_.find(node)) return *i;
        graph_.nodes.push_back(node);
        atom_of_.push_back(atom);
        expanded_.push_back(node.is_sink());
        return graph_.nodes.size() - 1;
    }

    Target to_target(AtomId atom, EdgeLabel label) const { return {atom_node(atom, a_.contains(atom)), atom, label}; }

    std::vector<Support> positive_options(AtomId x) const {
        if (gp_.is_fact(x)) return {{Target{ExplanationNode::top(), kNoAtom, EdgeLabel::Plus}}};
        std::set<Support> options;
        for (auto idx : gp_.rules_for_head(x)) {
            const GroundRule& r = gp_.rules()[idx];
            const bool satisfied = std::all_of(r.pos.begin(), r.pos.end(), [&](AtomId b) { return a_.contains(b); }) &&
                                   std::none_of(r.neg.begin(), r.neg.end(), [&](AtomId c) { return a_.contains(c); });
            if (!satisfied) continue;
            Support s;
            for (auto b : r.pos) s.push_back(to_target(b, EdgeLabel::Plus));
            for (auto c : r.neg) s.push_back(to_target(c, EdgeLabel::Minus));
            for (const auto& cmp : r.comparisons)
                s.push_back({ExplanationNode::comparison(cmp), kNoAtom, EdgeLabel::Plus});
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
            options.insert(std::move(s));
        }
        return {options.begin(), options.end()};
    }

    std::vector<Support> negative_options(AtomId x) const {
        if (std::binary_search(u_.begin(), u_.end(), x))
            return {{Target{ExplanationNode::assume(), kNoAtom, EdgeLabel::Circle}}};
        const auto& rules = gp_.rules_for_head(x);
        if (rules.empty()) return {{Target{ExplanationNode::bottom(), kNoAtom, EdgeLabel::Plus}}};

        std::vector<std::vector<Refuter>> refuters;
        for (auto idx : rules) {
            const GroundRule& r = gp_.rules()[idx];
            std::vector<Refuter> rs;
            for (auto b : r.pos)
                if (!a_.contains(b)) rs.push_back({b, true});
            for (auto c : r.neg)
                if (a_.contains(c)) rs.push_back({c, false});
            if (rs.empty()) return {};  // body holds: x cannot be refuted
            refuters.push_back(std::move(rs));
        }

        std::set<std::vector<Refuter>> sets;
        std::vector<Refuter> chosen;
        hitting_sets(refuters, 0, chosen, sets);

        std::vector<Support> out;
        for (const auto& set : sets) {
            Support s;
            for (const auto& ref : set) s.push_back(to_target(ref.atom, ref.positive_body ? EdgeLabel::Plus : EdgeLabel::Minus));
            std::sort(s.begin(), s.end());
            out.push_back(std::move(s));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    // Minimal hitting sets of the refuter lists.
    static void hitting_sets(const std::vector<std::vector<Refuter>>& lists, std::size_t i, std::vector<Refuter>& chosen,
                             std::set<std::vector<Refuter>>& out) {
        auto hits = [](const std::vector<Refuter>& list, const Refuter& r) {
            return std::find(list.begin(), list.end(), r) != list.end();
        };
        if (i == lists.size()) {
            for (const auto& c : chosen) {
                bool needed = false;
                for (const auto& list : lists) {
                    if (!hits(list, c)) continue;
                    const bool other = std::any_of(chosen.begin(), chosen.end(),
                                                   [&](const Refuter& d) { return !(d == c) && hits(list, d); });
                    if (!other) {
                        needed = true;
                        break;
                    }
                }
                if (!needed) return;
            }
            std::vector<Refuter> sorted = chosen;
            std::sort(sorted.begin(), sorted.end());
            out.insert(std::move(sorted));
            return;
        }
        if (std::any_of(chosen.begin(), chosen.end(), [&](const Refuter& c) { return hits(lists[i], c); })) {
            hitting_sets(lists, i + 1, chosen, out);
            return;
        }
        for (const auto& r : lists[i]) {
            chosen.push_back(r);
            hitting_sets(lists, i + 1, chosen, out);
            chosen.pop_back();
        }
    }

    std::vector<Support> options_for(std::size_t v) const {
        const auto& node = graph_.nodes[v];
        switch (node.kind) {
            case NodeKind::Positive: return positive_options(atom_of_[v]);
            case NodeKind::Negative: return negative_options(atom_of_[v]);
            case NodeKind::Comparison: return {{Target{ExplanationNode::top(), kNoAtom, EdgeLabel::Plus}}};
            default: return {{}};
        }
    }

    // Is some positive node on a cycle? Graphs here are small.
    bool positive_cycle() const {
        const std::size_t n = graph_.nodes.size();
        std::vector<std::vector<std::size_t>> succ(n);
        for (const auto& e : graph_.edges) succ[e.from].push_back(e.to);
        for (std::size_t p = 0; p < n; ++p) {
            if (graph_.nodes[p].kind != NodeKind::Positive) continue;
            std::vector<bool> seen(n, false);
            std::vector<std::size_t> stack(succ[p].begin(), succ[p].end());
            while (!stack.empty()) {
                const auto v = stack.back();
                stack.pop_back();
                if (v == p) return true;
                if (seen[v]) continue;
                seen[v] = true;
                for (auto w : succ[v]) stack.push_back(w);
            }
        }
        return false;
    }

    void step() {
        if (done_) return;
        std::size_t v = 0;
        while (v < expanded_.size() && expanded_[v]) ++v;
        if (v == expanded_.size()) {
            record();
            return;
        }
        const auto options = options_for(v);
        expanded_[v] = true;
        for (const auto& option : options) {
            const std::size_t nodes = graph_.nodes.size();
            const std::size_t edges = graph_.edges.size();
            for (const auto& t : option) {
                const std::size_t to = add(t.node, t.atom);
                graph_.edges.push_back({v, to, t.label});
            }
            if (!positive_cycle()) step();
            graph_.nodes.resize(nodes);
            graph_.edges.resize(edges);
            atom_of_.resize(nodes);
            expanded_.resize(nodes);
            if (done_) break;
        }
        expanded_[v] = false;
    }

    void record() {
        ExplanationGraph g = graph_;
        g.canonicalize();
        if (!seen_.insert(to_json(g)).second) return;
        found_.push_back(std::move(g));
        if (found_.size() > max_) {
            truncated_ = true;
            done_ = true;
        }
    }

    const GroundProgram& gp_;
    const Interpretation& a_;
    const AssumptionSet& u_;
    std::size_t max_;
    ExplanationGraph graph_;
    std::vector<AtomId> atom_of_;
    std::vector<bool> expanded_;
    std::vector<ExplanationGraph> found_;
    std::set<std::string> seen_;
    bool truncated_ = false;
    bool done_ = false;
};

}  // namespace

namespace {

void check_inputs(const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u) {
    if (!std::is_sorted(u.begin(), u.end())) throw Error(ErrorKind::InvalidArgument, "assumption set must be sorted");
    const auto negs = nant(gp);
    for (auto x : u)
        if (a.contains(x) || !std::binary_search(negs.begin(), negs.end(), x))
            throw Error(ErrorKind::InvalidArgument, "invalid assumption set: " + gp.atom_string(x));
    if (!is_answer_set(gp, a)) throw Error(ErrorKind::InvalidArgument, "interpretation is not an answer set");
    if (!is_assumption_set(gp, a, u)) throw Error(ErrorKind::InvalidArgument, "invalid assumption set");
}

GraphSet generate(const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u, AtomId atom,
                  const ExplainOptions& options) {
    if (atom >= gp.universe_size()) throw Error(ErrorKind::NotFound, "atom does not occur in the program");
    if (options.max_graphs == 0) throw Error(ErrorKind::InvalidArgument, "max_graphs must be at least 1");
    return Generator(gp, a, u, options.max_graphs).run(atom);
}

AssumptionSet first_assumption_set(const GroundProgram& gp, const Interpretation& a) {
    if (!is_answer_set(gp, a)) throw Error(ErrorKind::InvalidArgument, "interpretation is not an answer set");
    auto us = assumption_sets(gp, a);
    if (us.empty()) throw Error(ErrorKind::Internal, "no assumption set for the answer set");
    return std::move(us.front());
}

}  // namespace

GraphSet explanation_graphs(const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u, AtomId atom,
                            const ExplainOptions& options) {
    if (atom >= gp.universe_size()) throw Error(ErrorKind::NotFound, "atom does not occur in the program");
    check_inputs(gp, a, u);
    return generate(gp, a, u, atom, options);
}

GraphSet explain_atom(const GroundProgram& gp, const Interpretation& a, std::string_view atom_text,
                      const ExplainOptions& options) {
    return Explainer(gp, a).explain(atom_text, options);
}

Explainer::Explainer(const GroundProgram& gp, const Interpretation& a, AssumptionSet u)
    : gp_(gp), a_(a), u_(std::move(u)) {
    check_inputs(gp_, a_, u_);
}

Explainer::Explainer(const GroundProgram& gp, const Interpretation& a)
    : gp_(gp), a_(a), u_(first_assumption_set(gp, a)) {}

GraphSet Explainer::explain(AtomId atom, const ExplainOptions& options) const {
    return generate(gp_, a_, u_, atom, options);
}

GraphSet Explainer::explain(std::string_view atom_text, const ExplainOptions& options) const {
    const auto id = gp_.find(atom_text);
    if (!id) throw Error(ErrorKind::NotFound, "atom does not occur in the program: " + std::string(atom_text));
    return explain(*id, options);
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::optional<AtomId> resolve(const GroundProgram& gp, const std::string& text) {
    try {
        return gp.find(text);
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::string edge_text(const ExplanationNode& from, const ExplanationNode& to, EdgeLabel label) {
    return "(" + from.display() + ", " + to.display() + ", " + to_string(label) + ")";
}

}  // namespace

std::vector<std::string> validate_support(const ExplanationNode& node,
                                          std::span<const std::pair<ExplanationNode, EdgeLabel>> out,
                                          const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u) {
    std::vector<std::string> v;
    const std::string name = node.display();

    if (node.is_sink()) {
        if (!out.empty()) v.push_back("no edge may leave " + name);
        return v;
    }
    if (node.kind == NodeKind::Comparison) {
        if (out.size() != 1 || out[0].first.kind != NodeKind::Top || out[0].second != EdgeLabel::Plus)
            v.push_back("comparison " + name + " must link only to ⊤ with +");
        return v;
    }

    const auto id = resolve(gp, node.atom);
    if (!id) {
        v.push_back("atom " + node.atom + " does not occur in the program");
        return v;
    }
    const bool truth = a.contains(*id);
    if (node.kind == NodeKind::Positive && !truth) v.push_back(name + " is not in the answer set");
    if (node.kind == NodeKind::Negative && truth) v.push_back(node.atom + " is in the answer set but appears as " + name);

    // Targets must be consistent with the answer set.
    std::vector<AtomId> target_ids(out.size(), UINT32_MAX);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& t = out[i].first;
        if (t.kind != NodeKind::Positive && t.kind != NodeKind::Negative) continue;
        const auto tid = resolve(gp, t.atom);
        if (!tid) {
            v.push_back("atom " + t.atom + " does not occur in the program");
            continue;
        }
        target_ids[i] = *tid;
        if ((t.kind == NodeKind::Positive) != a.contains(*tid))
            v.push_back("node " + t.display() + " disagrees with the answer set");
    }
    if (!v.empty()) return v;

    if (node.kind == NodeKind::Positive) {
        if (gp.is_fact(*id)) {
            if (out.size() != 1 || out[0].first.kind != NodeKind::Top || out[0].second != EdgeLabel::Plus)
                v.push_back("fact " + name + " must link to ⊤ with +");
            return v;
        }
        std::vector<AtomId> xplus, xminus;
        std::vector<std::string> comparisons;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& [t, label] = out[i];
            switch (t.kind) {
                case NodeKind::Positive:
                    if (label != EdgeLabel::Plus) v.push_back("true atom " + name + " links to true atom with " + to_string(label) + ": " + edge_text(node, t, label));
                    else xplus.push_back(target_ids[i]);
                    break;
                case NodeKind::Negative:
                    if (label != EdgeLabel::Minus) v.push_back("true atom " + name + " links to a negated atom with " + to_string(label) + ": " + edge_text(node, t, label));
                    else xminus.push_back(target_ids[i]);
                    break;
                case NodeKind::Comparison:
                    if (label != EdgeLabel::Plus) v.push_back("comparison edge must be +: " + edge_text(node, t, label));
                    else comparisons.push_back(t.atom);
                    break;
                case NodeKind::Top: v.push_back(name + " is not a fact but links to ⊤"); break;
                case NodeKind::Bottom: v.push_back("only negated atoms may link to ⊥: " + edge_text(node, t, label)); break;
                case NodeKind::Assume: v.push_back("only negated atoms may link to assume: " + edge_text(node, t, label)); break;
            }
        }
        if (!v.empty()) return v;
        auto norm = [](auto& x) {
            std::sort(x.begin(), x.end());
            x.erase(std::unique(x.begin(), x.end()), x.end());
        };
        norm(xplus);
        norm(xminus);
        norm(comparisons);
        bool matched = false;
        for (auto idx : gp.rules_for_head(*id)) {
            const GroundRule& r = gp.rules()[idx];
            auto cmps = r.comparisons;
            norm(cmps);
            if (r.pos == xplus && r.neg == xminus && cmps == comparisons) {
                matched = true;
                break;
            }
        }
        if (!matched) v.push_back("support of " + name + " matches no rule whose head is " + node.atom);
        return v;
    }

    // Negated atom.
    const bool assumed = std::binary_search(u.begin(), u.end(), *id);
    if (assumed) {
        if (out.size() != 1 || out[0].first.kind != NodeKind::Assume || out[0].second != EdgeLabel::Circle)
            v.push_back("assumed atom " + name + " must link only to assume with o");
        return v;
    }
    const auto& rules = gp.rules_for_head(*id);
    if (rules.empty()) {
        if (out.size() != 1 || out[0].first.kind != NodeKind::Bottom || out[0].second != EdgeLabel::Plus)
            v.push_back(name + " has no rule and must link to ⊥ with +");
        return v;
    }
    std::vector<AtomId> xplus, xminus;  // true atoms via -, false atoms via +
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& [t, label] = out[i];
        switch (t.kind) {
            case NodeKind::Positive:
                if (label != EdgeLabel::Minus) v.push_back(name + " links to a true atom with " + to_string(label) + ": " + edge_text(node, t, label));
                else xplus.push_back(target_ids[i]);
                break;
            case NodeKind::Negative:
                if (label != EdgeLabel::Plus) v.push_back(name + " links to a negated atom with " + to_string(label) + ": " + edge_text(node, t, label));
                else xminus.push_back(target_ids[i]);
                break;
            case NodeKind::Bottom: v.push_back(name + " links to ⊥ but " + node.atom + " has a rule"); break;
            case NodeKind::Assume: v.push_back(name + " links to assume but " + node.atom + " is not an assumption"); break;
            case NodeKind::Top: v.push_back("only facts may link to ⊤: " + edge_text(node, t, label)); break;
            case NodeKind::Comparison: v.push_back("negated atoms do not link to comparisons: " + edge_text(node, t, label)); break;
        }
    }
    if (!v.empty()) return v;

    auto refutes = [&](const GroundRule& r, AtomId atom, bool via_positive_body) {
        return via_positive_body ? std::binary_search(r.pos.begin(), r.pos.end(), atom)
                                 : std::binary_search(r.neg.begin(), r.neg.end(), atom);
    };
    struct Lit {
        AtomId atom;
        bool via_positive_body;
    };
    std::vector<Lit> lits;
    for (auto x : xminus) lits.push_back({x, true});
    for (auto x : xplus) lits.push_back({x, false});
    for (auto idx : rules) {
        const GroundRule& r = gp.rules()[idx];
        if (std::none_of(lits.begin(), lits.end(), [&](const Lit& l) { return refutes(r, l.atom, l.via_positive_body); })) {
            std::string body;
            for (auto b : r.pos) body += (body.empty() ? "" : ", ") + gp.atom_string(b);
            for (auto c : r.neg) body += (body.empty() ? "not " : ", not ") + gp.atom_string(c);
            v.push_back("rule " + node.atom + " :- " + body + " is not refuted by the support of " + name);
        }
    }
    if (!v.empty()) return v;
    // Every literal must be the only refuter of some rule.
    for (std::size_t i = 0; i < lits.size(); ++i) {
        bool needed = false;
        for (auto idx : rules) {
            const GroundRule& r = gp.rules()[idx];
            if (!refutes(r, lits[i].atom, lits[i].via_positive_body)) continue;
            bool other = false;
            for (std::size_t j = 0; j < lits.size() && !other; ++j)
                other = j != i && refutes(r, lits[j].atom, lits[j].via_positive_body);
            if (!other) {
                needed = true;
                break;
            }
        }
        if (!needed) {
            v.push_back("support of " + name + " is not minimal: " + gp.atom_string(lits[i].atom) + " is redundant");
        }
    }
    return v;
}

std::vector<std::string> validate_graph(const ExplanationGraph& g, const GroundProgram& gp, const Interpretation& a,
                                        const AssumptionSet& u) {
    std::vector<std::string> v;
    const std::size_t n = g.nodes.size();
    if (g.root >= n) return {"root is not a node of the graph"};
    for (const auto& e : g.edges)
        if (e.from >= n || e.to >= n) return {"edge endpoint out of range"};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (g.nodes[i] == g.nodes[j]) v.push_back("duplicate node " + g.nodes[i].display());

    const auto& root = g.nodes[g.root];
    if (root.kind != NodeKind::Positive && root.kind != NodeKind::Negative) {
        v.push_back("root must be an atom node");
    } else if (auto id = resolve(gp, root.atom); !id) {
        v.push_back("root atom " + root.atom + " does not occur in the program");
    } else if (a.contains(*id) != (root.kind == NodeKind::Positive)) {
        v.push_back(a.contains(*id) ? "root " + root.atom + " is true and must appear as " + root.atom
                                    : "root " + root.atom + " is false and must appear as ~" + root.atom);
    }

    std::vector<std::vector<std::size_t>> succ(n);
    std::vector<std::vector<std::pair<ExplanationNode, EdgeLabel>>> out(n);
    for (const auto& e : g.edges) {
        succ[e.from].push_back(e.to);
        out[e.from].push_back({g.nodes[e.to], e.label});
    }

    std::vector<bool> reached(n, false);
    std::vector<std::size_t> stack{g.root};
    while (!stack.empty()) {
        const auto x = stack.back();
        stack.pop_back();
        if (reached[x]) continue;
        reached[x] = true;
        for (auto y : succ[x]) stack.push_back(y);
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!reached[i]) v.push_back(g.nodes[i].display() + " is not reachable from the root");

    for (std::size_t i = 0; i < n; ++i) {
        auto local = validate_support(g.nodes[i], out[i], gp, a, u);
        v.insert(v.end(), local.begin(), local.end());
    }

    // Cycles: strongly connected components by mutual reachability.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::size_t> st(succ[s].begin(), succ[s].end());
        while (!st.empty()) {
            const auto x = st.back();
            st.pop_back();
            if (reach[s][x]) continue;
            reach[s][x] = true;
            for (auto y : succ[x]) st.push_back(y);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!reach[i][i]) continue;
        if (g.nodes[i].kind == NodeKind::Positive) {
            v.push_back("cycle through true atom " + g.nodes[i].display());
        } else if (g.nodes[i].kind == NodeKind::Negative) {
            for (std::size_t j = 0; j < n; ++j)
                if (reach[i][j] && reach[j][i] && g.nodes[j].kind != NodeKind::Negative) {
                    v.push_back("cycle through " + g.nodes[i].display() + " passes " + g.nodes[j].display());
                    break;
                }
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

std::string to_dot(const ExplanationGraph& input, const DotOptions& options) {
    ExplanationGraph g = input;
    g.canonicalize();
    const std::size_t n = g.nodes.size();

    std::vector<bool> leaf_to_top(n, false);  // facts and comparisons
    for (std::size_t i = 0; i < n; ++i) {
        bool only_top = false;
        std::size_t count = 0;
        for (const auto& e : g.edges)
            if (e.from == i) {
                ++count;
                only_top = g.nodes[e.to].kind == NodeKind::Top && e.label == EdgeLabel::Plus;
            }
        leaf_to_top[i] = count == 1 && only_top;
    }

    std::vector<bool> drawn_edge(g.edges.size(), true);
    std::vector<bool> drawn_node(n, true);
    if (options.elide_top_edges) {
        for (std::size_t k = 0; k < g.edges.size(); ++k)
            if (g.nodes[g.edges[k].to].kind == NodeKind::Top && leaf_to_top[g.edges[k].from]) drawn_edge[k] = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (g.nodes[i].kind != NodeKind::Top) continue;
            bool used = false;
            for (std::size_t k = 0; k < g.edges.size(); ++k) used |= drawn_edge[k] && g.edges[k].to == i;
            drawn_node[i] = used || i == g.root;
        }
    }

    std::string out = "// format_version 1\ndigraph explanation {\n  rankdir=TB;\n  node [fontname=\"Helvetica\"];\n";
    for (std::size_t i = 0; i < n; ++i) {
        if (!drawn_node[i]) continue;
        const auto& node = g.nodes[i];
        std::string attrs;
        switch (node.kind) {
            case NodeKind::Positive:
            case NodeKind::Negative:
                attrs = leaf_to_top[i] ? "shape=box, style=dashed" : "shape=box, style=solid";
                break;
            case NodeKind::Comparison: attrs = "shape=ellipse, style=dashed"; break;
            case NodeKind::Top:
            case NodeKind::Bottom: attrs = "shape=doublecircle"; break;
            case NodeKind::Assume: attrs = "shape=diamond"; break;
        }
        if (i == g.root) attrs += ", penwidth=2";
        out += "  n" + std::to_string(i) + " [label=\"" + dot_escape(node.display()) + "\", " + attrs + "];\n";
    }
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        if (!drawn_edge[k]) continue;
        const auto& e = g.edges[k];
        const char* style = e.label == EdgeLabel::Plus ? "solid" : e.label == EdgeLabel::Minus ? "dashed" : "dotted";
        out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [style=" + style + ", label=\"" +
               to_string(e.label) + "\"];\n";
    }
    out += "}\n";
    return out;
}

std::string to_json(const ExplanationGraph& g) {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["root"] = g.root;
    auto& nodes = doc["nodes"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        nlohmann::ordered_json node;
        node["id"] = i;
        node["kind"] = to_string(g.nodes[i].kind);
        node["atom"] = g.nodes[i].is_sink() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(g.nodes[i].atom);
        nodes.push_back(std::move(node));
    }
    auto& edges = doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) {
        nlohmann::ordered_json edge;
        edge["from"] = e.from;
        edge["to"] = e.to;
        edge["label"] = to_string(e.label);
        edges.push_back(std::move(edge));
    }
    return doc.dump();
}

ExplanationGraph graph_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed graph document: ") + e.what());
    }
    auto bad = [](const std::string& why) { return Error(ErrorKind::InvalidArgument, "malformed graph document: " + why); };
    try {
        if (doc.value("format_version", 0) != 1) throw bad("unsupported format_version");
        ExplanationGraph g;
        static const std::map<std::string, NodeKind> kinds{
            {"positive", NodeKind::Positive}, {"negative", NodeKind::Negative}, {"top", NodeKind::Top},
            {"bottom", NodeKind::Bottom},     {"assume", NodeKind::Assume},     {"comparison", NodeKind::Comparison}};
        static const std::map<std::string, EdgeLabel> labels{
            {"+", EdgeLabel::Plus}, {"-", EdgeLabel::Minus}, {"o", EdgeLabel::Circle}};
        const auto& nodes = doc.at("nodes");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& node = nodes[i];
            if (node.at("id").get<std::size_t>() != i) throw bad("node ids must be 0..n-1 in order");
            auto kind = kinds.find(node.at("kind").get<std::string>());
            if (kind == kinds.end()) throw bad("unknown node kind");
            ExplanationNode x{kind->second, {}};
            if (!x.is_sink()) x.atom = node.at("atom").get<std::string>();
            if (g.find(x)) throw bad("duplicate node " + x.display());
            g.nodes.push_back(std::move(x));
        }
        g.root = doc.at("root").get<std::size_t>();
        if (g.root >= g.nodes.size()) throw bad("root out of range");
        for (const auto& edge : doc.at("edges")) {
            ExplanationEdge e;
            e.from = edge.at("from").get<std::size_t>();
            e.to = edge.at("to").get<std::size_t>();
            auto label = labels.find(edge.at("label").get<std::string>());
            if (label == labels.end()) throw bad("unknown edge label");
            e.label = label->second;
            if (e.from >= g.nodes.size() || e.to >= g.nodes.size()) throw bad("edge endpoint out of range");
            g.edges.push_back(e);
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw bad(e.what());
    }
}

}  // namespace nppx
