#pragma once

// Explanation graphs (off-line justifications): generation, validation and
// rendering.

#include "nppx/engine.hpp"

#include <compare>
#include <optional>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nppx {

/// Comparison nodes are an extension: they stand for an evaluated comparison
/// literal of the supporting rule, such as `20<30`, and always link to Top.
enum class NodeKind : std::uint8_t { Positive, Negative, Top, Bottom, Assume, Comparison };
enum class EdgeLabel : std::uint8_t { Plus, Minus, Circle };

const char* to_string(NodeKind kind);
const char* to_string(EdgeLabel label);

struct ExplanationNode {
    NodeKind kind = NodeKind::Top;
    std::string atom;  // atom text, comparison text, or empty for sinks

    static ExplanationNode positive(std::string atom) { return {NodeKind::Positive, std::move(atom)}; }
    static ExplanationNode negative(std::string atom) { return {NodeKind::Negative, std::move(atom)}; }
    static ExplanationNode top() { return {NodeKind::Top, {}}; }
    static ExplanationNode bottom() { return {NodeKind::Bottom, {}}; }
    static ExplanationNode assume() { return {NodeKind::Assume, {}}; }
    static ExplanationNode comparison(std::string text) { return {NodeKind::Comparison, std::move(text)}; }

    bool is_sink() const { return kind == NodeKind::Top || kind == NodeKind::Bottom || kind == NodeKind::Assume; }
    /// `p(a)`, `~p(a)`, `⊤`, `⊥`, `assume` or the comparison text.
    std::string display() const;

    auto operator<=>(const ExplanationNode&) const = default;
};

struct ExplanationEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    EdgeLabel label = EdgeLabel::Plus;

    auto operator<=>(const ExplanationEdge&) const = default;
};

struct ExplanationGraph {
    std::size_t root = 0;
    std::vector<ExplanationNode> nodes;
    std::vector<ExplanationEdge> edges;

    /// Index of `node`, adding it when absent.
    std::size_t add_node(const ExplanationNode& node);
    std::optional<std::size_t> find(const ExplanationNode& node) const;
    void add_edge(const ExplanationNode& from, const ExplanationNode& to, EdgeLabel label);

    /// Sorts nodes and edges; structurally equal graphs become identical.
    void canonicalize();

    bool operator==(const ExplanationGraph&) const = default;
};

/// Canonical graph order: node count, edge count, then serialized form.
bool canonical_less(const ExplanationGraph& a, const ExplanationGraph& b);

struct GraphSet {
    std::vector<ExplanationGraph> graphs;
    bool truncated = false;
};

struct ExplainOptions {
    std::size_t max_graphs = 32;
};

/// All explanation graphs of `atom` with respect to answer set `a` and
/// assumption set `u`, up to max_graphs (truncation is flagged).
GraphSet explanation_graphs(const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u, AtomId atom,
                            const ExplainOptions& options = {});

/// Convenience: picks the first assumption set of `a` and explains `atom_text`.
GraphSet explain_atom(const GroundProgram& gp, const Interpretation& a, std::string_view atom_text,
                      const ExplainOptions& options = {});

/// Validates the answer set and assumption set once, then explains any number
/// of atoms. Holds references: `gp` and `a` must outlive it.
class Explainer {
public:
    Explainer(const GroundProgram& gp, const Interpretation& a, AssumptionSet u);
    /// Uses the first assumption set of `a`.
    Explainer(const GroundProgram& gp, const Interpretation& a);

    GraphSet explain(AtomId atom, const ExplainOptions& options = {}) const;
    /// NotFound when the atom does not occur in the program.
    GraphSet explain(std::string_view atom_text, const ExplainOptions& options = {}) const;
    const AssumptionSet& assumptions() const { return u_; }

private:
    const GroundProgram& gp_;
    const Interpretation& a_;
    AssumptionSet u_;
};

/// Checks the out-edges of one node (local conditions only).
std::vector<std::string> validate_support(const ExplanationNode& node,
                                          std::span<const std::pair<ExplanationNode, EdgeLabel>> out_edges,
                                          const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u);

/// Full check of every condition; empty result means valid.
std::vector<std::string> validate_graph(const ExplanationGraph& g, const GroundProgram& gp, const Interpretation& a,
                                        const AssumptionSet& u);

struct DotOptions {
    /// Leave out the edges from facts and comparisons to ⊤ (and ⊤ itself if
    /// nothing else points at it).
    bool elide_top_edges = true;
};

std::string to_dot(const ExplanationGraph& g, const DotOptions& options = {});

/// {"format_version":1,"root":i,"nodes":[{"id","kind","atom"}],"edges":[{"from","to","label"}]}
std::string to_json(const ExplanationGraph& g);
ExplanationGraph graph_from_json(std::string_view text);

/// Edge-isomorphism on labeled graphs whose atom nodes carry unique texts.
bool same_structure(const ExplanationGraph& a, const ExplanationGraph& b);

}  // namespace nppx
