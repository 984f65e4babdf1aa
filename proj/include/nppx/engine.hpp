#pragma once

// Grounding and answer-set computation.

#include "nppx/rulelang.hpp"
#include "nppx/symbol.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nppx {

struct GroundAtom {
    Symbol predicate;
    std::vector<Value> args;

    std::string to_string() const;

    bool operator==(const GroundAtom&) const = default;
};

/// Canonical order: predicate name, arity, then arguments in Value order.
std::strong_ordering canonical_compare(const GroundAtom& a, const GroundAtom& b);
inline bool canonical_less(const GroundAtom& a, const GroundAtom& b) { return canonical_compare(a, b) < 0; }

/// Parses text such as `pump_flow(condensate_pump_a,100,0)`.
GroundAtom parse_ground_atom(std::string_view text);

struct GroundAtomHash {
    std::size_t operator()(const GroundAtom& a) const noexcept;
};

using AtomId = std::uint32_t;

/// Interned ground atoms of one program. Ids are dense and assigned in
/// grounding order.
class AtomTable {
public:
    AtomId intern(const GroundAtom& atom);
    std::optional<AtomId> find(const GroundAtom& atom) const;
    const GroundAtom& operator[](AtomId id) const { return atoms_[id]; }
    std::size_t size() const { return atoms_.size(); }

private:
    std::vector<GroundAtom> atoms_;
    std::unordered_map<GroundAtom, AtomId, GroundAtomHash> ids_;
};

struct GroundRule {
    std::optional<AtomId> head;  // empty for constraints
    std::vector<AtomId> pos;     // sorted, unique
    std::vector<AtomId> neg;     // sorted, unique
    /// Index of the non-ground rule this instance came from (or SIZE_MAX).
    std::size_t source = SIZE_MAX;
    /// Comparison literals after substitution, e.g. "20<30". They are already
    /// true; explanation graphs show them as leaves.
    std::vector<std::string> comparisons;

    bool is_fact() const { return head && pos.empty() && neg.empty(); }
};

class GroundProgram {
public:
    GroundProgram() : atoms_(std::make_shared<AtomTable>()) {}
    GroundProgram(std::shared_ptr<const AtomTable> atoms, std::vector<GroundRule> rules);

    const AtomTable& atoms() const { return *atoms_; }
    std::shared_ptr<const AtomTable> atom_table() const { return atoms_; }
    const std::vector<GroundRule>& rules() const { return rules_; }
    std::size_t universe_size() const { return atoms_->size(); }

    /// Indices of the rules whose head is `atom`.
    const std::vector<std::uint32_t>& rules_for_head(AtomId atom) const { return by_head_[atom]; }
    bool is_fact(AtomId atom) const;

    std::optional<AtomId> find(const GroundAtom& atom) const { return atoms_->find(atom); }
    std::optional<AtomId> find(std::string_view atom_text) const;
    const GroundAtom& atom(AtomId id) const { return (*atoms_)[id]; }
    std::string atom_string(AtomId id) const { return atom(id).to_string(); }

    /// Same atom table, different rule set.
    GroundProgram with_rules(std::vector<GroundRule> rules) const { return GroundProgram(atoms_, std::move(rules)); }

private:
    std::shared_ptr<const AtomTable> atoms_;
    std::vector<GroundRule> rules_;
    std::vector<std::vector<std::uint32_t>> by_head_;
};

/// Builds a program directly from id-based rules over a fresh atom table.
/// Atom i is named `<prefix>i`. Used by tests and generators.
GroundProgram make_propositional(std::size_t atoms, std::vector<GroundRule> rules, std::string_view prefix = "a");

/// Set of atoms of one program's universe.
class Interpretation {
public:
    Interpretation() = default;
    explicit Interpretation(std::size_t universe) : bits_(universe, false) {}
    Interpretation(std::size_t universe, std::span<const AtomId> atoms);

    bool contains(AtomId id) const { return id < bits_.size() && bits_[id]; }
    void insert(AtomId id);
    void erase(AtomId id) { if (id < bits_.size()) bits_[id] = false; }
    std::size_t size() const;
    std::size_t universe() const { return bits_.size(); }
    std::vector<AtomId> atoms() const;

    bool operator==(const Interpretation& other) const;

private:
    std::vector<bool> bits_;
};

struct GroundOptions {
    std::size_t max_ground_rules = 10'000'000;
};

/// Instantiates `program` plus `extra_facts`. Only instances whose positive
/// body atoms are potentially derivable are produced; comparisons are
/// evaluated and unsatisfied instances dropped.
GroundProgram ground(const Program& program, std::span<const GroundAtom> extra_facts = {},
                     const GroundOptions& options = {});

/// Deletes rules blocked by `i` and strips the remaining negative bodies.
GroundProgram reduct(const GroundProgram& gp, const Interpretation& i);

/// Least model of a negation-free program. Constraints are ignored.
Interpretation least_model(const GroundProgram& gp);

bool satisfies_constraints(const GroundProgram& gp, const Interpretation& i);
bool is_answer_set(const GroundProgram& gp, const Interpretation& i);

/// No atom-level dependency cycle passes through a negative edge.
bool is_stratified(const GroundProgram& gp);

struct SolveOptions {
    std::size_t nant_bound = 24;
};

/// Canonically sorted answer sets, at most `limit` of them.
std::vector<Interpretation> answer_sets(const GroundProgram& gp, std::size_t limit = SIZE_MAX,
                                        const SolveOptions& options = {});

/// Guess-and-check over subsets of NANT, regardless of stratification.
std::vector<Interpretation> answer_sets_by_guessing(const GroundProgram& gp, std::size_t limit = SIZE_MAX,
                                                    const SolveOptions& options = {});

/// Atoms occurring under `not` anywhere, ascending ids.
std::vector<AtomId> nant(const GroundProgram& gp);

struct Consequences {
    Interpretation plus;   // true in every answer set
    Interpretation minus;  // true in no answer set
    bool no_answer_set = false;
};

Consequences cautious_consequences(const GroundProgram& gp, const SolveOptions& options = {});

using AssumptionSet = std::vector<AtomId>;  // sorted ascending

/// True when `a` is the unique answer set of gp minus the rules with head in `u`.
bool is_assumption_set(const GroundProgram& gp, const Interpretation& a, const AssumptionSet& u,
                       const SolveOptions& options = {});

/// Subset-minimal assumption sets for answer set `a`, by size then canonically.
std::vector<AssumptionSet> assumption_sets(const GroundProgram& gp, const Interpretation& a,
                                           const SolveOptions& options = {});

/// Atoms of `i` in canonical order.
std::vector<GroundAtom> sorted_atoms(const GroundProgram& gp, const Interpretation& i);
std::vector<GroundAtom> sorted_atoms(const GroundProgram& gp, std::span<const AtomId> ids);

/// Newline-terminated atom lines in canonical order.
std::string answer_set_text(const GroundProgram& gp, const Interpretation& i);
/// {"format_version":1,"atoms":[...]}
std::string answer_set_json(const GroundProgram& gp, const Interpretation& i);

}  // namespace nppx

template <>
struct std::hash<nppx::GroundAtom> {
    std::size_t operator()(const nppx::GroundAtom& a) const noexcept { return nppx::GroundAtomHash{}(a); }
};
