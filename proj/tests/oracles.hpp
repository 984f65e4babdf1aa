#pragma once

// Independent reference implementations used by the property tests and the
// acceptance binary. Nothing here calls the engine's solving code.

#include "nppx/engine.hpp"
#include "nppx/explain.hpp"

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Mask = std::uint32_t;

struct PropRule {
    int head = -1;  // -1: constraint
    Mask pos = 0;
    Mask neg = 0;
};

struct PropProgram {
    int atoms = 0;
    std::vector<PropRule> rules;
};

nppx::GroundProgram to_ground(const PropProgram& p);
Mask to_mask(const nppx::Interpretation& i);
nppx::Interpretation to_interpretation(const PropProgram& p, Mask m);

/// Random normal program over `atoms` atoms.
PropProgram random_program(std::mt19937_64& rng, int atoms, int rules, bool constraints);
/// Random program with levels: negative bodies only reach strictly lower levels.
PropProgram random_stratified(std::mt19937_64& rng, int atoms, int rules);
/// Random negation-free program.
PropProgram random_positive(std::mt19937_64& rng, int atoms, int rules);

/// Minimal model of a positive program found by checking every interpretation.
Mask minimal_model_by_enumeration(const PropProgram& p);
/// Answer sets by checking all 2^n interpretations against the definition.
std::set<Mask> answer_sets_by_enumeration(const PropProgram& p);

/// Naive instantiation over the active domain; one line per ground rule:
/// "source|head|pos1,pos2|neg1" with atoms sorted as strings.
std::set<std::string> naive_ground(const nppx::Program& program);
std::set<std::string> render_ground(const nppx::GroundProgram& gp);

/// Every valid explanation graph of `atom`, found by trying all label-consistent
/// edge subsets per node and keeping the combinations the validator accepts.
/// Returns canonical JSON texts. Only feasible for a handful of atoms.
std::set<std::string> explanation_graphs_by_search(const nppx::GroundProgram& gp, const nppx::Interpretation& a,
                                                   const nppx::AssumptionSet& u, nppx::AtomId atom);

}  // namespace oracle

#include "nppx/npp_kb.hpp"
#include "nppx/replay.hpp"

namespace oracle {

struct WindowAtoms {
    std::set<std::string> recommendations;
    std::set<std::string> inferred_vars;
    std::set<std::string> inferred_actions;
};

/// What the plant rules should report for window [lo, hi], worked out by
/// scanning the samples second by second. `earlier_events` are the
/// it_happened atoms of previous windows.
WindowAtoms window_by_scan(const std::vector<nppx::SensorSample>& sensors,
                           const std::vector<nppx::AttemptedAction>& actions, const nppx::KbConfig& cfg, long long lo,
                           long long hi, const std::set<std::string>& earlier_events);

struct RandomCase {
    std::vector<nppx::SensorSample> sensors;
    std::vector<nppx::AttemptedAction> actions;
    nppx::KbConfig cfg;
    long long step = 60;
    long long horizon = 300;
};

/// Piecewise-constant streams with a few jumps each, values drawn around the
/// thresholds of the default configuration, plus a few attempted actions.
RandomCase random_case(std::mt19937_64& rng);

}  // namespace oracle
