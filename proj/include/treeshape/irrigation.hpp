#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "treeshape/measure.hpp"

namespace treeshape {

enum class NodeKind { Root, Steiner, Leaf };

struct TreeNode {
    int id = 0;
    Point pos;
    NodeKind kind = NodeKind::Leaf;
};

struct TreeEdge {
    int parent = 0;
    int child = 0;
};

// Embedded rooted tree transporting mass from the origin to the leaf atoms.
// Exactly one root (at the origin), edges directed away from it, every leaf
// paired with exactly one atom, steiner nodes with >= 2 children.
struct IrrigationTree {
    int dim = 2;
    std::vector<TreeNode> nodes;
    std::vector<TreeEdge> edges;
    std::map<int, Atom> leaf_atoms;

    void validate() const;
};

// Tree plus the flux carried by each edge (parallel to `tree.edges`).
// Flux into a leaf equals that atom's mass; internal nodes satisfy Kirchhoff.
struct FluxAnnotatedTree {
    IrrigationTree tree;
    std::vector<double> edge_flux;
};

struct IrrigationOptions {
    enum class Mode { Exhaustive, Heuristic };
    Mode mode = Mode::Exhaustive;
    std::uint64_t seed = 0;
    double tol = 1e-9;  // relaxation displacement tolerance
    int max_iter = 2000;
};

struct IrrigationResult {
    double cost = 0.0;
    FluxAnnotatedTree tree;
};

// Bottom-up flux accumulation; validates the tree first.
FluxAnnotatedTree compute_fluxes(const IrrigationTree& tree);

// Gilbert energy: sum over edges of length * flux^alpha.
double gilbert_cost(const FluxAnnotatedTree& t, double alpha);

// Minimizes the Gilbert energy over steiner positions at fixed topology by
// Gauss-Seidel weighted-Fermat (Weiszfeld) updates, plus a snap pass that
// collapses a steiner node onto a neighbor when that strictly lowers the
// cost. Cost is non-increasing across sweeps; stops when the max node
// displacement drops below tol, or at max_iter sweeps.
FluxAnnotatedTree relax_steiner_points(const FluxAnnotatedTree& t, double alpha,
                                       double tol, int max_iter);

// I^alpha(mu) over embedded tree plans from the origin. Exhaustive mode
// enumerates all full binary topologies (<= 7 atoms); heuristic mode builds a
// greedy merge topology and improves it with seeded reattachment moves.
IrrigationResult irrigation_cost(const DiscreteMeasure& mu, double alpha,
                                 const IrrigationOptions& opts = {});

// total_mass^(alpha-1) * sum_i m_i |x_i|; a lower bound for any plan.
double lower_bound(const DiscreteMeasure& mu, double alpha);

// Number of full binary topologies on n labeled leaves: (2n-3)!!.
std::uint64_t topology_count(int leaves);

}  // namespace treeshape
