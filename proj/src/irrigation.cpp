#include "treeshape/irrigation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "treeshape/parallel.hpp"

namespace treeshape {

namespace {

using Pos3 = std::array<double, 3>;

double dist3(const Pos3& a, const Pos3& b, int d) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
        const double t = a[c] - b[c];
        s += t * t;
    }
    return std::sqrt(s);
}

// Flat working form: node 0 is the root; parent[i] < 0 marks it.
struct Flat {
    int dim = 2;
    std::vector<Pos3> pos;
    std::vector<int> parent;
    std::vector<std::vector<int>> children;
    std::vector<NodeKind> kind;
    std::vector<double> up_flux;    // flux of the parent edge, per node
    std::vector<double> up_weight;  // flux^alpha, cached for relaxation
    std::vector<double> mass;       // leaf mass, 0 elsewhere

    int nodes() const { return static_cast<int>(pos.size()); }
};

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("irrigation: alpha must be in (0, 1]");
}

double flux_pow(double flux, double alpha) {
    return alpha == 1.0 ? flux : std::pow(flux, alpha);
}

// Bottom-up Kirchhoff fluxes; children are summed in order, so the flux into
// a node is bit-identical to the sum of its outgoing fluxes.
void accumulate_fluxes(Flat& t) {
    t.up_flux.assign(t.nodes(), 0.0);
    std::vector<int> order;
    order.reserve(t.nodes());
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        order.push_back(v);
        for (int c : t.children[v]) stack.push_back(c);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int v = *it;
        if (t.kind[v] == NodeKind::Leaf) {
            t.up_flux[v] = t.mass[v];
        } else {
            double s = 0.0;
            for (int c : t.children[v]) s += t.up_flux[c];
            t.up_flux[v] = s;
        }
    }
}

void cache_weights(Flat& t, double alpha) {
    t.up_weight.assign(t.nodes(), 0.0);
    for (int v = 1; v < t.nodes(); ++v)
        t.up_weight[v] = flux_pow(t.up_flux[v], alpha);
}

double flat_cost(const Flat& t) {
    double s = 0.0;
    for (int v = 1; v < t.nodes(); ++v) {
        if (t.parent[v] < 0) continue;
        s += t.up_weight[v] * dist3(t.pos[v], t.pos[t.parent[v]], t.dim);
    }
    return s;
}

// Cost of the edges incident to node v, with v at position x.
double local_cost(const Flat& t, int v, const Pos3& x) {
    double s = 0.0;
    if (t.parent[v] >= 0)
        s += t.up_weight[v] * dist3(x, t.pos[t.parent[v]], t.dim);
    for (int c : t.children[v]) s += t.up_weight[c] * dist3(x, t.pos[c], t.dim);
    return s;
}

// One Vardi-Zhang weighted-Fermat update of steiner node v. Handles iterates
// that coincide with an anchor: stays put when the residual pull is within
// the coincident weight, otherwise steps along the pull.
double fermat_update(Flat& t, int v) {
    constexpr double kEps = 1e-12;
    const int d = t.dim;
    struct Anchor {
        const Pos3* y;
        double w;
    };
    static thread_local std::vector<Anchor> anchors;
    anchors.clear();
    if (t.parent[v] >= 0)
        anchors.push_back({&t.pos[t.parent[v]], t.up_weight[v]});
    for (int c : t.children[v])
        anchors.push_back({&t.pos[c], t.up_weight[c]});
    const int na = static_cast<int>(anchors.size());
    const Pos3 x = t.pos[v];
    double num[3] = {0, 0, 0};
    double den = 0.0;
    double pull[3] = {0, 0, 0};
    double w0 = 0.0;  // weight of coincident anchors
    for (int i = 0; i < na; ++i) {
        const double di = dist3(x, *anchors[i].y, d);
        if (di < kEps) {
            w0 += anchors[i].w;
            continue;
        }
        const double wi = anchors[i].w / di;
        den += wi;
        for (int c = 0; c < d; ++c) {
            num[c] += wi * (*anchors[i].y)[c];
            pull[c] += wi * ((*anchors[i].y)[c] - x[c]);
        }
    }
    if (den <= 0.0) return 0.0;
    double pull_norm = 0.0;
    for (int c = 0; c < d; ++c) pull_norm += pull[c] * pull[c];
    pull_norm = std::sqrt(pull_norm);
    double scale = 1.0;
    if (w0 > 0.0) {
        if (pull_norm <= w0) return 0.0;
        scale = 1.0 - w0 / pull_norm;
    }
    Pos3 xn = x;
    double disp = 0.0;
    for (int c = 0; c < d; ++c) {
        const double target = num[c] / den;
        xn[c] = x[c] + scale * (target - x[c]);
        disp += (xn[c] - x[c]) * (xn[c] - x[c]);
    }
    t.pos[v] = xn;
    return std::sqrt(disp);
}

// Gauss-Seidel relaxation with a per-sweep snap pass. Monotone in cost.
void relax_flat(Flat& t, double tol, int max_iter) {
    std::vector<int> steiner;
    for (int v = 0; v < t.nodes(); ++v)
        if (t.kind[v] == NodeKind::Steiner) steiner.push_back(v);
    if (steiner.empty()) return;

    double cost = flat_cost(t);
    for (int sweep = 0; sweep < max_iter; ++sweep) {
        double max_disp = 0.0;
        for (int v : steiner) max_disp = std::max(max_disp, fermat_update(t, v));
        // Snap: placing a steiner node exactly on a neighbor finishes the
        // collapse that Weiszfeld only approaches asymptotically.
        for (int v : steiner) {
            double base = local_cost(t, v, t.pos[v]);
            int best = -1;
            auto consider = [&](int u) {
                const double c = local_cost(t, v, t.pos[u]);
                if (c < base) {
                    base = c;
                    best = u;
                }
            };
            if (t.parent[v] >= 0) consider(t.parent[v]);
            for (int c : t.children[v]) consider(c);
            if (best >= 0) {
                max_disp = std::max(max_disp, dist3(t.pos[v], t.pos[best], t.dim));
                t.pos[v] = t.pos[best];
            }
        }
        const double new_cost = flat_cost(t);
        if (new_cost > cost + 1e-9 * (1.0 + cost))
            throw std::logic_error("irrigation: relaxation cost increased");
        cost = new_cost;
        if (max_disp < tol) break;
    }
}

Flat make_root_flat(int dim) {
    Flat t;
    t.dim = dim;
    t.pos.push_back({0, 0, 0});
    t.parent.push_back(-1);
    t.children.emplace_back();
    t.kind.push_back(NodeKind::Root);
    t.mass.push_back(0.0);
    return t;
}

Pos3 to_pos3(const Point& p) {
    Pos3 out{0, 0, 0};
    for (std::size_t c = 0; c < p.size() && c < 3; ++c) out[c] = p[c];
    return out;
}

// Builds a topology over the atoms from a leaf-insertion code: leaf k >= 2
// subdivides one of the 2k-3 existing edges. Node ids: root 0, leaves
// 1..n, steiner nodes n+1.. in insertion order.
Flat build_topology(const DiscreteMeasure& mu,
                    const std::vector<int>& insert_code) {
    const int n = static_cast<int>(mu.atoms.size());
    Flat t = make_root_flat(mu.dim);
    for (int i = 0; i < n; ++i) {
        t.pos.push_back(to_pos3(mu.atoms[i].position));
        t.parent.push_back(-1);
        t.children.emplace_back();
        t.kind.push_back(NodeKind::Leaf);
        t.mass.push_back(mu.atoms[i].mass);
    }
    if (n == 0) return t;

    std::vector<std::pair<int, int>> edges{{0, 1}};
    for (int k = 2; k <= n; ++k) {
        const auto [u, v] = edges[insert_code[k - 2]];
        const int s = static_cast<int>(t.pos.size());
        Pos3 seed;
        for (int c = 0; c < 3; ++c)
            seed[c] = (t.pos[u][c] + t.pos[v][c] + t.pos[k][c]) / 3.0;
        t.pos.push_back(seed);
        t.parent.push_back(-1);
        t.children.emplace_back();
        t.kind.push_back(NodeKind::Steiner);
        t.mass.push_back(0.0);
        edges[insert_code[k - 2]] = {u, s};
        edges.emplace_back(s, v);
        edges.emplace_back(s, k);
    }
    for (const auto& [u, v] : edges) {
        t.parent[v] = u;
        t.children[u].push_back(v);
    }
    return t;
}

FluxAnnotatedTree to_public(const Flat& t, const DiscreteMeasure& mu) {
    FluxAnnotatedTree out;
    out.tree.dim = t.dim;
    for (int v = 0; v < t.nodes(); ++v) {
        Point p(t.dim);
        for (int c = 0; c < t.dim; ++c) p[c] = t.pos[v][c];
        out.tree.nodes.push_back({v, std::move(p), t.kind[v]});
    }
    for (int v = 1; v < t.nodes(); ++v) {
        out.tree.edges.push_back({t.parent[v], v});
        out.edge_flux.push_back(t.up_flux[v]);
    }
    for (std::size_t i = 0; i < mu.atoms.size(); ++i)
        out.tree.leaf_atoms[static_cast<int>(i) + 1] = mu.atoms[i];
    return out;
}

Flat to_flat(const FluxAnnotatedTree& fat) {
    const IrrigationTree& tree = fat.tree;
    Flat t;
    t.dim = tree.dim;
    // Remap ids to dense indices with the root first.
    std::map<int, int> index;
    int root_id = 0;
    for (const TreeNode& nd : tree.nodes)
        if (nd.kind == NodeKind::Root) root_id = nd.id;
    index[root_id] = 0;
    for (const TreeNode& nd : tree.nodes)
        if (nd.id != root_id)
            index[nd.id] = static_cast<int>(index.size());
    t.pos.resize(tree.nodes.size());
    t.parent.assign(tree.nodes.size(), -1);
    t.children.resize(tree.nodes.size());
    t.kind.resize(tree.nodes.size());
    t.mass.assign(tree.nodes.size(), 0.0);
    for (const TreeNode& nd : tree.nodes) {
        const int v = index.at(nd.id);
        t.pos[v] = to_pos3(nd.pos);
        t.kind[v] = nd.kind;
    }
    for (const auto& [leaf_id, atom] : tree.leaf_atoms)
        t.mass[index.at(leaf_id)] = atom.mass;
    for (const TreeEdge& e : tree.edges) {
        const int p = index.at(e.parent), c = index.at(e.child);
        t.parent[c] = p;
        t.children[p].push_back(c);
    }
    accumulate_fluxes(t);
    return t;
}

}  // namespace

void IrrigationTree::validate() const {
    std::set<int> ids;
    int roots = 0;
    for (const TreeNode& nd : nodes) {
        if (!ids.insert(nd.id).second)
            throw std::invalid_argument("tree: duplicate node id");
        if (static_cast<int>(nd.pos.size()) != dim || !all_finite(nd.pos))
            throw std::invalid_argument("tree: bad node position");
        if (nd.kind == NodeKind::Root) {
            ++roots;
            if (norm(nd.pos) > 1e-12)
                throw std::invalid_argument("tree: root must sit at the origin");
        }
    }
    if (roots != 1) throw std::invalid_argument("tree: exactly one root required");

    std::map<int, int> parent_count, child_count;
    for (const TreeEdge& e : edges) {
        if (!ids.count(e.parent) || !ids.count(e.child))
            throw std::invalid_argument("tree: edge references unknown node");
        ++parent_count[e.child];
        ++child_count[e.parent];
    }
    std::map<int, std::vector<int>> children;
    for (const TreeEdge& e : edges) children[e.parent].push_back(e.child);
    for (const TreeNode& nd : nodes) {
        const int pc = parent_count.count(nd.id) ? parent_count.at(nd.id) : 0;
        const int cc = child_count.count(nd.id) ? child_count.at(nd.id) : 0;
        switch (nd.kind) {
            case NodeKind::Root:
                if (pc != 0)
                    throw std::invalid_argument("tree: root has a parent");
                break;
            case NodeKind::Steiner:
                if (pc != 1 || cc < 2)
                    throw std::invalid_argument(
                        "tree: steiner node needs one parent and >= 2 children");
                break;
            case NodeKind::Leaf:
                if (pc != 1 || cc != 0)
                    throw std::invalid_argument(
                        "tree: leaf needs one parent and no children");
                if (!leaf_atoms.count(nd.id))
                    throw std::invalid_argument("tree: orphan leaf without atom");
                break;
        }
    }
    if (leaf_atoms.size() !=
        static_cast<std::size_t>(std::count_if(
            nodes.begin(), nodes.end(),
            [](const TreeNode& nd) { return nd.kind == NodeKind::Leaf; })))
        throw std::invalid_argument("tree: atom/leaf count mismatch");
    for (const auto& [id, atom] : leaf_atoms) {
        if (!(atom.mass > 0.0))
            throw std::invalid_argument("tree: leaf atom mass must be > 0");
    }
    // Reachability from the root covers every node exactly once (no cycles,
    // no disconnected parts).
    int root_id = 0;
    for (const TreeNode& nd : nodes)
        if (nd.kind == NodeKind::Root) root_id = nd.id;
    std::set<int> seen{root_id};
    std::vector<int> stack{root_id};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        if (!children.count(v)) continue;
        for (int c : children.at(v)) {
            if (!seen.insert(c).second)
                throw std::invalid_argument("tree: cycle detected");
            stack.push_back(c);
        }
    }
    if (seen.size() != nodes.size())
        throw std::invalid_argument("tree: disconnected node");
}

FluxAnnotatedTree compute_fluxes(const IrrigationTree& tree) {
    tree.validate();
    FluxAnnotatedTree out;
    out.tree = tree;
    Flat t = to_flat(out);
    // to_flat() reindexes; map fluxes back to the public edge order.
    std::map<int, int> index;
    int root_id = 0;
    for (const TreeNode& nd : tree.nodes)
        if (nd.kind == NodeKind::Root) root_id = nd.id;
    index[root_id] = 0;
    for (const TreeNode& nd : tree.nodes)
        if (nd.id != root_id) index[nd.id] = static_cast<int>(index.size());
    out.edge_flux.resize(tree.edges.size());
    for (std::size_t e = 0; e < tree.edges.size(); ++e)
        out.edge_flux[e] = t.up_flux[index.at(tree.edges[e].child)];
    return out;
}

double gilbert_cost(const FluxAnnotatedTree& fat, double alpha) {
    check_alpha(alpha);
    double s = 0.0;
    for (std::size_t e = 0; e < fat.tree.edges.size(); ++e) {
        const TreeEdge& edge = fat.tree.edges[e];
        const TreeNode* a = nullptr;
        const TreeNode* b = nullptr;
        for (const TreeNode& nd : fat.tree.nodes) {
            if (nd.id == edge.parent) a = &nd;
            if (nd.id == edge.child) b = &nd;
        }
        const double len = dist(a->pos, b->pos);
        if (len > 0.0) s += len * flux_pow(fat.edge_flux[e], alpha);
    }
    return s;
}

FluxAnnotatedTree relax_steiner_points(const FluxAnnotatedTree& fat,
                                       double alpha, double tol, int max_iter) {
    check_alpha(alpha);
    if (max_iter < 1)
        throw std::invalid_argument("relax: max_iter must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("relax: tol must be > 0");
    fat.tree.validate();

    Flat t = to_flat(fat);
    cache_weights(t, alpha);
    relax_flat(t, tol, max_iter);

    // Positions back onto the original ids (same reindexing as to_flat).
    FluxAnnotatedTree out = fat;
    std::map<int, int> index;
    int root_id = 0;
    for (const TreeNode& nd : out.tree.nodes)
        if (nd.kind == NodeKind::Root) root_id = nd.id;
    index[root_id] = 0;
    for (const TreeNode& nd : out.tree.nodes)
        if (nd.id != root_id) index[nd.id] = static_cast<int>(index.size());
    for (TreeNode& nd : out.tree.nodes) {
        const Pos3& p = t.pos[index.at(nd.id)];
        for (int c = 0; c < out.tree.dim; ++c) nd.pos[c] = p[c];
    }
    // Relaxation moves positions only; the tree structure (and with it
    // loop-freeness) must survive every step.
    out.tree.validate();
    return out;
}

std::uint64_t topology_count(int leaves) {
    if (leaves <= 1) return 1;
    std::uint64_t n = 1;
    for (int k = 2; k <= leaves; ++k) n *= static_cast<std::uint64_t>(2 * k - 3);
    return n;
}

namespace {

double evaluate_topology(const DiscreteMeasure& mu,
                         const std::vector<int>& code, double alpha,
                         const IrrigationOptions& opts, Flat* out) {
    Flat t = build_topology(mu, code);
    accumulate_fluxes(t);
    cache_weights(t, alpha);
    relax_flat(t, opts.tol, opts.max_iter);
    const double cost = flat_cost(t);
    if (out) *out = std::move(t);
    return cost;
}

IrrigationResult solve_exhaustive(const DiscreteMeasure& mu, double alpha,
                                  const IrrigationOptions& opts) {
    const int n = static_cast<int>(mu.atoms.size());
    const std::uint64_t total = topology_count(n);
    std::vector<double> costs(total);
    par::parallel_for(total, [&](std::size_t t) {
        std::uint64_t rem = t;
        std::vector<int> code(std::max(0, n - 1));
        for (int k = 2; k <= n; ++k) {
            const std::uint64_t radix = static_cast<std::uint64_t>(2 * k - 3);
            code[k - 2] = static_cast<int>(rem % radix);
            rem /= radix;
        }
        costs[t] = evaluate_topology(mu, code, alpha, opts, nullptr);
    });
    std::size_t best = 0;
    for (std::size_t t = 1; t < costs.size(); ++t)
        if (costs[t] < costs[best]) best = t;

    std::uint64_t rem = best;
    std::vector<int> code(std::max(0, n - 1));
    for (int k = 2; k <= n; ++k) {
        const std::uint64_t radix = static_cast<std::uint64_t>(2 * k - 3);
        code[k - 2] = static_cast<int>(rem % radix);
        rem /= radix;
    }
    Flat t;
    const double cost = evaluate_topology(mu, code, alpha, opts, &t);
    IrrigationResult res;
    res.cost = cost;
    res.tree = to_public(t, mu);
    return res;
}

// Edge list form used while the heuristic rearranges the topology.
struct EdgeTopology {
    std::vector<std::pair<int, int>> edges;  // (parent, child) over flat ids
    int next_steiner = 0;
};

Flat flat_from_edges(const DiscreteMeasure& mu, const EdgeTopology& topo,
                     const std::vector<Pos3>* seeds, double alpha) {
    const int n = static_cast<int>(mu.atoms.size());
    int max_id = n;
    for (const auto& [u, v] : topo.edges) max_id = std::max({max_id, u, v});
    Flat t = make_root_flat(mu.dim);
    t.pos.resize(max_id + 1, {0, 0, 0});
    t.parent.assign(max_id + 1, -1);
    t.children.assign(max_id + 1, {});
    t.kind.assign(max_id + 1, NodeKind::Steiner);
    t.mass.assign(max_id + 1, 0.0);
    t.kind[0] = NodeKind::Root;
    for (int i = 0; i < n; ++i) {
        t.pos[i + 1] = to_pos3(mu.atoms[i].position);
        t.kind[i + 1] = NodeKind::Leaf;
        t.mass[i + 1] = mu.atoms[i].mass;
    }
    if (seeds)
        for (int v = n + 1; v <= max_id; ++v) t.pos[v] = (*seeds)[v];
    for (const auto& [u, v] : topo.edges) {
        t.parent[v] = u;
        t.children[u].push_back(v);
    }
    accumulate_fluxes(t);
    cache_weights(t, alpha);
    return t;
}

// Cheap weighted-Fermat point of {origin-bound trunk, two tips}.
Pos3 junction_proxy(const Pos3& a, double wa, const Pos3& b, double wb,
                    double wt, int dim) {
    Pos3 x;
    const double ws = wa + wb + wt;
    for (int c = 0; c < 3; ++c) x[c] = (wa * a[c] + wb * b[c]) / ws;
    const Pos3 origin{0, 0, 0};
    for (int it = 0; it < 20; ++it) {
        double num[3] = {0, 0, 0};
        double den = 0.0;
        auto pull = [&](const Pos3& y, double w) {
            const double di = std::max(dist3(x, y, dim), 1e-12);
            den += w / di;
            for (int c = 0; c < dim; ++c) num[c] += w / di * y[c];
        };
        pull(a, wa);
        pull(b, wb);
        pull(origin, wt);
        for (int c = 0; c < dim; ++c) x[c] = num[c] / den;
    }
    return x;
}

IrrigationResult solve_heuristic(const DiscreteMeasure& mu, double alpha,
                                 const IrrigationOptions& opts) {
    const int n = static_cast<int>(mu.atoms.size());
    struct Comp {
        int top;
        Pos3 tip;
        double mass;
        int min_leaf;
    };
    std::vector<Comp> comps;
    for (int i = 0; i < n; ++i)
        comps.push_back({i + 1, to_pos3(mu.atoms[i].position),
                         mu.atoms[i].mass, i});

    EdgeTopology topo;
    topo.next_steiner = n + 1;
    std::vector<Pos3> seeds(n + 1 + std::max(0, n - 1), {0, 0, 0});

    // Greedy merging: join the pair with the largest two-edge saving.
    while (comps.size() > 1) {
        double best_saving = -std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        Pos3 best_junction{0, 0, 0};
        for (std::size_t i = 0; i < comps.size(); ++i) {
            for (std::size_t j = i + 1; j < comps.size(); ++j) {
                const Comp& A = comps[i];
                const Comp& B = comps[j];
                const double wa = flux_pow(A.mass, alpha);
                const double wb = flux_pow(B.mass, alpha);
                const double wt = flux_pow(A.mass + B.mass, alpha);
                const Pos3 s = junction_proxy(A.tip, wa, B.tip, wb, wt, mu.dim);
                const Pos3 origin{0, 0, 0};
                const double direct = wa * dist3(A.tip, origin, mu.dim) +
                                      wb * dist3(B.tip, origin, mu.dim);
                const double merged = wa * dist3(A.tip, s, mu.dim) +
                                      wb * dist3(B.tip, s, mu.dim) +
                                      wt * dist3(s, origin, mu.dim);
                const double saving = direct - merged;
                if (saving > best_saving) {
                    best_saving = saving;
                    bi = i;
                    bj = j;
                    best_junction = s;
                }
            }
        }
        const int s = topo.next_steiner++;
        seeds.resize(std::max<std::size_t>(seeds.size(), s + 1), {0, 0, 0});
        seeds[s] = best_junction;
        topo.edges.emplace_back(s, comps[bi].top);
        topo.edges.emplace_back(s, comps[bj].top);
        const Comp merged{s, best_junction, comps[bi].mass + comps[bj].mass,
                          std::min(comps[bi].min_leaf, comps[bj].min_leaf)};
        comps.erase(comps.begin() + bj);
        comps.erase(comps.begin() + bi);
        // Keep components ordered by lowest leaf so pair scans break ties
        // toward low atom indices.
        auto at = std::lower_bound(comps.begin(), comps.end(), merged,
                                   [](const Comp& a, const Comp& b) {
                                       return a.min_leaf < b.min_leaf;
                                   });
        comps.insert(at, merged);
    }
    topo.edges.emplace_back(0, comps[0].top);

    Flat best = flat_from_edges(mu, topo, &seeds, alpha);
    relax_flat(best, opts.tol, opts.max_iter);
    double best_cost = flat_cost(best);
    EdgeTopology best_topo = topo;

    // Local search: detach one leaf and reattach it onto a random edge.
    std::mt19937_64 rng(opts.seed);
    const int moves = n >= 2 ? 8 * n : 0;
    const int quick_iters = std::min(opts.max_iter, 60);
    for (int mv = 0; mv < moves; ++mv) {
        EdgeTopology trial = best_topo;
        const int leaf = 1 + static_cast<int>(rng() % n);
        int parent = -1;
        for (std::size_t e = 0; e < trial.edges.size(); ++e)
            if (trial.edges[e].second == leaf) parent = trial.edges[e].first;
        if (parent == 0) continue;  // single leaf below the root; nothing to move
        // Remove the leaf edge and contract its steiner parent.
        std::vector<std::pair<int, int>> kept;
        int grand = -1;
        std::vector<int> siblings;
        for (const auto& [u, v] : trial.edges) {
            if (v == leaf && u == parent) continue;
            if (u == parent) {
                siblings.push_back(v);
                continue;
            }
            if (v == parent) {
                grand = u;
                continue;
            }
            kept.emplace_back(u, v);
        }
        if (siblings.size() == 1) {
            kept.emplace_back(grand, siblings[0]);
        } else {
            for (int s : siblings) kept.emplace_back(parent, s);
            kept.emplace_back(grand, parent);
        }
        if (kept.empty()) continue;
        const auto [u, v] = kept[rng() % kept.size()];
        const int s = trial.next_steiner++;
        std::erase_if(kept, [&](const std::pair<int, int>& e) {
            return e.first == u && e.second == v;
        });
        kept.emplace_back(u, s);
        kept.emplace_back(s, v);
        kept.emplace_back(s, leaf);
        trial.edges = std::move(kept);

        std::vector<Pos3> trial_seeds(trial.next_steiner, {0, 0, 0});
        {
            Flat probe = flat_from_edges(mu, trial, nullptr, alpha);
            // Seed new/old steiner nodes from the midpoint of their neighbors.
            for (int w = n + 1; w < probe.nodes(); ++w) {
                if (probe.kind[w] != NodeKind::Steiner) continue;
                if (probe.children[w].empty()) continue;
                Pos3 c{0, 0, 0};
                int cnt = 0;
                for (int ch : probe.children[w]) {
                    for (int a = 0; a < 3; ++a) c[a] += probe.pos[ch][a];
                    ++cnt;
                }
                for (int a = 0; a < 3; ++a) c[a] /= cnt;
                trial_seeds[w] = c;
            }
        }
        Flat cand = flat_from_edges(mu, trial, &trial_seeds, alpha);
        // Unused steiner ids may remain after contraction; drop dangling ones.
        bool ok = true;
        for (int w = 0; w < cand.nodes(); ++w) {
            if (cand.kind[w] == NodeKind::Steiner && cand.parent[w] >= 0 &&
                cand.children[w].size() < 2)
                ok = false;
        }
        if (!ok) continue;
        relax_flat(cand, opts.tol, quick_iters);
        const double c = flat_cost(cand);
        if (c < best_cost - 1e-12) {
            best_cost = c;
            best_topo = trial;
        }
    }

    Flat final_flat = flat_from_edges(mu, best_topo, nullptr, alpha);
    // Re-seed from scratch, then relax fully.
    for (int w = n + 1; w < final_flat.nodes(); ++w) {
        if (final_flat.kind[w] != NodeKind::Steiner) continue;
        Pos3 c{0, 0, 0};
        int cnt = 0;
        for (int ch : final_flat.children[w]) {
            for (int a = 0; a < 3; ++a) c[a] += final_flat.pos[ch][a];
            ++cnt;
        }
        if (cnt) {
            for (int a = 0; a < 3; ++a) c[a] /= cnt;
            final_flat.pos[w] = c;
        }
    }
    relax_flat(final_flat, opts.tol, opts.max_iter);

    IrrigationResult res;
    res.cost = flat_cost(final_flat);

    // Compact ids before exposing the tree (contraction leaves gaps).
    Flat compact = make_root_flat(mu.dim);
    std::map<int, int> remap{{0, 0}};
    for (int v = 1; v < final_flat.nodes(); ++v) {
        if (final_flat.kind[v] != NodeKind::Root && final_flat.parent[v] < 0 &&
            final_flat.children[v].empty() && final_flat.kind[v] != NodeKind::Leaf)
            continue;  // dangling steiner id
        remap[v] = static_cast<int>(compact.pos.size());
        compact.pos.push_back(final_flat.pos[v]);
        compact.parent.push_back(-1);
        compact.children.emplace_back();
        compact.kind.push_back(final_flat.kind[v]);
        compact.mass.push_back(final_flat.mass[v]);
    }
    for (int v = 1; v < final_flat.nodes(); ++v) {
        if (!remap.count(v) || final_flat.parent[v] < 0) continue;
        const int c = remap.at(v), p = remap.at(final_flat.parent[v]);
        compact.parent[c] = p;
        compact.children[p].push_back(c);
    }
    accumulate_fluxes(compact);
    cache_weights(compact, alpha);

    FluxAnnotatedTree pub;
    pub.tree.dim = mu.dim;
    for (int v = 0; v < compact.nodes(); ++v) {
        Point p(mu.dim);
        for (int c = 0; c < mu.dim; ++c) p[c] = compact.pos[v][c];
        pub.tree.nodes.push_back({v, std::move(p), compact.kind[v]});
    }
    for (int v = 1; v < compact.nodes(); ++v) {
        pub.tree.edges.push_back({compact.parent[v], v});
        pub.edge_flux.push_back(compact.up_flux[v]);
    }
    for (std::size_t i = 0; i < mu.atoms.size(); ++i)
        pub.tree.leaf_atoms[remap.at(static_cast<int>(i) + 1)] = mu.atoms[i];
    res.tree = std::move(pub);
    return res;
}

}  // namespace

IrrigationResult irrigation_cost(const DiscreteMeasure& mu, double alpha,
                                 const IrrigationOptions& opts) {
    check_alpha(alpha);
    mu.validate();
    const int n = static_cast<int>(mu.atoms.size());
    if (n == 0) {
        IrrigationResult res;
        res.tree.tree.dim = mu.dim;
        res.tree.tree.nodes.push_back(
            {0, Point(mu.dim, 0.0), NodeKind::Root});
        return res;
    }
    if (opts.mode == IrrigationOptions::Mode::Exhaustive) {
        if (n > 7)
            throw std::invalid_argument(
                "irrigation: too many atoms for exhaustive mode (max 7)");
        return solve_exhaustive(mu, alpha, opts);
    }
    return solve_heuristic(mu, alpha, opts);
}

double lower_bound(const DiscreteMeasure& mu, double alpha) {
    check_alpha(alpha);
    const double total = total_mass(mu);
    if (total <= 0.0) return 0.0;
    double moment = 0.0;
    for (const Atom& a : mu.atoms) moment += a.mass * norm(a.position);
    return std::pow(total, alpha - 1.0) * moment;
}

}  // namespace treeshape
