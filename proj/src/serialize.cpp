#include "treeshape/serialize.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace treeshape {

namespace {

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_svg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

json measure_to_json(const DiscreteMeasure& mu) {
    json atoms = json::array();
    for (const Atom& a : mu.atoms)
        atoms.push_back(json{{"x", a.position}, {"m", a.mass}});
    return json{{"d", mu.dim}, {"atoms", atoms}};
}

DiscreteMeasure measure_from_json(const json& j) {
    if (!j.is_object() || !j.contains("d") || !j.contains("atoms"))
        throw std::invalid_argument(R"(measure: expected {"d":..,"atoms":[..]})");
    DiscreteMeasure mu;
    mu.dim = j.at("d").get<int>();
    for (const json& ja : j.at("atoms")) {
        Atom a;
        a.position = ja.at("x").get<Point>();
        a.mass = ja.at("m").get<double>();
        mu.atoms.push_back(std::move(a));
    }
    mu.validate();
    return mu;
}

json grid_header_json(const GridDensity& f) {
    return json{{"domain",
                 {{"lo", f.spec.domain.lower}, {"hi", f.spec.domain.upper}}},
                {"resolution", f.spec.resolution}};
}

std::string grid_to_csv(const GridDensity& f) {
    std::string out;
    const std::size_t row_len = static_cast<std::size_t>(f.spec.resolution[0]);
    const std::size_t rows = f.cells.size() / row_len;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < row_len; ++c) {
            if (c) out += ',';
            out += fmt_num(f.cells[r * row_len + c]);
        }
        out += '\n';
    }
    return out;
}

GridDensity grid_from_csv(const json& header, const std::string& csv) {
    GridSpec spec;
    spec.domain = BoxDomain(header.at("domain").at("lo").get<Point>(),
                            header.at("domain").at("hi").get<Point>());
    spec.resolution = header.at("resolution").get<std::vector<int>>();
    spec.validate();
    std::vector<double> cells;
    cells.reserve(spec.cell_count());
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) cells.push_back(std::stod(field));
    }
    if (cells.size() != spec.cell_count())
        throw std::invalid_argument("grid csv: cell count mismatch with header");
    return GridDensity(std::move(spec), std::move(cells));
}

std::string plane_to_csv(const PlaneDensity& p) {
    std::string out;
    const std::size_t row_len =
        p.plane.pixels.empty() ? p.values.size()
                               : static_cast<std::size_t>(p.plane.pixels[0]);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        out += fmt_num(p.values[i]);
        out += (i + 1) % row_len == 0 ? '\n' : ',';
    }
    return out;
}

namespace {

const char* kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Root: return "root";
        case NodeKind::Steiner: return "steiner";
        case NodeKind::Leaf: return "leaf";
    }
    return "leaf";
}

}  // namespace

json tree_to_json(const FluxAnnotatedTree& t) {
    json nodes = json::array();
    for (const TreeNode& nd : t.tree.nodes)
        nodes.push_back(
            json{{"id", nd.id}, {"pos", nd.pos}, {"kind", kind_name(nd.kind)}});
    json edges = json::array();
    for (std::size_t e = 0; e < t.tree.edges.size(); ++e)
        edges.push_back(json{{"parent", t.tree.edges[e].parent},
                             {"child", t.tree.edges[e].child},
                             {"flux", t.edge_flux[e]}});
    json atoms = json::object();
    for (const auto& [id, atom] : t.tree.leaf_atoms)
        atoms[std::to_string(id)] = json{{"x", atom.position}, {"m", atom.mass}};
    return json{{"dim", t.tree.dim},
                {"nodes", nodes},
                {"edges", edges},
                {"leaf_atoms", atoms}};
}

json report_to_json(const OptReport& rep) {
    json certs = json::array();
    for (const AtomCertificate& c : rep.certificates)
        certs.push_back(json{{"atom", c.atom},
                             {"radius", c.radius},
                             {"threshold", c.threshold},
                             {"value", c.value},
                             {"passed", c.passed}});
    return json{{"best",
                 {{"measure", measure_to_json(rep.best.mu)},
                  {"payoff", rep.best.payoff},
                  {"cost", rep.best.cost},
                  {"objective", rep.best.objective}}},
                {"evaluations", rep.evaluations},
                {"proposals", rep.proposals},
                {"accepted", rep.accepted},
                {"rejected_infeasible", rep.rejected_infeasible},
                {"pde_failures", rep.pde_failures},
                {"seed", rep.seed},
                {"support_radius", rep.support_radius},
                {"smear_radius", rep.smear_radius},
                {"certificates", certs}};
}

std::string trace_to_csv(const OptReport& rep) {
    std::string out = "evaluation,best_objective\n";
    for (std::size_t i = 0; i < rep.trace.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += fmt_num(rep.trace[i]);
        out += '\n';
    }
    return out;
}

namespace {

struct SvgCanvas {
    double x0, y0, x1, y1;  // world bounds
    double width = 640.0;
    double scale, height;
    std::string body;

    SvgCanvas(double x0_, double y0_, double x1_, double y1_)
        : x0(x0_), y0(y0_), x1(x1_), y1(y1_) {
        const double margin = 0.05 * std::max(x1 - x0, y1 - y0);
        x0 -= margin;
        y0 -= margin;
        x1 += margin;
        y1 += margin;
        scale = width / (x1 - x0);
        height = (y1 - y0) * scale;
    }
    double px(double x) const { return (x - x0) * scale; }
    // SVG y runs downward.
    double py(double y) const { return (y1 - y) * scale; }

    std::string finish() const {
        std::string out =
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
            "width=\"" +
            fmt_svg(width) + "\" height=\"" + fmt_svg(height) +
            "\" viewBox=\"0 0 " + fmt_svg(width) + " " + fmt_svg(height) +
            "\">\n";
        out += body;
        out += "</svg>\n";
        return out;
    }
};

void draw_axes(SvgCanvas& c) {
    c.body += "<line x1=\"" + fmt_svg(c.px(c.x0)) + "\" y1=\"" +
              fmt_svg(c.py(0)) + "\" x2=\"" + fmt_svg(c.px(c.x1)) +
              "\" y2=\"" + fmt_svg(c.py(0)) +
              "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
    c.body += "<line x1=\"" + fmt_svg(c.px(0)) + "\" y1=\"" +
              fmt_svg(c.py(c.y0)) + "\" x2=\"" + fmt_svg(c.px(0)) +
              "\" y2=\"" + fmt_svg(c.py(c.y1)) +
              "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
}

void draw_density(SvgCanvas& c, const GridDensity& f) {
    double vmax = 0.0;
    for (double v : f.cells) vmax = std::max(vmax, v);
    if (vmax <= 0.0) return;
    const int nx = f.spec.resolution[0], ny = f.spec.resolution[1];
    const double wx = f.spec.cell_width(0), wy = f.spec.cell_width(1);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const double v = f.cells[std::size_t(iy) * nx + ix];
            if (v <= 0.0) continue;
            const int shade = std::clamp(
                255 - static_cast<int>(std::round(200.0 * v / vmax)), 0, 255);
            const double x = f.spec.domain.lower[0] + ix * wx;
            const double y = f.spec.domain.lower[1] + iy * wy;
            const std::string level = std::to_string(shade);
            const std::string color =
                "rgb(" + level + "," + level + "," + level + ")";
            c.body += "<rect x=\"" + fmt_svg(c.px(x)) + "\" y=\"" +
                      fmt_svg(c.py(y + wy)) + "\" width=\"" +
                      fmt_svg(wx * c.scale) + "\" height=\"" +
                      fmt_svg(wy * c.scale) + "\" fill=\"" + color + "\"/>\n";
        }
    }
}

void draw_tree(SvgCanvas& c, const FluxAnnotatedTree& t, double alpha) {
    double wmax = 0.0;
    for (double f : t.edge_flux) wmax = std::max(wmax, std::pow(f, alpha));
    if (wmax <= 0.0) wmax = 1.0;
    for (std::size_t e = 0; e < t.tree.edges.size(); ++e) {
        const TreeNode* a = nullptr;
        const TreeNode* b = nullptr;
        for (const TreeNode& nd : t.tree.nodes) {
            if (nd.id == t.tree.edges[e].parent) a = &nd;
            if (nd.id == t.tree.edges[e].child) b = &nd;
        }
        const double w = 4.0 * std::pow(t.edge_flux[e], alpha) / wmax;
        c.body += "<line x1=\"" + fmt_svg(c.px(a->pos[0])) + "\" y1=\"" +
                  fmt_svg(c.py(a->pos[1])) + "\" x2=\"" +
                  fmt_svg(c.px(b->pos[0])) + "\" y2=\"" +
                  fmt_svg(c.py(b->pos[1])) + "\" stroke=\"#2a6\" stroke-width=\"" +
                  fmt_svg(w) + "\" stroke-linecap=\"round\"/>\n";
    }
}

void tree_bounds(const FluxAnnotatedTree& t, double& x0, double& y0, double& x1,
                 double& y1) {
    for (const TreeNode& nd : t.tree.nodes) {
        x0 = std::min(x0, nd.pos[0]);
        x1 = std::max(x1, nd.pos[0]);
        y0 = std::min(y0, nd.pos[1]);
        y1 = std::max(y1, nd.pos[1]);
    }
}

}  // namespace

std::string render_svg(const FluxAnnotatedTree& tree, double alpha) {
    if (tree.tree.dim != 2)
        throw std::invalid_argument("svg: only d=2 supported");
    double x0 = -0.5, y0 = -0.5, x1 = 0.5, y1 = 0.5;
    tree_bounds(tree, x0, y0, x1, y1);
    SvgCanvas c(x0, y0, x1, y1);
    draw_axes(c);
    draw_tree(c, tree, alpha);
    return c.finish();
}

std::string render_svg(const GridDensity& density, const FluxAnnotatedTree* tree,
                       double alpha) {
    if (density.dim() != 2 || (tree && tree->tree.dim != 2))
        throw std::invalid_argument("svg: only d=2 supported");
    double x0 = density.spec.domain.lower[0], y0 = density.spec.domain.lower[1];
    double x1 = density.spec.domain.upper[0], y1 = density.spec.domain.upper[1];
    if (tree) tree_bounds(*tree, x0, y0, x1, y1);
    SvgCanvas c(x0, y0, x1, y1);
    draw_density(c, density);
    draw_axes(c);
    if (tree) draw_tree(c, *tree, alpha);
    return c.finish();
}

void atomic_write(const std::filesystem::path& path, const std::string& data) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open " + tmp.string() +
                                     " for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace treeshape
