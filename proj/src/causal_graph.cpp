#include "sepcr/causal_graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <sstream>

namespace sepcr {

namespace {

std::string kind_token(NodeKind k) {
    switch (k) {
        case NodeKind::Treatment: return "treatment";
        case NodeKind::ComponentAY: return "component_y";
        case NodeKind::ComponentAD: return "component_d";
        case NodeKind::ComponentAZ: return "component_z";
        case NodeKind::EventY: return "event_y";
        case NodeKind::EventD: return "event_d";
        case NodeKind::Covariate: return "covariate";
    }
    return "?";
}

std::optional<NodeKind> kind_from_token(const std::string& t) {
    if (t == "treatment") return NodeKind::Treatment;
    if (t == "component_y") return NodeKind::ComponentAY;
    if (t == "component_d") return NodeKind::ComponentAD;
    if (t == "component_z") return NodeKind::ComponentAZ;
    if (t == "event_y") return NodeKind::EventY;
    if (t == "event_d") return NodeKind::EventD;
    if (t == "covariate") return NodeKind::Covariate;
    return std::nullopt;
}

bool needs_interval(NodeKind k) {
    return k == NodeKind::EventY || k == NodeKind::EventD || k == NodeKind::Covariate;
}

bool is_component(NodeKind k) {
    return k == NodeKind::ComponentAY || k == NodeKind::ComponentAD || k == NodeKind::ComponentAZ;
}

// Temporal rank: baseline covariates precede randomization; within interval
// m >= 1 the order is (D_m, Y_m, L_m). Equal ranks only between covariates
// sharing an interval.
long rank_of(const GraphNode& n) {
    switch (n.kind) {
        case NodeKind::Covariate: return n.k == 0 ? 0 : 3L * n.k + 2;
        case NodeKind::Treatment:
        case NodeKind::ComponentAY:
        case NodeKind::ComponentAD:
        case NodeKind::ComponentAZ: return 1;
        case NodeKind::EventD: return 3L * n.k;
        case NodeKind::EventY: return 3L * n.k + 1;
    }
    return 0;
}

}  // namespace

int CausalGraph::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].label == label) return static_cast<int>(i);
    return -1;
}

const GraphNode& CausalGraph::node(const std::string& label) const {
    int i = index_of(label);
    if (i < 0) throw UnknownNode("unknown node " + label);
    return nodes[static_cast<std::size_t>(i)];
}

std::optional<int> CausalGraph::find_kind(NodeKind kind) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].kind == kind) return static_cast<int>(i);
    return std::nullopt;
}

int CausalGraph::max_event_interval() const {
    int m = 0;
    for (const auto& n : nodes)
        if (n.kind == NodeKind::EventY || n.kind == NodeKind::EventD) m = std::max(m, n.k);
    return m;
}

std::vector<std::vector<int>> CausalGraph::children() const {
    std::vector<std::vector<int>> ch(nodes.size());
    for (const auto& e : edges) ch[static_cast<std::size_t>(e.from)].push_back(e.to);
    return ch;
}

std::vector<std::vector<int>> CausalGraph::parents() const {
    std::vector<std::vector<int>> pa(nodes.size());
    for (const auto& e : edges) pa[static_cast<std::size_t>(e.to)].push_back(e.from);
    return pa;
}

// ---------------------------------------------------------------------------
// Parsing / emission / validation

CausalGraph parse_graph(const std::string& text) {
    CausalGraph g;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        auto fail = [&](const std::string& msg) {
            throw ParseError("line " + std::to_string(lineno) + ": " + msg);
        };
        if (word == "node") {
            GraphNode n;
            std::string kind;
            if (!(ls >> n.label >> kind)) fail("expected: node <label> <kind>");
            auto kk = kind_from_token(kind);
            if (!kk) fail("unknown node kind '" + kind + "'");
            n.kind = *kk;
            std::string opt;
            bool k_seen = false;
            while (ls >> opt) {
                if (opt.rfind("k=", 0) == 0) {
                    try {
                        n.k = std::stoi(opt.substr(2));
                    } catch (const std::exception&) {
                        fail("bad interval in '" + opt + "'");
                    }
                    k_seen = true;
                } else if (opt == "unmeasured") {
                    n.measured = false;
                } else {
                    fail("unknown option '" + opt + "'");
                }
            }
            if (needs_interval(n.kind) && !k_seen) fail(n.label + " requires k=<int>");
            if (!needs_interval(n.kind)) n.k = 0;
            if (n.kind != NodeKind::Covariate) n.measured = true;
            if (g.index_of(n.label) >= 0) fail("duplicate node " + n.label);
            g.nodes.push_back(std::move(n));
        } else if (word == "edge") {
            std::string a, b, det;
            if (!(ls >> a >> b)) fail("expected: edge <from> <to> [det]");
            GraphEdge e;
            e.from = g.index_of(a);
            e.to = g.index_of(b);
            if (e.from < 0) fail("unknown node " + a);
            if (e.to < 0) fail("unknown node " + b);
            if (ls >> det) {
                if (det != "det") fail("unknown edge option '" + det + "'");
                e.deterministic = true;
            }
            g.edges.push_back(e);
        } else {
            fail("unknown directive '" + word + "'");
        }
    }
    check_graph(g);
    return g;
}

CausalGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_graph(ss.str());
}

std::string emit_graph(const CausalGraph& g) {
    std::ostringstream os;
    for (const auto& n : g.nodes) {
        os << "node " << n.label << " " << kind_token(n.kind);
        if (needs_interval(n.kind)) os << " k=" << n.k;
        if (n.kind == NodeKind::Covariate && !n.measured) os << " unmeasured";
        os << "\n";
    }
    for (const auto& e : g.edges) {
        os << "edge " << g.nodes[static_cast<std::size_t>(e.from)].label << " "
           << g.nodes[static_cast<std::size_t>(e.to)].label;
        if (e.deterministic) os << " det";
        os << "\n";
    }
    return os.str();
}

void check_graph(const CausalGraph& g) {
    int n_treat = 0, n_ay = 0, n_ad = 0, n_az = 0;
    std::set<std::pair<int, int>> event_seen;  // (kind marker, k)
    for (const auto& n : g.nodes) {
        switch (n.kind) {
            case NodeKind::Treatment: ++n_treat; break;
            case NodeKind::ComponentAY: ++n_ay; break;
            case NodeKind::ComponentAD: ++n_ad; break;
            case NodeKind::ComponentAZ: ++n_az; break;
            case NodeKind::EventY:
            case NodeKind::EventD: {
                if (n.k < 1) throw ParseError("event node " + n.label + " needs k >= 1");
                int marker = n.kind == NodeKind::EventY ? 0 : 1;
                if (!event_seen.insert({marker, n.k}).second)
                    throw ParseError("two event nodes share interval " + std::to_string(n.k));
                break;
            }
            case NodeKind::Covariate:
                if (n.k < 0) throw ParseError("covariate " + n.label + " needs k >= 0");
                break;
        }
    }
    if (n_treat > 1 || n_ay > 1 || n_ad > 1 || n_az > 1)
        throw ParseError("at most one treatment node and one of each component kind");

    for (const auto& e : g.edges) {
        const auto& u = g.nodes[static_cast<std::size_t>(e.from)];
        const auto& v = g.nodes[static_cast<std::size_t>(e.to)];
        if (e.from == e.to) throw CycleDetected("self-loop at " + u.label);
        if (e.deterministic &&
            (u.kind != NodeKind::Treatment || !is_component(v.kind)))
            throw BadDeterministicEdge("deterministic edge " + u.label + " -> " + v.label +
                                       " must run from the treatment to a component");
        if (u.kind == NodeKind::Treatment && is_component(v.kind) && !e.deterministic)
            throw BadDeterministicEdge("treatment -> component edge must be deterministic");
        if (is_component(v.kind) && u.kind != NodeKind::Treatment)
            throw ParseError("edge into component " + v.label + " (components are assigned)");
        if (v.kind == NodeKind::Treatment && u.kind != NodeKind::Covariate)
            throw ParseError("only baseline covariates may point into the treatment");
        const long ru = rank_of(u), rv = rank_of(v);
        const bool same_interval_covs =
            u.kind == NodeKind::Covariate && v.kind == NodeKind::Covariate && u.k == v.k;
        if (ru > rv || (ru == rv && !same_interval_covs &&
                        !(u.kind == NodeKind::Treatment && is_component(v.kind))))
            throw ParseError("edge " + u.label + " -> " + v.label + " violates the time order");
    }

    // acyclicity via Kahn's algorithm
    std::vector<int> indeg(g.nodes.size(), 0);
    for (const auto& e : g.edges) ++indeg[static_cast<std::size_t>(e.to)];
    auto ch = g.children();
    std::deque<int> q;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (indeg[i] == 0) q.push_back(static_cast<int>(i));
    std::size_t seen = 0;
    while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        ++seen;
        for (int v : ch[static_cast<std::size_t>(u)])
            if (--indeg[static_cast<std::size_t>(v)] == 0) q.push_back(v);
    }
    if (seen != g.nodes.size()) throw CycleDetected("graph contains a cycle");
}

// ---------------------------------------------------------------------------
// G-transformation

CausalGraph g_transform(const CausalGraph& g) {
    if (!g.find_kind(NodeKind::ComponentAY) || !g.find_kind(NodeKind::ComponentAD))
        throw NoDecomposition("graph lacks the treatment components");
    auto a = g.find_kind(NodeKind::Treatment);
    CausalGraph out;
    std::vector<int> remap(g.nodes.size(), -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (a && static_cast<int>(i) == *a) continue;
        remap[i] = static_cast<int>(out.nodes.size());
        out.nodes.push_back(g.nodes[i]);
    }
    for (const auto& e : g.edges) {
        if (e.deterministic) continue;
        const int f = remap[static_cast<std::size_t>(e.from)];
        const int t = remap[static_cast<std::size_t>(e.to)];
        if (f < 0 || t < 0) continue;  // incident to A
        out.edges.push_back({f, t, false});
    }
    return out;
}

// ---------------------------------------------------------------------------
// d-separation with witness extraction

namespace {

std::vector<int> resolve(const CausalGraph& g, const std::set<std::string>& labels) {
    std::vector<int> out;
    for (const auto& l : labels) {
        int i = g.index_of(l);
        if (i < 0) throw UnknownNode("unknown node " + l);
        out.push_back(i);
    }
    return out;
}

}  // namespace

std::optional<std::vector<std::string>> d_connecting_path(const CausalGraph& g,
                                                          const std::set<std::string>& x,
                                                          const std::set<std::string>& y,
                                                          const std::set<std::string>& z) {
    const auto xs = resolve(g, x);
    const auto ys = resolve(g, y);
    const auto zs = resolve(g, z);
    for (const auto& l : x)
        if (y.count(l) || z.count(l)) throw Error("d-separation sets must be disjoint: " + l);
    for (const auto& l : y)
        if (z.count(l)) throw Error("d-separation sets must be disjoint: " + l);

    const std::size_t n = g.nodes.size();
    std::vector<char> in_z(n, 0), in_y(n, 0);
    for (int i : zs) in_z[static_cast<std::size_t>(i)] = 1;
    for (int i : ys) in_y[static_cast<std::size_t>(i)] = 1;

    const auto ch = g.children();
    const auto pa = g.parents();

    // nodes with a descendant (or themselves) in Z: ancestors of Z
    std::vector<char> anc_z(n, 0);
    {
        std::deque<int> q(zs.begin(), zs.end());
        for (int i : zs) anc_z[static_cast<std::size_t>(i)] = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            for (int p : pa[static_cast<std::size_t>(u)])
                if (!anc_z[static_cast<std::size_t>(p)]) {
                    anc_z[static_cast<std::size_t>(p)] = 1;
                    q.push_back(p);
                }
        }
    }

    // state: (node, arrived-along-edge-into-node?)
    struct State {
        int node;
        int head;  // 1 when the traversed edge points to node
    };
    std::vector<std::array<int, 2>> prev(n, {-2, -2});  // -2 unvisited, -1 start
    auto key = [](const State& s) { return s.head; };

    std::deque<State> q;
    auto visit = [&](State s, int from_code) {
        auto& slot = prev[static_cast<std::size_t>(s.node)][static_cast<std::size_t>(key(s))];
        if (slot != -2) return;
        slot = from_code;
        q.push_back(s);
    };
    // from_code encodes predecessor state: node*2 + head, or -1 for a source
    for (int s : xs) {
        for (int c : ch[static_cast<std::size_t>(s)]) visit({c, 1}, -1 - (s + 1) * 4);
        for (int p : pa[static_cast<std::size_t>(s)]) visit({p, 0}, -1 - (s + 1) * 4);
    }

    std::optional<State> hit;
    while (!q.empty() && !hit) {
        State cur = q.front();
        q.pop_front();
        const std::size_t u = static_cast<std::size_t>(cur.node);
        if (in_y[u]) {
            hit = cur;
            break;
        }
        const bool blocked_as_chain = in_z[u];
        if (cur.head == 1) {
            // arrived along an edge into u: may pass to children unless u in Z,
            // and to parents when u is an open collider
            if (!blocked_as_chain)
                for (int c : ch[u]) visit({c, 1}, cur.node * 2 + cur.head);
            if (anc_z[u])
                for (int p : pa[u]) visit({p, 0}, cur.node * 2 + cur.head);
        } else {
            if (!blocked_as_chain) {
                for (int c : ch[u]) visit({c, 1}, cur.node * 2 + cur.head);
                for (int p : pa[u]) visit({p, 0}, cur.node * 2 + cur.head);
            }
        }
    }
    if (!hit) return std::nullopt;

    std::vector<std::string> path;
    State cur = *hit;
    while (true) {
        path.push_back(g.nodes[static_cast<std::size_t>(cur.node)].label);
        int code = prev[static_cast<std::size_t>(cur.node)][static_cast<std::size_t>(cur.head)];
        if (code <= -1) {
            int src = -(code + 1) / 4 - 1;
            path.push_back(g.nodes[static_cast<std::size_t>(src)].label);
            break;
        }
        cur = {code / 2, code % 2};
    }
    std::reverse(path.begin(), path.end());
    return path;
}

bool d_separated(const CausalGraph& g, const std::set<std::string>& x,
                 const std::set<std::string>& y, const std::set<std::string>& z) {
    return !d_connecting_path(g, x, y, z).has_value();
}

// ---------------------------------------------------------------------------
// Isolation and Z partition

namespace {

// Directed reachability from `start`, never passing through `removed`.
std::vector<char> reach_avoiding(const CausalGraph& g, int start,
                                 const std::vector<char>& removed) {
    const auto ch = g.children();
    std::vector<char> seen(g.nodes.size(), 0);
    std::deque<int> q{start};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        for (int v : ch[static_cast<std::size_t>(u)]) {
            const auto vi = static_cast<std::size_t>(v);
            if (seen[vi] || removed[vi]) continue;
            seen[vi] = 1;
            q.push_back(v);
        }
    }
    return seen;
}

bool reaches_kind(const CausalGraph& g, const std::vector<char>& seen, NodeKind kind) {
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (seen[i] && g.nodes[i].kind == kind) return true;
    return false;
}

}  // namespace

IsolationClass check_isolation(const CausalGraph& g) {
    auto ay = g.find_kind(NodeKind::ComponentAY);
    auto ad = g.find_kind(NodeKind::ComponentAD);
    if (!ay || !ad) throw NoDecomposition("isolation requires both treatment components");

    // A_Y condition: no directed A_Y -> D path avoiding every Y node.
    std::vector<char> drop_y(g.nodes.size(), 0), drop_d(g.nodes.size(), 0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (g.nodes[i].kind == NodeKind::EventY) drop_y[i] = 1;
        if (g.nodes[i].kind == NodeKind::EventD) drop_d[i] = 1;
    }
    const bool ay_ok = !reaches_kind(g, reach_avoiding(g, *ay, drop_y), NodeKind::EventD);
    const bool ad_ok = !reaches_kind(g, reach_avoiding(g, *ad, drop_d), NodeKind::EventY);
    if (ay_ok && ad_ok) return IsolationClass::Full;
    if (ay_ok) return IsolationClass::AYPartial;
    if (ad_ok) return IsolationClass::ADPartial;
    return IsolationClass::None;
}

std::string to_string(IsolationClass c) {
    switch (c) {
        case IsolationClass::Full: return "full isolation";
        case IsolationClass::AYPartial: return "A_Y partial isolation";
        case IsolationClass::ADPartial: return "A_D partial isolation";
        case IsolationClass::None: return "no isolation";
    }
    return "?";
}

std::vector<std::string> zk_partition_nodes(const CausalGraph& g) {
    // covariate nodes that are ancestors of some event node
    const auto pa = g.parents();
    std::vector<char> anc(g.nodes.size(), 0);
    std::deque<int> q;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].kind == NodeKind::EventY || g.nodes[i].kind == NodeKind::EventD) {
            anc[i] = 1;
            q.push_back(static_cast<int>(i));
        }
    while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        for (int p : pa[static_cast<std::size_t>(u)])
            if (!anc[static_cast<std::size_t>(p)]) {
                anc[static_cast<std::size_t>(p)] = 1;
                q.push_back(p);
            }
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (anc[i] && g.nodes[i].kind == NodeKind::Covariate) out.push_back(g.nodes[i].label);
    std::sort(out.begin(), out.end(), [&g](const std::string& a, const std::string& b) {
        const auto& na = g.node(a);
        const auto& nb = g.node(b);
        return na.k != nb.k ? na.k < nb.k : a < b;
    });
    return out;
}

bool check_zk_partition(const CausalGraph& g, const NodeSplit& split) {
    auto ay = g.find_kind(NodeKind::ComponentAY);
    auto ad = g.find_kind(NodeKind::ComponentAD);
    if (!ay || !ad) throw NoDecomposition("Z partition requires both treatment components");

    const auto required = zk_partition_nodes(g);
    if (split.assignment.size() != required.size())
        throw IncompletePartition("split must cover exactly the event-ancestor covariates");
    for (const auto& label : required)
        if (!split.assignment.count(label))
            throw IncompletePartition("split misses node " + label);

    std::vector<char> block_ay(g.nodes.size(), 0), block_ad(g.nodes.size(), 0);
    for (const auto& [label, b] : split.assignment) {
        const int i = g.index_of(label);
        if (b == Block::AY)
            block_ay[static_cast<std::size_t>(i)] = 1;
        else
            block_ad[static_cast<std::size_t>(i)] = 1;
    }

    // A_Y side: remove Y nodes and A_Y-block nodes; A_Y must reach neither a
    // D node nor an A_D-block node.
    std::vector<char> removed(g.nodes.size(), 0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        removed[i] = (g.nodes[i].kind == NodeKind::EventY || block_ay[i]) ? 1 : 0;
    auto seen = reach_avoiding(g, *ay, removed);
    if (reaches_kind(g, seen, NodeKind::EventD)) return false;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (seen[i] && block_ad[i]) return false;

    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        removed[i] = (g.nodes[i].kind == NodeKind::EventD || block_ad[i]) ? 1 : 0;
    seen = reach_avoiding(g, *ad, removed);
    if (reaches_kind(g, seen, NodeKind::EventY)) return false;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (seen[i] && block_ay[i]) return false;
    return true;
}

std::optional<NodeSplit> find_zk_partition(const CausalGraph& g) {
    const auto nodes = zk_partition_nodes(g);
    if (nodes.size() > 20) throw TooManyCovariates("too many Z candidates to enumerate");
    const std::size_t m = nodes.size();
    for (std::size_t mask = 0; mask < (1u << m); ++mask) {
        NodeSplit s;
        for (std::size_t i = 0; i < m; ++i)
            s.assignment[nodes[i]] = (mask >> i) & 1 ? Block::AY : Block::AD;
        if (check_zk_partition(g, s)) return s;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Dismissible component conditions

std::vector<std::string> measured_covariate_nodes(const CausalGraph& g) {
    std::vector<std::string> out;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::Covariate && n.measured) out.push_back(n.label);
    std::sort(out.begin(), out.end(), [&g](const std::string& a, const std::string& b) {
        const auto& na = g.node(a);
        const auto& nb = g.node(b);
        return na.k != nb.k ? na.k < nb.k : a < b;
    });
    return out;
}

std::string DismissibleReport::to_string() const {
    auto one = [](const char* name, const ConditionResult& c) {
        std::string s = std::string(name) + ": " + (c.holds ? "holds" : "fails");
        if (!c.holds) {
            s += " at k=" + std::to_string(c.fail_k) + " via";
            for (const auto& n : c.witness) s += " " + n;
        }
        return s + "\n";
    };
    return one("cond_y  ", cond_y) + one("cond_d  ", cond_d) + one("cond_lay", cond_lay) +
           one("cond_lad", cond_lad);
}

DismissibleReport check_dismissible(const CausalGraph& g, const NodeSplit& l_partition) {
    const CausalGraph t = g_transform(g);
    const auto measured = measured_covariate_nodes(t);
    for (const auto& label : measured)
        if (!l_partition.assignment.count(label))
            throw IncompletePartition("partition misses measured covariate " + label);

    const std::string ay = t.nodes[static_cast<std::size_t>(*t.find_kind(NodeKind::ComponentAY))].label;
    const std::string ad = t.nodes[static_cast<std::size_t>(*t.find_kind(NodeKind::ComponentAD))].label;
    const int horizon = t.max_event_interval() - 1;  // K

    auto event_label = [&t](NodeKind kind, int m) -> std::optional<std::string> {
        for (const auto& n : t.nodes)
            if (n.kind == kind && n.k == m) return n.label;
        return std::nullopt;
    };
    auto events_through = [&](std::set<std::string>& dst, int last_d, int last_y) {
        for (int m = 1; m <= last_d; ++m)
            if (auto l = event_label(NodeKind::EventD, m)) dst.insert(*l);
        for (int m = 1; m <= last_y; ++m)
            if (auto l = event_label(NodeKind::EventY, m)) dst.insert(*l);
    };
    auto measured_through = [&](std::set<std::string>& dst, int last_k) {
        for (const auto& label : measured)
            if (t.node(label).k <= last_k) dst.insert(label);
    };
    auto block_at = [&](Block b, int k) {
        std::set<std::string> dst;
        for (const auto& label : measured)
            if (t.node(label).k == k && l_partition.assignment.at(label) == b) dst.insert(label);
        return dst;
    };

    DismissibleReport rep;
    auto run = [&](ConditionResult& res, const std::set<std::string>& x,
                   const std::set<std::string>& y, const std::set<std::string>& z, int k) {
        if (!res.holds || x.empty() || y.empty()) return;
        if (auto path = d_connecting_path(t, x, y, z)) {
            res.holds = false;
            res.fail_k = k;
            res.witness = *path;
        }
    };

    for (int k = 0; k <= horizon; ++k) {
        // event of interest at k+1 vs A_D
        {
            std::set<std::string> x{ad}, y, z{ay};
            if (auto l = event_label(NodeKind::EventY, k + 1)) y.insert(*l);
            events_through(z, k + 1, k);
            measured_through(z, k);
            run(rep.cond_y, x, y, z, k);
        }
        // competing event at k+1 vs A_Y
        {
            std::set<std::string> x{ay}, y, z{ad};
            if (auto l = event_label(NodeKind::EventD, k + 1)) y.insert(*l);
            events_through(z, k, k);
            measured_through(z, k);
            run(rep.cond_d, x, y, z, k);
        }
        // A_Y-side covariates at k vs A_D
        {
            std::set<std::string> x{ad}, z{ay};
            std::set<std::string> y = block_at(Block::AY, k);
            events_through(z, k, k);
            measured_through(z, k - 1);
            for (const auto& l : block_at(Block::AD, k)) z.insert(l);
            run(rep.cond_lay, x, y, z, k);
        }
        // A_D-side covariates at k vs A_Y
        {
            std::set<std::string> x{ay}, z{ad};
            std::set<std::string> y = block_at(Block::AD, k);
            events_through(z, k, k);
            measured_through(z, k - 1);
            run(rep.cond_lad, x, y, z, k);
        }
    }
    return rep;
}

std::vector<NodeSplit> search_partitions(const CausalGraph& g) {
    const auto measured = measured_covariate_nodes(g);
    if (measured.size() > 20)
        throw TooManyCovariates("partition search over " + std::to_string(measured.size()) +
                                " nodes");
    std::vector<NodeSplit> out;
    const std::size_t m = measured.size();
    for (std::size_t mask = 0; mask < (1u << m); ++mask) {
        NodeSplit s;
        for (std::size_t i = 0; i < m; ++i)
            s.assignment[measured[i]] = (mask >> i) & 1 ? Block::AY : Block::AD;
        if (check_dismissible(g, s).all_hold()) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace sepcr
