#pragma once

#include <random>
#include <string>
#include <vector>

#include "sepcr/causal_graph.hpp"
#include "sepcr/event_history.hpp"
#include "sepcr/oracle_sim.hpp"
#include "sepcr/weights.hpp"

namespace sepcr::test {

inline std::string fixture(const std::string& rel) {
    return std::string(FIXTURES_DIR) + "/" + rel;
}

// Hand-computed truths for the toy two-period law, as exact rationals.
// risk[regime][k] with regimes in the order (1,0), (0,0), (1,1), (0,1).
struct ToyTruth {
    int ay, ad;
    double risk0, risk1;
};
inline const std::vector<ToyTruth>& toy_truths() {
    static const std::vector<ToyTruth> t = {
        {1, 0, 7.0 / 32, 3325.0 / 8192},
        {0, 0, 7.0 / 64, 7847.0 / 32768},
        {1, 1, 3.0 / 16, 1533.0 / 4096},
        {0, 1, 3.0 / 32, 4077.0 / 16384},
    };
    return t;
}

// Saturated pooled-logistic formulas for the toy laws (two intervals, one
// binary time-varying covariate named l).
inline NuisanceFormulas toy_formulas(bool censored) {
    NuisanceFormulas f;
    f.y_hazard = "polyk(1) + A + A:k + Lk(l):k + A:Lk(l):k";
    f.d_hazard = "polyk(1) + A + A:k + Lk(l):k + A:Lk(l):k";
    if (censored) f.c_hazard = "polyk(1) + A + A:k + Lk(l):k + A:Lk(l):k";
    f.a_given_lad_past = "polyk(1) + Lk(l):k";
    f.a_given_past = "polyk(1)";
    f.a_given_full_l = "polyk(1) + Lk(l):k";
    f.partition.lad_block = {"l"};
    return f;
}

// Independent checker that a node sequence really is a path left unblocked
// by z: used to validate returned witnesses without trusting the search.
inline bool is_active_path(const CausalGraph& g, const std::vector<std::string>& path,
                           const std::set<std::string>& z) {
    if (path.size() < 2) return false;
    auto edge_dir = [&](const std::string& a, const std::string& b) -> int {
        // +1 for a->b, -1 for b->a, 0 if not adjacent
        const int ia = g.index_of(a), ib = g.index_of(b);
        for (const auto& e : g.edges) {
            if (e.from == ia && e.to == ib) return +1;
            if (e.from == ib && e.to == ia) return -1;
        }
        return 0;
    };
    // descendants including the node itself
    auto has_descendant_in_z = [&](const std::string& label) {
        std::vector<std::string> stack{label};
        std::set<std::string> seen{label};
        const auto ch = g.children();
        while (!stack.empty()) {
            std::string cur = stack.back();
            stack.pop_back();
            if (z.count(cur)) return true;
            for (int c : ch[static_cast<std::size_t>(g.index_of(cur))]) {
                const auto& lbl = g.nodes[static_cast<std::size_t>(c)].label;
                if (seen.insert(lbl).second) stack.push_back(lbl);
            }
        }
        return false;
    };
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
        if (edge_dir(path[i], path[i + 1]) == 0) return false;
    if (z.count(path.front()) || z.count(path.back())) return false;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        const int in = edge_dir(path[i - 1], path[i]);
        const int out = edge_dir(path[i], path[i + 1]);
        const bool collider = in == +1 && out == -1;
        if (collider) {
            if (!has_descendant_in_z(path[i])) return false;
        } else {
            if (z.count(path[i])) return false;
        }
    }
    return true;
}

// Random decomposition graphs (<= 12 nodes, two intervals) for the
// implication batteries relating splits, partitions and isolation.
inline CausalGraph random_decomposition_graph(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto chance = [&rng](double p) {
        return (static_cast<double>(rng() >> 11) * 0x1.0p-53) < p;
    };
    CausalGraph g;
    auto add_node = [&g](const std::string& label, NodeKind kind, int k, bool measured = true) {
        g.nodes.push_back({label, kind, k, measured});
        return static_cast<int>(g.nodes.size()) - 1;
    };
    auto add_edge = [&g](int from, int to, bool det = false) {
        g.edges.push_back({from, to, det});
    };

    const int a = add_node("A", NodeKind::Treatment, 0);
    const int ay = add_node("AY", NodeKind::ComponentAY, 0);
    const int ad = add_node("AD", NodeKind::ComponentAD, 0);
    add_edge(a, ay, true);
    add_edge(a, ad, true);

    const int horizon = chance(0.5) ? 1 : 2;
    std::vector<int> ynodes, dnodes;
    for (int m = 1; m <= horizon; ++m) {
        dnodes.push_back(add_node("D" + std::to_string(m), NodeKind::EventD, m));
        ynodes.push_back(add_node("Y" + std::to_string(m), NodeKind::EventY, m));
    }
    std::uniform_int_distribution<int> n_cov_dist(0, 4);
    const int n_cov = std::min(n_cov_dist(rng), 12 - static_cast<int>(g.nodes.size()));
    std::vector<int> covs;
    for (int c = 0; c < n_cov; ++c) {
        std::uniform_int_distribution<int> k_dist(0, horizon);
        const int k = k_dist(rng);
        covs.push_back(
            add_node("L" + std::to_string(c), NodeKind::Covariate, k, chance(0.75)));
    }

    auto maybe = [&](int from, int to, double p) {
        if (chance(p)) add_edge(from, to);
    };
    for (int m = 0; m < horizon; ++m) {
        maybe(dnodes[m], ynodes[m], 0.6);
        if (m + 1 < horizon) {
            maybe(dnodes[m], dnodes[m + 1], 0.8);
            maybe(ynodes[m], ynodes[m + 1], 0.8);
            maybe(ynodes[m], dnodes[m + 1], 0.5);
        }
    }
    for (int m = 0; m < horizon; ++m) {
        maybe(ay, ynodes[m], 0.7);
        maybe(ad, dnodes[m], 0.7);
        maybe(ay, dnodes[m], 0.06);  // direct isolation violations, occasionally
        maybe(ad, ynodes[m], 0.06);
    }
    for (std::size_t ci = 0; ci < covs.size(); ++ci) {
        const int c = covs[ci];
        const int ck = g.nodes[static_cast<std::size_t>(c)].k;
        if (ck >= 1) {
            maybe(ay, c, 0.3);
            maybe(ad, c, 0.3);
        }
        for (int m = 0; m < horizon; ++m) {
            if (ck <= m) {  // covariate precedes the interval-(m+1) events
                maybe(c, dnodes[m], 0.5);
                maybe(c, ynodes[m], 0.5);
            }
            if (ck == m + 1) {  // drawn after the events of its own interval
                maybe(dnodes[m], c, 0.3);
                maybe(ynodes[m], c, 0.3);
            }
        }
        for (std::size_t cj = ci + 1; cj < covs.size(); ++cj) {
            const int c2 = covs[cj];
            const int c2k = g.nodes[static_cast<std::size_t>(c2)].k;
            if (ck < c2k) maybe(c, c2, 0.25);
        }
    }
    check_graph(g);
    return g;
}

}  // namespace sepcr::test
