#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sepcr/errors.hpp"

namespace sepcr {

// Extended causal DAGs over a discrete-time competing-events process:
// treatment A, its components A_Y / A_D (optionally A_Z), event indicators
// Y_m / D_m per interval, and measured or unmeasured covariate nodes.

enum class NodeKind {
    Treatment,
    ComponentAY,
    ComponentAD,
    ComponentAZ,
    EventY,
    EventD,
    Covariate
};

struct GraphNode {
    std::string label;
    NodeKind kind = NodeKind::Covariate;
    int k = 0;            // interval (events: 1..M, covariates: 0..)
    bool measured = true;  // covariates only
};

struct GraphEdge {
    int from = 0;
    int to = 0;
    bool deterministic = false;  // treatment -> component only
};

struct CausalGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    int index_of(const std::string& label) const;  // -1 if absent
    const GraphNode& node(const std::string& label) const;
    std::optional<int> find_kind(NodeKind kind) const;  // first node of that kind
    int max_event_interval() const;                     // M; horizon K = M-1

    std::vector<std::vector<int>> children() const;
    std::vector<std::vector<int>> parents() const;
};

CausalGraph parse_graph(const std::string& text);
CausalGraph load_graph(const std::string& path);
std::string emit_graph(const CausalGraph& g);

// Checks all structural invariants (acyclicity, time order, deterministic
// edge placement, node uniqueness); throws on violation.
void check_graph(const CausalGraph& g);

// Removes A and every deterministic edge: the graph of the hypothetical
// trial where the components are assigned directly. Requires both
// components; a graph already lacking A passes through unchanged.
CausalGraph g_transform(const CausalGraph& g);

bool d_separated(const CausalGraph& g, const std::set<std::string>& x,
                 const std::set<std::string>& y, const std::set<std::string>& z);

// Same test, returning one unblocked path (node labels) when connected.
std::optional<std::vector<std::string>> d_connecting_path(const CausalGraph& g,
                                                          const std::set<std::string>& x,
                                                          const std::set<std::string>& y,
                                                          const std::set<std::string>& z);

enum class IsolationClass { Full, AYPartial, ADPartial, None };
std::string to_string(IsolationClass c);

// Classifies by directed-path reachability: the A_Y condition holds when
// every directed path from A_Y to a D node passes through a Y node, and the
// A_D condition holds with the roles of Y and D exchanged.
IsolationClass check_isolation(const CausalGraph& g);

enum class Block { AY, AD };

// Assignment of covariate nodes to the A_Y-side or A_D-side block,
// keyed by node label.
struct NodeSplit {
    std::map<std::string, Block> assignment;
};

// Covariate nodes that are ancestors of some event node: the candidates
// for a Z split (measured or not).
std::vector<std::string> zk_partition_nodes(const CausalGraph& g);

// True when both path conditions of a Z partition hold for the given split:
// paths from A_Y may reach the D process or the A_D-side block only through
// Y nodes or A_Y-side nodes, and symmetrically for A_D.
bool check_zk_partition(const CausalGraph& g, const NodeSplit& split);

// Convenience: does any split of the Z candidates pass? (exhaustive)
std::optional<NodeSplit> find_zk_partition(const CausalGraph& g);

// Measured covariate node labels, ordered by (k, label): the domain of an
// LPartition.
std::vector<std::string> measured_covariate_nodes(const CausalGraph& g);

struct ConditionResult {
    bool holds = true;
    int fail_k = -1;
    std::vector<std::string> witness;  // unblocked path in the transformed graph
};

struct DismissibleReport {
    ConditionResult cond_y;    // event-of-interest hazard independent of A_D
    ConditionResult cond_d;    // competing-event hazard independent of A_Y
    ConditionResult cond_lay;  // A_Y-side covariate law independent of A_D
    ConditionResult cond_lad;  // A_D-side covariate law independent of A_Y
    bool all_hold() const {
        return cond_y.holds && cond_d.holds && cond_lay.holds && cond_lad.holds;
    }
    std::string to_string() const;
};

// Evaluates the four conditional independencies on the transformed graph,
// conditioning on the event nodes named by the event-status restrictions
// and on the measured covariate history.
DismissibleReport check_dismissible(const CausalGraph& g, const NodeSplit& l_partition);

// All measured-covariate partitions passing check_dismissible, in
// deterministic order. 2^m enumeration; m capped at 20.
std::vector<NodeSplit> search_partitions(const CausalGraph& g);

}  // namespace sepcr
