#include "medflow/graph.hpp"

#include <algorithm>

namespace medflow {

void augment_with_capability_edges(WorkflowPlan& plan, const Registry& registry) {
  std::vector<ToolCard> selected;
  std::set<std::string> seen;
  for (const TaskNode& n : plan.nodes) {
    if (!seen.insert(n.tool_id).second) continue;
    const ToolCard* card = registry.find(n.tool_id);
    if (!card) throw UnknownToolError("node '" + n.node_id + "' uses '" + n.tool_id + "'");
    selected.push_back(*card);
  }
  auto tool_edges = Registry::dependency_edges(selected);

  std::set<std::pair<std::string, std::string>> existing(plan.edges.begin(), plan.edges.end());
  for (const auto& [from_tool, to_tool] : tool_edges) {
    for (const TaskNode& a : plan.nodes) {
      if (a.tool_id != from_tool) continue;
      for (const TaskNode& b : plan.nodes) {
        if (b.tool_id != to_tool) continue;
        if (existing.insert({a.node_id, b.node_id}).second)
          plan.edges.emplace_back(a.node_id, b.node_id);
      }
    }
  }
}

std::size_t TaskGraph::index_of(const std::string& node_id) const {
  auto it = index_.find(node_id);
  if (it == index_.end()) throw PlanValidationError("unknown node '" + node_id + "'");
  return it->second;
}

namespace {

// One cycle through `start` in the leftover (cyclic) subgraph, for the error
// message. Every leftover node is on or upstream of a cycle, so a DFS that
// walks only leftover nodes must revisit its stack.
std::vector<std::string> find_cycle(const std::vector<TaskNode>& nodes,
                                    const std::vector<std::vector<std::size_t>>& succ,
                                    const std::vector<bool>& leftover) {
  std::size_t n = nodes.size();
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<std::size_t> stack;

  std::vector<std::string> cycle;
  auto dfs = [&](auto&& self, std::size_t v) -> bool {
    state[v] = 1;
    stack.push_back(v);
    for (std::size_t u : succ[v]) {
      if (!leftover[u]) continue;
      if (state[u] == 1) {
        auto it = std::find(stack.begin(), stack.end(), u);
        for (; it != stack.end(); ++it) cycle.push_back(nodes[*it].node_id);
        cycle.push_back(nodes[u].node_id);
        return true;
      }
      if (state[u] == 0 && self(self, u)) return true;
    }
    state[v] = 2;
    stack.pop_back();
    return false;
  };
  for (std::size_t v = 0; v < n; ++v)
    if (leftover[v] && state[v] == 0 && dfs(dfs, v)) break;
  return cycle;
}

std::string join_arrows(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += " -> ";
    out += ids[i];
  }
  return out;
}

}  // namespace

TaskGraph compile_plan(const WorkflowPlan& plan, const Registry& registry,
                       const std::set<std::string>& preexisting) {
  TaskGraph g;
  g.nodes_ = plan.nodes;

  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    const TaskNode& n = g.nodes_[i];
    if (n.node_id.empty()) throw PlanValidationError("node with empty id");
    if (!g.index_.emplace(n.node_id, i).second)
      throw PlanValidationError("duplicate node id '" + n.node_id + "'");
  }

  // Tools must resolve before anything else; the graph snapshots the cards.
  g.tools_.reserve(g.nodes_.size());
  for (const TaskNode& n : g.nodes_) {
    const ToolCard* card = registry.find(n.tool_id);
    if (!card) throw UnknownToolError("node '" + n.node_id + "' uses '" + n.tool_id + "'");
    g.tools_.push_back(*card);
  }

  // Output names are single-producer across the plan.
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    for (const std::string& out : g.nodes_[i].output_names) {
      auto [it, inserted] = producer.emplace(out, i);
      if (!inserted)
        throw PlanValidationError("output '" + out + "' produced by both '" +
                                  g.nodes_[it->second].node_id + "' and '" +
                                  g.nodes_[i].node_id + "'");
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [from, to] : plan.edges) {
    std::size_t a = g.index_of(from);
    std::size_t b = g.index_of(to);
    if (a == b) throw PlanValidationError("self edge on '" + from + "'");
    edges.emplace(a, b);
  }

  // Dataflow edges: producers precede consumers. Inputs with no producer
  // must already live in the store.
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    for (const std::string& in : g.nodes_[i].input_names) {
      auto it = producer.find(in);
      if (it == producer.end()) {
        if (!preexisting.count(in))
          throw MissingInputError("node '" + g.nodes_[i].node_id + "' reads '" + in +
                                  "' which nothing produces and the store lacks");
        continue;
      }
      if (it->second == i)
        throw CycleDetectedError("cycle: " + g.nodes_[i].node_id + " -> " +
                                 g.nodes_[i].node_id + " (consumes its own output '" +
                                 in + "')");
      edges.emplace(it->second, i);
    }
  }

  g.succ_.assign(g.nodes_.size(), {});
  g.pred_.assign(g.nodes_.size(), {});
  g.in_degree_.assign(g.nodes_.size(), 0);
  for (const auto& [a, b] : edges) {
    g.succ_[a].push_back(b);
    g.pred_[b].push_back(a);
    ++g.in_degree_[b];
  }
  g.edge_count_ = edges.size();

  // Kahn pass for acyclicity.
  std::vector<std::size_t> deg = g.in_degree_;
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < deg.size(); ++i)
    if (deg[i] == 0) queue.push_back(i);
  std::size_t removed = 0;
  while (!queue.empty()) {
    std::size_t v = queue.back();
    queue.pop_back();
    ++removed;
    for (std::size_t u : g.succ_[v])
      if (--deg[u] == 0) queue.push_back(u);
  }
  if (removed != g.nodes_.size()) {
    std::vector<bool> leftover(g.nodes_.size());
    for (std::size_t i = 0; i < deg.size(); ++i) leftover[i] = deg[i] > 0;
    std::vector<std::string> cycle = find_cycle(g.nodes_, g.succ_, leftover);
    throw CycleDetectedError("cycle: " + join_arrows(cycle));
  }
  return g;
}

WaveCursor::WaveCursor(const TaskGraph& graph)
    : graph_(graph),
      in_degree_(graph.in_degrees()),
      emitted_(graph.size(), false),
      remaining_(graph.size()) {}

std::vector<std::size_t> WaveCursor::next() {
  if (remaining_ == 0) return {};
  std::vector<std::size_t> wave;
  for (std::size_t i = 0; i < in_degree_.size(); ++i)
    if (!emitted_[i] && in_degree_[i] == 0) wave.push_back(i);
  if (wave.empty())
    throw StalledError(std::to_string(remaining_) +
                       " nodes remain but none are ready (cycle)");
  std::sort(wave.begin(), wave.end(), [&](std::size_t a, std::size_t b) {
    return graph_.node(a).node_id < graph_.node(b).node_id;
  });
  for (std::size_t v : wave) {
    emitted_[v] = true;
    --remaining_;
    for (std::size_t u : graph_.adjacency()[v]) {
      --in_degree_[u];
      ++decrements_;
    }
  }
  return wave;
}

CriticalPath critical_path(const TaskGraph& graph,
                           const std::map<std::string, double>& cost) {
  std::size_t n = graph.size();
  CriticalPath result;
  if (n == 0) return result;

  auto node_cost = [&](std::size_t i) {
    auto it = cost.find(graph.node(i).node_id);
    return it == cost.end() ? 1.0 : it->second;
  };

  // Topological order via the cursor, then a longest-path DP over it.
  std::vector<std::size_t> topo;
  topo.reserve(n);
  WaveCursor cursor(graph);
  for (;;) {
    std::vector<std::size_t> wave = cursor.next();
    if (wave.empty()) break;
    topo.insert(topo.end(), wave.begin(), wave.end());
  }

  std::vector<double> best(n);
  std::vector<std::ptrdiff_t> from(n, -1);
  for (std::size_t v : topo) {
    best[v] = node_cost(v);
    for (std::size_t p : graph.predecessors()[v]) {
      double via = best[p] + node_cost(v);
      if (via > best[v] || (via == best[v] && from[v] == -1)) {
        best[v] = via;
        from[v] = static_cast<std::ptrdiff_t>(p);
      }
    }
  }

  std::size_t end = 0;
  for (std::size_t v = 0; v < n; ++v)
    if (best[v] > best[end]) end = v;

  result.length = best[end];
  std::vector<std::string> rev;
  for (std::ptrdiff_t v = static_cast<std::ptrdiff_t>(end); v != -1; v = from[v])
    rev.push_back(graph.node(static_cast<std::size_t>(v)).node_id);
  result.path.assign(rev.rbegin(), rev.rend());
  return result;
}

}  // namespace medflow
