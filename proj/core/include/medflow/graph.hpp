#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medflow/errors.hpp"
#include "medflow/registry.hpp"

namespace medflow {

MEDFLOW_DEFINE_ERROR(PlanValidationError, "PlanValidation");
MEDFLOW_DEFINE_ERROR(CycleDetectedError, "CycleDetected");
MEDFLOW_DEFINE_ERROR(MissingInputError, "MissingInput");
MEDFLOW_DEFINE_ERROR(UnknownToolError, "UnknownTool");
MEDFLOW_DEFINE_ERROR(StalledError, "Stalled");

struct TaskNode {
  std::string node_id;
  std::string tool_id;
  std::map<std::string, std::string> params;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
};

struct WorkflowPlan {
  std::vector<TaskNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges;  // node_id -> node_id
};

// Adds node-level edges implied by tool capability dependencies: for every
// (provider tool -> consumer tool) pair from Registry::dependency_edges, an
// edge between each pair of nodes bound to those tools. Idempotent.
void augment_with_capability_edges(WorkflowPlan& plan, const Registry& registry);

// Compiled, validated DAG. Immutable after compile_plan; wave iteration
// happens on a WaveCursor which owns the mutable in-degree copy.
class TaskGraph {
 public:
  std::size_t size() const { return nodes_.size(); }
  const TaskNode& node(std::size_t i) const { return nodes_[i]; }
  const ToolCard& tool(std::size_t i) const { return tools_[i]; }
  std::size_t index_of(const std::string& node_id) const;  // throws PlanValidation

  const std::vector<std::vector<std::size_t>>& adjacency() const { return succ_; }
  const std::vector<std::vector<std::size_t>>& predecessors() const { return pred_; }
  const std::vector<std::size_t>& in_degrees() const { return in_degree_; }
  std::size_t edge_count() const { return edge_count_; }

 private:
  friend TaskGraph compile_plan(const WorkflowPlan&, const Registry&,
                                const std::set<std::string>&);
  std::vector<TaskNode> nodes_;
  std::vector<ToolCard> tools_;
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
  std::vector<std::size_t> in_degree_;
  std::size_t edge_count_ = 0;
  std::map<std::string, std::size_t> index_;
};

// Validates the plan, resolves tools, adds dataflow edges (the producer of
// each input name precedes its consumer), computes in-degrees, and rejects
// cycles (reporting one offending cycle) and inputs nobody produces that are
// also absent from `preexisting` store names.
TaskGraph compile_plan(const WorkflowPlan& plan, const Registry& registry,
                       const std::set<std::string>& preexisting = {});

// Kahn frontier iterator. next() returns every remaining zero-in-degree node
// (sorted by node_id) and decrements the in-degree of their successors.
class WaveCursor {
 public:
  explicit WaveCursor(const TaskGraph& graph);
  std::vector<std::size_t> next();  // empty once exhausted; throws Stalled on cycle
  std::size_t remaining() const { return remaining_; }
  std::uint64_t decrements() const { return decrements_; }

 private:
  const TaskGraph& graph_;
  std::vector<std::size_t> in_degree_;
  std::vector<bool> emitted_;
  std::size_t remaining_;
  std::uint64_t decrements_ = 0;
};

struct CriticalPath {
  double length = 0.0;              // total node cost along the path
  std::vector<std::string> path;    // node ids, source to sink
};

// Maximal total-cost path; cost is per node. With unit costs the length
// equals the longest chain's node count, which equals the wave count.
CriticalPath critical_path(const TaskGraph& graph,
                           const std::map<std::string, double>& cost);

}  // namespace medflow
