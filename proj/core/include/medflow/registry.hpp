#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medflow/errors.hpp"

namespace medflow {

class Store;

MEDFLOW_DEFINE_ERROR(DuplicateToolError, "DuplicateTool");
MEDFLOW_DEFINE_ERROR(InvalidCardError, "InvalidCard");
MEDFLOW_DEFINE_ERROR(NoCandidatesError, "NoCandidates");
MEDFLOW_DEFINE_ERROR(UnsatisfiedDependencyError, "UnsatisfiedDependency");

enum class TaskKind { Segmentation, Classification, Measurement, Analysis };
enum class Modality { Pathology, Radiology, Omics, Generic };

std::string task_kind_name(TaskKind k);
TaskKind task_kind_from(const std::string& s);
std::string modality_name(Modality m);
Modality modality_from(const std::string& s);

struct Capability {
  TaskKind kind = TaskKind::Analysis;
  Modality modality = Modality::Generic;
};

struct IoDecl {
  std::string name_pattern;  // semantic dataset name glob
  int rank = 0;              // expected rank, 0 = unconstrained
};

struct ToolCard {
  std::string tool_id;
  std::string version;  // dotted, semver-style
  Capability capability;
  std::vector<IoDecl> input_decls;
  std::vector<IoDecl> output_decls;
  std::vector<TaskKind> depends_on;  // capability kinds, never tool ids
  double perf_score = 0.5;           // in [0,1]
  std::string runner;                // "builtin:<name>" or "exec:<command line>"
};

struct CandidatePool {
  TaskKind kind = TaskKind::Analysis;
  Modality modality = Modality::Generic;
  std::vector<std::string> members;  // tool ids, best first
  std::string retrieved_at;
};

// Tool factory: holds model cards, answers capability queries with ranked
// candidate pools, and derives pairwise dependency edges for plan compilation.
// Registrations are serialized; lookups may run concurrently.
class Registry {
 public:
  Registry() = default;

  const ToolCard& register_tool(const ToolCard& card);

  // All cards matching the kind; a card with modality `generic` matches any
  // query and a `generic` query matches any card. Ordered by perf_score
  // descending, ties by ascending tool_id; one entry per tool_id (latest
  // version). Throws NoCandidates when nothing matches.
  CandidatePool lookup_candidates(TaskKind kind, Modality modality) const;

  // For each selected card C and each kind k in C.depends_on, one edge
  // (provider -> C.tool_id) per selected provider of kind k. Sorted, unique,
  // no self edges. Throws UnsatisfiedDependency if a kind has no provider.
  static std::vector<std::pair<std::string, std::string>> dependency_edges(
      std::span<const ToolCard> selected);

  // Sum of perf_score over every registered card.
  double aggregate_capability() const;

  const ToolCard* find(const std::string& tool_id) const;  // latest version
  const ToolCard* find(const std::string& tool_id, const std::string& version) const;
  std::vector<ToolCard> cards() const;
  std::size_t size() const;

  // Perf scores are owned by the feedback layer; this is its write hook.
  void update_perf_score(const std::string& tool_id, double score);

  // Cards persist into a store so workflows replay offline. Each card
  // becomes a Table-role dataset carrying the card serialization.
  void save_to_store(Store& store) const;
  static Registry load_from_store(const Store& store);

 private:
  void validate(const ToolCard& card) const;

  mutable std::mutex write_mu_;
  std::map<std::pair<std::string, std::string>, ToolCard> cards_;  // (id, version)
};

std::string serialize_card(const ToolCard& card);   // single-line JSON
ToolCard parse_card(const std::string& json_text);  // throws InvalidCard

}  // namespace medflow
