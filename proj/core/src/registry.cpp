#include "medflow/registry.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "medflow/store.hpp"
#include "medflow/util.hpp"

namespace medflow {

using nlohmann::json;

std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Segmentation: return "segmentation";
    case TaskKind::Classification: return "classification";
    case TaskKind::Measurement: return "measurement";
    case TaskKind::Analysis: return "analysis";
  }
  return "?";
}

TaskKind task_kind_from(const std::string& s) {
  if (s == "segmentation") return TaskKind::Segmentation;
  if (s == "classification") return TaskKind::Classification;
  if (s == "measurement") return TaskKind::Measurement;
  if (s == "analysis") return TaskKind::Analysis;
  throw InvalidCardError("unknown capability kind '" + s + "'");
}

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::Pathology: return "pathology";
    case Modality::Radiology: return "radiology";
    case Modality::Omics: return "omics";
    case Modality::Generic: return "generic";
  }
  return "?";
}

Modality modality_from(const std::string& s) {
  if (s == "pathology") return Modality::Pathology;
  if (s == "radiology") return Modality::Radiology;
  if (s == "omics") return Modality::Omics;
  if (s == "generic") return Modality::Generic;
  throw InvalidCardError("unknown modality '" + s + "'");
}

void Registry::validate(const ToolCard& card) const {
  if (card.tool_id.empty()) throw InvalidCardError("empty tool_id");
  if (card.version.empty()) throw InvalidCardError("empty version for '" + card.tool_id + "'");
  if (!(card.perf_score >= 0.0 && card.perf_score <= 1.0))
    throw InvalidCardError("perf_score " + std::to_string(card.perf_score) +
                           " outside [0,1] for '" + card.tool_id + "'");
  if (card.runner.empty())
    throw InvalidCardError("no runner binding for '" + card.tool_id + "'");
  if (card.runner.rfind("builtin:", 0) != 0 && card.runner.rfind("exec:", 0) != 0)
    throw InvalidCardError("runner must be 'builtin:<name>' or 'exec:<command>', got '" +
                           card.runner + "'");
}

const ToolCard& Registry::register_tool(const ToolCard& card) {
  validate(card);
  std::lock_guard lk(write_mu_);
  auto key = std::make_pair(card.tool_id, card.version);
  auto [it, inserted] = cards_.emplace(key, card);
  if (!inserted)
    throw DuplicateToolError(card.tool_id + "@" + card.version + " already registered");
  return it->second;
}

CandidatePool Registry::lookup_candidates(TaskKind kind, Modality modality) const {
  std::lock_guard lk(write_mu_);
  // Latest version per tool id.
  std::map<std::string, const ToolCard*> latest;
  for (const auto& [key, card] : cards_) {
    if (card.capability.kind != kind) continue;
    bool modality_ok = card.capability.modality == modality ||
                       card.capability.modality == Modality::Generic ||
                       modality == Modality::Generic;
    if (!modality_ok) continue;
    auto it = latest.find(card.tool_id);
    if (it == latest.end() || version_less(it->second->version, card.version))
      latest[card.tool_id] = &card;
  }
  if (latest.empty())
    throw NoCandidatesError("no tools for " + task_kind_name(kind) + "/" +
                            modality_name(modality));
  std::vector<const ToolCard*> order;
  order.reserve(latest.size());
  for (const auto& [id, card] : latest) order.push_back(card);
  std::stable_sort(order.begin(), order.end(), [](const ToolCard* a, const ToolCard* b) {
    if (a->perf_score != b->perf_score) return a->perf_score > b->perf_score;
    return a->tool_id < b->tool_id;
  });
  CandidatePool pool;
  pool.kind = kind;
  pool.modality = modality;
  pool.retrieved_at = utc_now();
  for (const ToolCard* c : order) pool.members.push_back(c->tool_id);
  return pool;
}

std::vector<std::pair<std::string, std::string>> Registry::dependency_edges(
    std::span<const ToolCard> selected) {
  std::set<std::pair<std::string, std::string>> edges;
  for (const ToolCard& consumer : selected) {
    for (TaskKind k : consumer.depends_on) {
      bool satisfied = false;
      for (const ToolCard& provider : selected) {
        if (provider.tool_id == consumer.tool_id) continue;
        if (provider.capability.kind != k) continue;
        edges.emplace(provider.tool_id, consumer.tool_id);
        satisfied = true;
      }
      if (!satisfied)
        throw UnsatisfiedDependencyError("'" + consumer.tool_id + "' needs a " +
                                         task_kind_name(k) + " provider");
    }
  }
  return {edges.begin(), edges.end()};
}

double Registry::aggregate_capability() const {
  std::lock_guard lk(write_mu_);
  double sum = 0.0;
  for (const auto& [key, card] : cards_) sum += card.perf_score;
  return sum;
}

const ToolCard* Registry::find(const std::string& tool_id) const {
  std::lock_guard lk(write_mu_);
  const ToolCard* best = nullptr;
  for (const auto& [key, card] : cards_) {
    if (card.tool_id != tool_id) continue;
    if (!best || version_less(best->version, card.version)) best = &card;
  }
  return best;
}

const ToolCard* Registry::find(const std::string& tool_id, const std::string& version) const {
  std::lock_guard lk(write_mu_);
  auto it = cards_.find(std::make_pair(tool_id, version));
  return it == cards_.end() ? nullptr : &it->second;
}

std::vector<ToolCard> Registry::cards() const {
  std::lock_guard lk(write_mu_);
  std::vector<ToolCard> out;
  out.reserve(cards_.size());
  for (const auto& [key, card] : cards_) out.push_back(card);
  return out;
}

std::size_t Registry::size() const {
  std::lock_guard lk(write_mu_);
  return cards_.size();
}

void Registry::update_perf_score(const std::string& tool_id, double score) {
  if (!(score >= 0.0 && score <= 1.0))
    throw InvalidCardError("perf_score " + std::to_string(score) + " outside [0,1]");
  std::lock_guard lk(write_mu_);
  for (auto& [key, card] : cards_)
    if (card.tool_id == tool_id) card.perf_score = score;
}

std::string serialize_card(const ToolCard& card) {
  json decls_in = json::array();
  for (const IoDecl& d : card.input_decls) decls_in.push_back({d.name_pattern, d.rank});
  json decls_out = json::array();
  for (const IoDecl& d : card.output_decls) decls_out.push_back({d.name_pattern, d.rank});
  json deps = json::array();
  for (TaskKind k : card.depends_on) deps.push_back(task_kind_name(k));
  json j = {{"tool_id", card.tool_id},
            {"version", card.version},
            {"capability", task_kind_name(card.capability.kind)},
            {"modality", modality_name(card.capability.modality)},
            {"inputs", decls_in},
            {"outputs", decls_out},
            {"depends_on", deps},
            {"perf_score", card.perf_score},
            {"runner", card.runner}};
  return j.dump();
}

ToolCard parse_card(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidCardError(std::string("card is not valid JSON: ") + e.what());
  }
  static const std::set<std::string> known = {"tool_id", "version",  "capability",
                                              "modality", "inputs",  "outputs",
                                              "depends_on", "perf_score", "runner"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw InvalidCardError("unknown card key '" + k + "'");
  ToolCard card;
  try {
    card.tool_id = j.at("tool_id").get<std::string>();
    card.version = j.value("version", std::string("1"));
    card.capability.kind = task_kind_from(j.at("capability").get<std::string>());
    card.capability.modality = modality_from(j.value("modality", std::string("generic")));
    for (const json& d : j.value("inputs", json::array()))
      card.input_decls.push_back({d.at(0).get<std::string>(), d.at(1).get<int>()});
    for (const json& d : j.value("outputs", json::array()))
      card.output_decls.push_back({d.at(0).get<std::string>(), d.at(1).get<int>()});
    for (const json& d : j.value("depends_on", json::array()))
      card.depends_on.push_back(task_kind_from(d.get<std::string>()));
    card.perf_score = j.value("perf_score", 0.5);
    card.runner = j.at("runner").get<std::string>();
  } catch (const json::exception& e) {
    throw InvalidCardError(std::string("bad card field: ") + e.what());
  }
  return card;
}

void Registry::save_to_store(Store& store) const {
  std::vector<ToolCard> all = cards();
  for (const ToolCard& card : all) {
    std::string name = "table_toolcard_" + sanitize_name(card.tool_id) + "_" +
                       sanitize_name(card.version);
    std::vector<double> cell = {card.perf_score};
    std::uint64_t shape[2] = {1, 1};
    store.write_dataset(name, DType::F64, shape, pack_f64(cell),
                        {{"card", serialize_card(card)}}, "registry");
  }
}

Registry Registry::load_from_store(const Store& store) {
  Registry reg;
  for (const DatasetInfo& info : store.list_datasets("table_toolcard_*")) {
    auto it = info.attrs.find("card");
    if (it == info.attrs.end())
      throw InvalidCardError("dataset '" + info.name + "' has no card attr");
    reg.register_tool(parse_card(it->second));
  }
  return reg;
}

}  // namespace medflow
