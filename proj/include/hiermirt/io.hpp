#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiermirt/chain.hpp"
#include "hiermirt/model.hpp"
#include "hiermirt/simulator.hpp"

namespace hiermirt::io {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

// Dataset CSV: header `subject,<item names>`, one row per subject, empty
// cells missing.
void write_responses_csv(const fs::path& path, const ResponseMatrix& responses, const std::vector<std::string>& items);
struct Dataset {
  ResponseMatrix responses;
  std::vector<std::string> item_names;
  std::vector<std::string> subject_ids;
};
Dataset read_responses_csv(const fs::path& path);

// Item file: {"echelon": bool, "items": [{"name", "kind", "categories",
// "loads", "zeros", "guessing", optional "a", "b", "c", "thresholds"}]}.
// Trait indices are 1-based; "a" is the full level-1 row.
Json items_to_json(const ItemBank& items, bool with_parameters);
struct ItemFile {
  ItemBank items;
  bool has_parameters = false;
};
ItemFile items_from_json(const Json& j, int level1_traits);

// Hierarchy file: {"levels": [Q_1, ..., Q_K], "parent": [[...], ...]} with
// 1-based parents; an entry may be a list of parents, which the validator
// reports as a trait with two non-null loadings.
Json hierarchy_to_json(const HierarchySpec& spec);
HierarchySpec hierarchy_from_json(const Json& j);

Json loadings_to_json(const Loadings& l);
Loadings loadings_from_json(const Json& j);

// Truth bundle: {"lambda", "items": <item file>, "theta": [level][trait][subject]}.
Json truth_to_json(const SimulationTruth& truth, const HierarchySpec& spec);
SimulationTruth truth_from_json(const Json& j, const HierarchySpec& spec);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// Stored draws of a trace group: header of column names, one row per draw.
void write_trace_csv(const fs::path& path, const TraceGroup& group);
TraceGroup read_trace_csv(const fs::path& path, const std::string& name);

/// Simple CSV table writer with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const;
};

}  // namespace hiermirt::io
