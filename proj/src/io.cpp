#include "hiermirt/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hiermirt/hierarchy.hpp"

namespace hiermirt::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  out.push_back(cell);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\"");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) throw InputError(where + ": not a number: '" + text + "'");
  return v;
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + "." + key + ": missing required field");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(where + "." + key + ": type mismatch");
  }
}

std::vector<int> one_based(const Json& j, const std::string& where, int limit) {
  if (!j.is_array()) throw InputError(where + ": expected a list of trait indices");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw InputError(where + ": trait indices must be integers");
    const int q = v.get<int>();
    if (q < 1 || q > limit) throw InputError(where + ": trait index " + std::to_string(q) + " outside 1.." + std::to_string(limit));
    out.push_back(q - 1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from(const Json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected a list of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(where + ": type mismatch");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

std::string CsvTable::str() const {
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
  if (!f) throw InputError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

void write_responses_csv(const fs::path& path, const ResponseMatrix& r, const std::vector<std::string>& items) {
  if (static_cast<int>(items.size()) != r.items()) throw InputError("write_responses_csv: one name per item");
  std::string out = "subject";
  for (const auto& n : items) out += "," + n;
  out += '\n';
  for (int j = 0; j < r.subjects(); ++j) {
    out += std::to_string(j + 1);
    for (int i = 0; i < r.items(); ++i) {
      out += ',';
      if (r.cells(i, j) != kMissing) out += std::to_string(r.cells(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

Dataset read_responses_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || trim(header[0]) != "subject")
    throw InputError(path.string() + ": header must start with 'subject' followed by item columns");
  Dataset d;
  for (std::size_t k = 1; k < header.size(); ++k) d.item_names.push_back(trim(header[k]));
  std::vector<std::vector<int>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    d.subject_ids.push_back(trim(cells[0]));
    std::vector<int> row;
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const auto t = trim(cells[k]);
      if (t.empty()) {
        row.push_back(kMissing);
        continue;
      }
      int v = 0;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size() || v < 0)
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": cell '" + t +
                         "' is not a non-negative integer score");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const int items = static_cast<int>(d.item_names.size());
  d.responses.cells = IntMatrix::Constant(items, static_cast<int>(rows.size()), kMissing);
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (int i = 0; i < items; ++i) d.responses.cells(i, static_cast<int>(j)) = rows[j][i];
  return d;
}

// ---------------------------------------------------------------------------

Json items_to_json(const ItemBank& items, bool with_parameters) {
  Json list = Json::array();
  for (int i = 0; i < items.size(); ++i) {
    const auto& s = items.specs[i];
    Json it;
    it["name"] = s.name;
    it["kind"] = items.is_graded(i) ? "graded" : "dichotomous";
    it["categories"] = s.categories;
    std::vector<int> loads;
    for (int q : s.loads) loads.push_back(q + 1);
    for (int q : s.zeros) loads.push_back(q + 1);
    std::sort(loads.begin(), loads.end());
    it["loads"] = loads;
    std::vector<int> zeros;
    for (int q : s.zeros) zeros.push_back(q + 1);
    it["zeros"] = zeros;
    it["guessing"] = s.guessing;
    if (with_parameters) {
      it["a"] = vector_json(items.a.row(i).transpose());
      if (items.is_graded(i)) {
        it["thresholds"] = vector_json(items.thresholds[i]);
      } else {
        it["b"] = items.b(i);
        it["c"] = items.c(i);
      }
    }
    list.push_back(std::move(it));
  }
  Json out;
  out["echelon"] = false;
  out["items"] = std::move(list);
  return out;
}

ItemFile items_from_json(const Json& j, int q1) {
  if (!j.is_object() || !j.contains("items") || !j["items"].is_array())
    throw InputError("items: expected an object with an 'items' list");
  for (const auto& [k, v] : j.items())
    if (k != "items" && k != "echelon") throw InputError("items." + k + ": unknown key");
  const bool echelon = j.contains("echelon") ? get<bool>(j, "echelon", "items") : false;
  std::vector<ItemSpec> specs;
  const auto& list = j["items"];
  std::vector<std::optional<Json>> params;
  int with = 0;
  for (std::size_t n = 0; n < list.size(); ++n) {
    const auto& it = list[n];
    const std::string where = "items[" + std::to_string(n) + "]";
    if (!it.is_object()) throw InputError(where + ": expected an object");
    static const char* known[] = {"name", "kind", "categories", "loads", "zeros", "guessing", "a", "b", "c", "thresholds"};
    for (const auto& [k, v] : it.items())
      if (std::find_if(std::begin(known), std::end(known), [&](const char* s) { return k == s; }) == std::end(known))
        throw InputError(where + "." + k + ": unknown key");
    ItemSpec s;
    s.name = it.contains("name") ? get<std::string>(it, "name", where) : "item_" + std::to_string(n + 1);
    const auto kind = get<std::string>(it, "kind", where);
    if (kind == "dichotomous") s.kind = ItemKind::dichotomous;
    else if (kind == "graded") s.kind = ItemKind::graded;
    else throw InputError(where + ".kind: expected 'dichotomous' or 'graded'");
    s.categories = it.contains("categories") ? get<int>(it, "categories", where) : 2;
    if (!it.contains("loads")) throw InputError(where + ".loads: missing required field");
    s.loads = one_based(it["loads"], where + ".loads", q1);
    if (it.contains("zeros")) s.zeros = one_based(it["zeros"], where + ".zeros", q1);
    std::vector<int> free;
    for (int q : s.loads)
      if (!std::binary_search(s.zeros.begin(), s.zeros.end(), q)) free.push_back(q);
    s.loads = free;
    s.guessing = it.contains("guessing") ? get<bool>(it, "guessing", where) : false;
    const bool has = it.contains("a");
    with += has ? 1 : 0;
    params.push_back(has ? std::optional<Json>(it) : std::nullopt);
    specs.push_back(std::move(s));
  }
  if (with != 0 && with != static_cast<int>(list.size()))
    throw InputError("items: parameters must be given for every item or for none");
  if (echelon) apply_echelon_restriction(specs, q1);

  ItemFile out;
  out.items = ItemBank::from_specs(std::move(specs), q1);
  out.has_parameters = with > 0;
  auto& bank = out.items;
  for (int i = 0; out.has_parameters && i < bank.size(); ++i) {
    const Json& it = *params[i];
    const std::string where = "items[" + std::to_string(i) + "]";
    const Vector a = vector_from(it["a"], where + ".a");
    if (a.size() != q1) throw InputError(where + ".a: expected " + std::to_string(q1) + " entries");
    bank.a.row(i) = a.transpose();
    if (bank.is_graded(i)) {
      if (!it.contains("thresholds")) throw InputError(where + ".thresholds: missing required field");
      bank.thresholds[i] = snap_thresholds(vector_from(it["thresholds"], where + ".thresholds"));
    } else {
      bank.b(i) = get<double>(it, "b", where);
      bank.c(i) = it.contains("c") ? get<double>(it, "c", where) : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Json hierarchy_to_json(const HierarchySpec& spec) {
  Json out;
  out["levels"] = spec.traits;
  Json parents = Json::array();
  for (const auto& level : spec.parent) {
    std::vector<int> p;
    for (int q : level) p.push_back(q + 1);
    parents.push_back(p);
  }
  out["parent"] = parents;
  return out;
}

HierarchySpec hierarchy_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("hierarchy: expected an object");
  for (const auto& [k, v] : j.items())
    if (k != "levels" && k != "parent") throw InputError("hierarchy." + k + ": unknown key");
  const auto levels = get<std::vector<int>>(j, "levels", "hierarchy");
  if (levels.empty()) throw InputError("hierarchy.levels: at least one level required");
  for (int q : levels)
    if (q < 1) throw InputError("hierarchy.levels: trait counts must be positive");
  const Json parent = j.contains("parent") ? j["parent"] : Json::array();
  if (!parent.is_array() || parent.size() + 1 != levels.size())
    throw InputError("hierarchy.parent: expected one list per level below the top");

  HierarchyPattern pattern;
  pattern.traits = levels;
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const std::string where = "hierarchy.parent[" + std::to_string(k) + "]";
    if (!parent[k].is_array() || static_cast<int>(parent[k].size()) != levels[k])
      throw InputError(where + ": expected " + std::to_string(levels[k]) + " entries");
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> p =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(levels[k], levels[k + 1], false);
    for (int q = 0; q < levels[k]; ++q) {
      const Json& e = parent[k][q];
      const Json list = e.is_array() ? e : Json::array({e});
      for (const auto& v : list) {
        if (!v.is_number_integer()) throw InputError(where + ": type mismatch");
        const int r = v.get<int>();
        if (r < 1 || r > levels[k + 1])
          throw InputError(where + ": parent " + std::to_string(r) + " outside 1.." + std::to_string(levels[k + 1]));
        p(q, r - 1) = true;
      }
    }
    pattern.pattern.push_back(std::move(p));
  }
  return hierarchy_from_pattern(pattern);
}

Json loadings_to_json(const Loadings& l) {
  Json out = Json::array();
  for (const auto& v : l) out.push_back(vector_json(v));
  return out;
}

Loadings loadings_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("lambda: expected a list of per-level lists");
  Loadings out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(vector_from(j[k], "lambda[" + std::to_string(k) + "]"));
  return out;
}

// ---------------------------------------------------------------------------

Json truth_to_json(const SimulationTruth& truth, const HierarchySpec& spec) {
  Json out;
  out["lambda"] = loadings_to_json(truth.lambda);
  out["items"] = items_to_json(truth.items, true)["items"];
  Json theta = Json::array();
  for (int k = 0; k < spec.levels(); ++k) {
    Json level = Json::array();
    for (Eigen::Index q = 0; q < truth.traits.theta[k].rows(); ++q)
      level.push_back(vector_json(truth.traits.theta[k].row(q).transpose()));
    theta.push_back(std::move(level));
  }
  out["theta"] = std::move(theta);
  return out;
}

SimulationTruth truth_from_json(const Json& j, const HierarchySpec& spec) {
  if (!j.is_object()) throw InputError("truth: expected an object");
  SimulationTruth t;
  if (!j.contains("lambda")) throw InputError("truth.lambda: missing required field");
  t.lambda = loadings_from_json(j["lambda"]);
  validate_loadings(spec, t.lambda);
  if (!j.contains("items")) throw InputError("truth.items: missing required field");
  Json wrapped;
  wrapped["items"] = j["items"];
  t.items = items_from_json(wrapped, spec.traits[0]).items;
  if (!j.contains("theta") || !j["theta"].is_array() || static_cast<int>(j["theta"].size()) != spec.levels())
    throw InputError("truth.theta: expected one list per level");
  for (int k = 0; k < spec.levels(); ++k) {
    const auto& level = j["theta"][k];
    if (!level.is_array() || static_cast<int>(level.size()) != spec.traits[k])
      throw InputError("truth.theta[" + std::to_string(k) + "]: expected one row per trait");
    Matrix m;
    for (int q = 0; q < spec.traits[k]; ++q) {
      const Vector row = vector_from(level[q], "truth.theta");
      if (q == 0) m.resize(spec.traits[k], row.size());
      if (row.size() != m.cols()) throw InputError("truth.theta: ragged rows");
      m.row(q) = row.transpose();
    }
    t.traits.theta.push_back(std::move(m));
  }
  return t;
}

// ---------------------------------------------------------------------------

void write_trace_csv(const fs::path& path, const TraceGroup& g) {
  std::string out;
  for (std::size_t k = 0; k < g.columns.size(); ++k) out += (k ? "," : "") + g.columns[k];
  out += '\n';
  for (Eigen::Index r = 0; r < g.draws.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.draws.cols(); ++c) {
      if (c) out += ',';
      out += format_double(g.draws(r, c));
    }
    out += '\n';
  }
  write_text(path, out);
}

TraceGroup read_trace_csv(const fs::path& path, const std::string& name) {
  std::istringstream in(read_text(path));
  std::string line;
  TraceGroup g;
  g.name = name;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty trace file");
  g.columns = split_csv_line(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != g.columns.size()) throw InputError(path.string() + ": ragged trace row");
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_double(c, path.string()));
    rows.push_back(std::move(r));
  }
  g.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(g.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < g.columns.size(); ++c)
      g.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return g;
}

}  // namespace hiermirt::io
