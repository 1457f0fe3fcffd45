#include "hiermirt/config.hpp"

#include <set>

namespace hiermirt {

namespace fs = std::filesystem;
using io::Json;

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError(label() + ": expected an object");
  }

  void allow(std::initializer_list<const char*> keys) {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items())
      if (!known.count(k)) throw InputError(child(k) + ": unknown key");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  std::string str(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw InputError(child(key) + ": type mismatch, expected a string");
    return v.get<std::string>();
  }
  int integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw InputError(child(key) + ": type mismatch, expected an integer");
    return v.get<int>();
  }
  std::uint64_t unsigned_integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw InputError(child(key) + ": type mismatch, expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  double number(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw InputError(child(key) + ": type mismatch, expected a number");
    return v.get<double>();
  }
  bool boolean(const char* key) const {
    const auto& v = at(key);
    if (!v.is_boolean()) throw InputError(child(key) + ": type mismatch, expected true or false");
    return v.get<bool>();
  }
  Vector vector(const char* key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw InputError(child(key) + ": type mismatch, expected a list of numbers");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw InputError(child(key) + "[" + std::to_string(i) + "]: type mismatch");
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }
  Loadings loadings(const char* key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw InputError(child(key) + ": type mismatch, expected a list of per-level lists");
    Loadings out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      Reader level(Json{{"l", v[k]}}, child(key) + "[" + std::to_string(k) + "]");
      out.push_back(level.vector("l"));
    }
    return out;
  }
  Reader object(const char* key) const { return Reader(at(key), child(key)); }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& at(const char* key) const {
    if (!has(key)) throw InputError(child(key) + ": missing required field");
    return j_.at(key);
  }
  std::string label() const { return path_.empty() ? "config" : path_; }

  const Json& j_;
  std::string path_;
};

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

Priors PriorSettings::resolve(int q1) const {
  Priors p = Priors::defaults(q1);
  p.ab_cov = ab_cov_scale * Matrix::Identity(q1 + 1, q1 + 1);
  p.ag_cov = ag_cov_scale * Matrix::Identity(q1, q1);
  if (ab_mean) {
    if (ab_mean->size() != q1 + 1)
      throw InputError("sampler.priors.ab_mean: expected " + std::to_string(q1 + 1) + " entries (a..., b)");
    p.ab_mean = *ab_mean;
  }
  if (ag_mean) {
    if (ag_mean->size() != q1) throw InputError("sampler.priors.ag_mean: expected " + std::to_string(q1) + " entries");
    p.ag_mean = *ag_mean;
  }
  p.c_alpha = c_alpha;
  p.c_beta = c_beta;
  return p;
}

RunConfig parse_config(const Json& file, const std::string& command, const ConfigOverrides& ov,
                       const fs::path& base_dir) {
  const Json empty = Json::object();
  Reader r(file.is_null() ? empty : file, "");
  r.allow({"command", "data", "items", "hierarchy", "truth", "fit", "out", "preset", "subjects", "seed", "chains",
           "quick", "sampler"});
  RunConfig c;
  c.command = command;
  if (r.has("command")) {
    const auto declared = r.str("command");
    if (!command.empty() && declared != command)
      throw InputError("command: config declares '" + declared + "' but '" + command + "' was requested");
    c.command = declared;
  }
  if (c.command != "simulate" && c.command != "fit" && c.command != "summarize" && c.command != "validate")
    throw InputError("command: expected simulate, fit, summarize or validate");

  if (r.has("data")) c.data = resolve(r.str("data"), base_dir);
  if (r.has("items")) c.items = resolve(r.str("items"), base_dir);
  if (r.has("hierarchy")) c.hierarchy = resolve(r.str("hierarchy"), base_dir);
  if (r.has("truth")) c.truth = resolve(r.str("truth"), base_dir);
  if (r.has("fit")) c.fit = resolve(r.str("fit"), base_dir);
  if (r.has("out")) c.out = resolve(r.str("out"), base_dir);
  if (r.has("preset")) c.preset = r.integer("preset");
  if (r.has("subjects")) c.subjects = r.integer("subjects");
  if (r.has("seed")) c.seed = r.unsigned_integer("seed");
  if (r.has("chains")) c.chains = r.integer("chains");
  if (r.has("quick")) c.quick = r.boolean("quick");

  auto& s = c.sampler;
  if (r.has("sampler")) {
    Reader sr = r.object("sampler");
    sr.allow({"iterations", "burnin", "thin", "lambda_step", "threshold_translate_step", "threshold_spread_step",
              "adapt_window", "adapt", "target_scalar", "target_block", "init_lambda", "trace_theta_subjects",
              "fix_items", "fixed_lambda", "priors"});
    if (sr.has("iterations")) s.iterations = sr.integer("iterations");
    if (sr.has("burnin")) s.burnin = sr.integer("burnin");
    if (sr.has("thin")) s.thin = sr.integer("thin");
    if (sr.has("lambda_step")) s.lambda_step = sr.number("lambda_step");
    if (sr.has("threshold_translate_step")) s.threshold_translate_step = sr.number("threshold_translate_step");
    if (sr.has("threshold_spread_step")) s.threshold_spread_step = sr.number("threshold_spread_step");
    if (sr.has("adapt_window")) s.adapt_window = sr.integer("adapt_window");
    if (sr.has("adapt")) s.adapt = sr.boolean("adapt");
    if (sr.has("target_scalar")) s.target_scalar = sr.number("target_scalar");
    if (sr.has("target_block")) s.target_block = sr.number("target_block");
    if (sr.has("init_lambda")) s.init_lambda = sr.number("init_lambda");
    if (sr.has("trace_theta_subjects")) s.trace_theta_subjects = sr.integer("trace_theta_subjects");
    if (sr.has("fix_items")) c.fix_items = sr.boolean("fix_items");
    if (sr.has("fixed_lambda")) s.fixed_lambda = sr.loadings("fixed_lambda");
    if (sr.has("priors")) {
      Reader pr = sr.object("priors");
      pr.allow({"ab_mean", "ab_cov_scale", "ag_mean", "ag_cov_scale", "c_alpha", "c_beta"});
      if (pr.has("ab_mean")) c.priors.ab_mean = pr.vector("ab_mean");
      if (pr.has("ab_cov_scale")) c.priors.ab_cov_scale = pr.number("ab_cov_scale");
      if (pr.has("ag_mean")) c.priors.ag_mean = pr.vector("ag_mean");
      if (pr.has("ag_cov_scale")) c.priors.ag_cov_scale = pr.number("ag_cov_scale");
      if (pr.has("c_alpha")) c.priors.c_alpha = pr.number("c_alpha");
      if (pr.has("c_beta")) c.priors.c_beta = pr.number("c_beta");
    }
  }

  if (ov.seed) c.seed = *ov.seed;
  if (ov.iterations) s.iterations = *ov.iterations;
  if (ov.burnin) s.burnin = *ov.burnin;
  if (ov.thin) s.thin = *ov.thin;
  if (ov.preset) c.preset = *ov.preset;
  if (ov.chains) c.chains = *ov.chains;
  if (ov.out) c.out = *ov.out;
  s.seed = c.seed;
  s.sample_items = !c.fix_items;

  const auto require = [&](const fs::path& p, const char* key) {
    if (p.empty()) throw InputError(std::string(key) + ": missing required field for '" + c.command + "'");
  };
  if (c.command == "fit") {
    require(c.data, "data");
    require(c.items, "items");
    require(c.hierarchy, "hierarchy");
  } else if (c.command == "simulate") {
    if (!c.preset) throw InputError("preset: missing required field for 'simulate'");
  } else if (c.command == "summarize") {
    require(c.fit, "fit");
  }
  if (c.chains < 1) throw InputError("chains: must be at least 1");
  if (c.subjects && *c.subjects < 1) throw InputError("subjects: must be positive");
  if (!(c.priors.ab_cov_scale > 0.0)) throw InputError("sampler.priors.ab_cov_scale: must be positive");
  if (!(c.priors.ag_cov_scale > 0.0)) throw InputError("sampler.priors.ag_cov_scale: must be positive");
  if (!(c.priors.c_alpha > 0.0) || !(c.priors.c_beta > 0.0))
    throw InputError("sampler.priors: c_alpha and c_beta must be positive");
  s.validate();
  return c;
}

RunConfig load_config(const std::optional<fs::path>& file, const std::string& command, const ConfigOverrides& ov) {
  if (!file) return parse_config(Json::object(), command, ov);
  const fs::path base = file->has_parent_path() ? file->parent_path() : fs::path{};
  return parse_config(io::read_json(*file), command, ov, base);
}

fs::path output_dir(const RunConfig& c) {
  if (!c.out.empty()) return c.out;
  if (c.command == "simulate") return "simulation";
  if (c.command == "fit") return "fit";
  if (c.command == "summarize") return c.fit / "summary";
  return "validation";
}

Json config_to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  const auto path = [&](const char* key, const fs::path& p) {
    if (!p.empty()) j[key] = p.generic_string();
  };
  path("data", c.data);
  path("items", c.items);
  path("hierarchy", c.hierarchy);
  path("truth", c.truth);
  path("fit", c.fit);
  path("out", output_dir(c));
  if (c.preset) j["preset"] = *c.preset;
  if (c.subjects) j["subjects"] = *c.subjects;
  j["seed"] = c.seed;
  j["chains"] = c.chains;
  if (c.command == "validate") j["quick"] = c.quick;
  const auto& s = c.sampler;
  Json sj;
  sj["iterations"] = s.iterations;
  sj["burnin"] = s.resolved_burnin();
  sj["thin"] = s.thin;
  sj["lambda_step"] = s.lambda_step;
  sj["threshold_translate_step"] = s.threshold_translate_step;
  sj["threshold_spread_step"] = s.threshold_spread_step;
  sj["adapt_window"] = s.adapt_window;
  sj["adapt"] = s.adapt;
  sj["target_scalar"] = s.target_scalar;
  sj["target_block"] = s.target_block;
  sj["init_lambda"] = s.init_lambda;
  sj["trace_theta_subjects"] = s.trace_theta_subjects;
  sj["fix_items"] = c.fix_items;
  if (s.fixed_lambda) sj["fixed_lambda"] = io::loadings_to_json(*s.fixed_lambda);
  Json pj;
  const auto vec = [](const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  if (c.priors.ab_mean) pj["ab_mean"] = vec(*c.priors.ab_mean);
  pj["ab_cov_scale"] = c.priors.ab_cov_scale;
  if (c.priors.ag_mean) pj["ag_mean"] = vec(*c.priors.ag_mean);
  pj["ag_cov_scale"] = c.priors.ag_cov_scale;
  pj["c_alpha"] = c.priors.c_alpha;
  pj["c_beta"] = c.priors.c_beta;
  sj["priors"] = pj;
  j["sampler"] = sj;
  return j;
}

}  // namespace hiermirt
