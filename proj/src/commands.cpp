#include "hiermirt/commands.hpp"

#include <iostream>
#include <sstream>

#include "hiermirt/checks.hpp"
#include "hiermirt/diagnostics.hpp"
#include "hiermirt/hierarchy.hpp"

namespace hiermirt {

namespace fs = std::filesystem;
using io::Json;

namespace {

const char* const kGroups[] = {"lambda", "a", "b", "c", "ag", "bg", "theta"};

std::string num(double x) { return io::format_double(x); }

std::vector<std::string> item_names(const ItemBank& items) {
  std::vector<std::string> names;
  for (const auto& s : items.specs) names.push_back(s.name);
  return names;
}

void write_trait_table(const fs::path& path, const Matrix& values, int level,
                       const std::vector<std::string>& subjects) {
  io::CsvTable t;
  t.header = {"subject"};
  for (Eigen::Index q = 0; q < values.rows(); ++q)
    t.header.push_back("theta_" + std::to_string(level + 1) + "_" + std::to_string(q + 1));
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    std::vector<std::string> row{j < static_cast<Eigen::Index>(subjects.size()) ? subjects[j] : std::to_string(j + 1)};
    for (Eigen::Index q = 0; q < values.rows(); ++q) row.push_back(num(values(q, j)));
    t.rows.push_back(std::move(row));
  }
  io::write_text(path, t.str());
}

// Inverse of write_trait_table; the subject column is dropped.
Matrix read_trait_table(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    std::vector<double> r;
    while (std::getline(cells, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(std::move(r));
  }
  const Eigen::Index q = rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
  Matrix m(q, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (static_cast<Eigen::Index>(rows[j].size()) != q) throw InputError(path.string() + ": ragged row");
    for (Eigen::Index t = 0; t < q; ++t) m(t, static_cast<Eigen::Index>(j)) = rows[j][t];
  }
  return m;
}

std::vector<std::string> summary_cells(const Vector& draws) {
  if (draws.size() < 2) return {"", "", "", "", "", "", ""};
  const auto s = summarize(draws);
  std::vector<std::string> cells{num(s.mean), num(s.sd), num(s.q025), num(s.q975), num(s.range)};
  if (draws.size() >= 100) {
    cells.push_back(num(ess(draws)));
    cells.push_back(num(geweke_z(draws)));
  } else {
    cells.insert(cells.end(), {"", ""});
  }
  return cells;
}

ItemBank load_items_for_fit(const RunConfig& c, const HierarchySpec& spec, bool& initialized) {
  const int q1 = spec.traits[0];
  auto file = io::items_from_json(io::read_json(c.items), q1);
  initialized = file.has_parameters;
  if (c.fix_items) {
    if (!c.truth.empty()) {
      auto truth = io::truth_from_json(io::read_json(c.truth), spec);
      if (truth.items.size() != file.items.size())
        throw InputError("truth: item count differs from the item file");
      initialized = true;
      return truth.items;
    }
    if (!file.has_parameters)
      throw InputError("sampler.fix_items: needs a truth bundle or item parameters in the item file");
  }
  return file.items;
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& c, std::ostream& log) {
  auto design = preset_design(*c.preset);
  if (c.subjects) design.subjects = *c.subjects;
  const auto data = simulate_dataset(design, c.seed);
  const fs::path out = output_dir(c);
  fs::create_directories(out);
  io::write_responses_csv(out / "data.csv", data.responses, item_names(data.truth.items));
  io::write_json(out / "items.json", io::items_to_json(data.truth.items, false));
  io::write_json(out / "hierarchy.json", io::hierarchy_to_json(design.hierarchy));
  io::write_json(out / "truth.json", io::truth_to_json(data.truth, design.hierarchy));

  Json fit;
  fit["command"] = "fit";
  fit["data"] = "data.csv";
  fit["items"] = "items.json";
  fit["hierarchy"] = "hierarchy.json";
  fit["truth"] = "truth.json";
  fit["seed"] = c.seed;
  Json sampler;
  sampler["iterations"] = c.sampler.iterations;
  sampler["fix_items"] = design.fix_items_at_truth;
  if (design.fit_fixed_lambda) sampler["fixed_lambda"] = io::loadings_to_json(*design.fit_fixed_lambda);
  fit["sampler"] = sampler;
  io::write_json(out / "fit_config.json", fit);

  log << design.name << ": " << design.subjects << " subjects, " << design.item_count() << " items -> "
      << out.generic_string() << "\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& c, std::ostream& log) {
  const auto spec = io::hierarchy_from_json(io::read_json(c.hierarchy));
  ModelInputs in;
  in.hierarchy = spec;
  in.items = load_items_for_fit(c, spec, in.items_initialized);
  const auto dataset = io::read_responses_csv(c.data);
  if (static_cast<int>(dataset.item_names.size()) != in.items.size())
    throw InputError("data: " + std::to_string(dataset.item_names.size()) + " item columns but the item file declares " +
                     std::to_string(in.items.size()) + " items");
  for (int i = 0; i < in.items.size(); ++i)
    if (dataset.item_names[i] != in.items.specs[i].name)
      throw InputError("data: column " + std::to_string(i + 2) + " is '" + dataset.item_names[i] +
                       "' but the item file declares '" + in.items.specs[i].name + "'");
  in.responses = dataset.responses;

  const fs::path out = output_dir(c);
  for (int chain = 0; chain < c.chains; ++chain) {
    RunConfig cc = c;
    cc.seed = c.seed + static_cast<std::uint64_t>(chain);
    cc.out = c.chains > 1 ? out / ("chain_" + std::to_string(chain)) : out;
    SamplerConfig sc = c.sampler;
    sc.seed = cc.seed;
    sc.priors = c.priors.resolve(spec.traits[0]);
    const auto trace = run_chain(in, sc);
    if (trace.stored == 0) log << "warning: no post-burn-in iterations; the trace is empty\n";

    const fs::path dir = cc.out;
    fs::create_directories(dir);
    for (const auto& g : trace.groups) io::write_trace_csv(dir / ("trace_" + g.name + ".csv"), g);
    for (int k = 0; k < spec.levels(); ++k) {
      write_trait_table(dir / ("theta_mean_level" + std::to_string(k + 1) + ".csv"), trace.theta_mean[k], k,
                        dataset.subject_ids);
      write_trait_table(dir / ("theta_sd_level" + std::to_string(k + 1) + ".csv"), trace.theta_sd[k], k,
                        dataset.subject_ids);
    }
    io::write_json(dir / "hierarchy.json", io::hierarchy_to_json(spec));

    Json manifest = config_to_json(cc);
    manifest["stored_draws"] = trace.stored;
    Json acc = Json::array();
    for (const auto& b : trace.acceptance) {
      Json e;
      e["block"] = b.block;
      e["accepted"] = b.accepted;
      e["proposed"] = b.proposed;
      e["rate"] = b.rate();
      e["scale"] = b.scale;
      acc.push_back(std::move(e));
    }
    manifest["acceptance"] = std::move(acc);
    manifest["timing"] = {{"seconds", trace.seconds}};
    io::write_json(dir / "manifest.json", manifest);

    log << "chain " << chain << " (seed " << cc.seed << "): " << trace.stored << " stored draws in " << trace.seconds
        << " s -> " << dir.generic_string() << "\n";
  }
  return kExitOk;
}

int cmd_summarize(const RunConfig& c, std::ostream& log) {
  const fs::path dir = c.fit;
  if (!fs::exists(dir / "hierarchy.json")) throw InputError("fit: " + dir.generic_string() + " is not a fit directory");
  const auto spec = io::hierarchy_from_json(io::read_json(dir / "hierarchy.json"));
  fs::path truth_path = c.truth;
  if (truth_path.empty() && fs::exists(dir / "manifest.json")) {
    const auto m = io::read_json(dir / "manifest.json");
    if (m.contains("truth") && m["truth"].is_string()) truth_path = m["truth"].get<std::string>();
  }
  std::optional<SimulationTruth> truth;
  if (!truth_path.empty()) truth = io::truth_from_json(io::read_json(truth_path), spec);

  const fs::path out = output_dir(c);
  fs::create_directories(out);
  const std::vector<std::string> stat_header{"mean", "sd", "ci_025", "ci_975", "ci_range", "ess", "geweke_z"};

  std::vector<TraceGroup> groups;
  for (const char* name : kGroups) {
    const fs::path p = dir / (std::string("trace_") + name + ".csv");
    if (fs::exists(p)) groups.push_back(io::read_trace_csv(p, name));
  }

  io::CsvTable lambda;
  lambda.header = {"parameter"};
  lambda.header.insert(lambda.header.end(), stat_header.begin(), stat_header.end());
  if (truth) lambda.header.push_back("true");
  io::CsvTable all;
  all.header = {"group", "parameter"};
  all.header.insert(all.header.end(), stat_header.begin(), stat_header.end());
  for (const auto& g : groups) {
    for (std::size_t k = 0; k < g.columns.size(); ++k) {
      const Vector draws = g.draws.col(static_cast<Eigen::Index>(k));
      const auto cells = summary_cells(draws);
      std::vector<std::string> row{g.name, g.columns[k]};
      row.insert(row.end(), cells.begin(), cells.end());
      all.rows.push_back(row);
      if (g.name == "lambda") {
        std::vector<std::string> lrow{g.columns[k]};
        lrow.insert(lrow.end(), cells.begin(), cells.end());
        if (truth) {
          int n = static_cast<int>(k);
          double value = 0.0;
          for (const auto& l : truth->lambda) {
            if (n < l.size()) {
              value = l(n);
              break;
            }
            n -= static_cast<int>(l.size());
          }
          lrow.push_back(num(value));
        }
        lambda.rows.push_back(std::move(lrow));
      }
    }
  }
  io::write_text(out / "lambda_summary.csv", lambda.str());
  io::write_text(out / "parameter_summary.csv", all.str());
  log << lambda.str();

  if (truth) {
    io::CsvTable rm;
    rm.header = {"level", "trait", "rmse", "spearman"};
    for (int k = 0; k < spec.levels(); ++k) {
      const fs::path p = dir / ("theta_mean_level" + std::to_string(k + 1) + ".csv");
      if (!fs::exists(p)) continue;
      const Matrix est = read_trait_table(p);
      const Matrix& tru = truth->traits.theta[k];
      if (est.rows() != tru.rows() || est.cols() != tru.cols())
        throw InputError("truth: latent traits do not match the fit's subjects");
      io::CsvTable rec;
      rec.header = {"subject", "trait", "truth", "estimate"};
      for (Eigen::Index q = 0; q < est.rows(); ++q) {
        const Vector e = est.row(q).transpose(), t = tru.row(q).transpose();
        rm.rows.push_back({std::to_string(k + 1), std::to_string(q + 1), num(rmse(e, t)),
                           num(spearman_correlation(e, t))});
        for (Eigen::Index j = 0; j < est.cols(); ++j)
          rec.rows.push_back({std::to_string(j + 1), std::to_string(q + 1), num(t(j)), num(e(j))});
      }
      rm.rows.push_back({std::to_string(k + 1), "all", num(rmse(est, tru)), ""});
      io::write_text(out / ("recovery_level" + std::to_string(k + 1) + ".csv"), rec.str());
      if (k == 1 && spec.traits[1] == 1) {
        const Matrix level1 = read_trait_table(dir / "theta_mean_level1.csv");
        const Vector avg = averaged_general_trait(level1);
        const Vector t = tru.row(0).transpose();
        rm.rows.push_back({"2", "average_of_level1", num(rmse(avg, t)), num(spearman_correlation(avg, t))});
      }
    }
    io::write_text(out / "rmse.csv", rm.str());
    log << rm.str();
  }
  log << "summary -> " << out.generic_string() << "\n";
  return kExitOk;
}

int cmd_validate(const RunConfig& c, std::ostream& log) {
  bool ok = true;
  const auto report = [&](bool passed, const std::string& name, const std::string& detail) {
    ok = ok && passed;
    log << (passed ? "PASS " : "FAIL ") << name << (detail.empty() ? "" : ": " + detail) << "\n";
  };

  if (!c.hierarchy.empty()) {
    const auto j = io::read_json(c.hierarchy);
    std::optional<HierarchySpec> spec;
    try {
      spec = io::hierarchy_from_json(j);
      report(true, "hierarchy " + c.hierarchy.generic_string(), "");
    } catch (const InputError& e) {
      report(false, "hierarchy " + c.hierarchy.generic_string(), e.what());
    }
    if (spec && !c.items.empty()) {
      try {
        const auto items = io::items_from_json(io::read_json(c.items), spec->traits[0]).items;
        validate_items(items);
        report(true, "items " + c.items.generic_string(), "");
        if (!c.data.empty()) {
          const auto d = io::read_responses_csv(c.data);
          validate_responses(d.responses, items);
          report(true, "data " + c.data.generic_string(), "");
        }
      } catch (const InputError& e) {
        report(false, "inputs", e.what());
      }
    }
  }

  const auto scale = c.quick ? checks::CheckScale::quick() : checks::CheckScale{};
  for (const auto& r : checks::oracle_suite(scale, c.seed)) report(r.passed, r.name, r.detail);
  return ok ? kExitOk : kExitValidationFailed;
}

int run_command(const std::string& command, const std::optional<fs::path>& file, const ConfigOverrides& ov,
                std::ostream& log) {
  try {
    const RunConfig c = load_config(file, command, ov);
    if (c.command == "simulate") return cmd_simulate(c, log);
    if (c.command == "fit") return cmd_fit(c, log);
    if (c.command == "summarize") return cmd_summarize(c, log);
    return cmd_validate(c, log);
  } catch (const InputError& e) {
    log << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace hiermirt
