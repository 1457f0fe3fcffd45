#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "hiermirt/commands.hpp"
#include "hiermirt/config.hpp"
#include "hiermirt/hierarchy.hpp"
#include "hiermirt/io.hpp"
#include "hiermirt/simulator.hpp"

using namespace hiermirt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hiermirt_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SimulatedData small_data() {
  auto d = preset_design(8);
  d.subjects = 40;
  d.missing_rate = 0.15;
  return simulate_dataset(d, 12);
}

std::string error_of(const io::Json& j, const std::string& command) {
  try {
    parse_config(j, command, {});
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("format_double round trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 0.95, 123456789.123})
    CHECK(std::stod(io::format_double(x)) == x);
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(3.0) == "3");
}

TEST_CASE("response CSV round trip keeps missing cells") {
  const auto data = small_data();
  const auto dir = scratch("csv");
  std::vector<std::string> names;
  for (const auto& s : data.truth.items.specs) names.push_back(s.name);
  io::write_responses_csv(dir / "data.csv", data.responses, names);
  const auto back = io::read_responses_csv(dir / "data.csv");
  CHECK(back.item_names == names);
  CHECK(back.subject_ids.size() == 40);
  CHECK(back.responses.cells == data.responses.cells);
  CHECK((data.responses.cells.array() == kMissing).any());

  io::write_text(dir / "bad.csv", "subject,x\ns1,abc\n");
  CHECK_THROWS_AS(io::read_responses_csv(dir / "bad.csv"), InputError);
  io::write_text(dir / "short.csv", "subject,x,y\ns1,1\n");
  CHECK_THROWS_AS(io::read_responses_csv(dir / "short.csv"), InputError);
  CHECK_THROWS_AS(io::read_responses_csv(dir / "absent.csv"), InputError);
}

TEST_CASE("item file round trip") {
  const auto data = small_data();
  const auto& items = data.truth.items;
  const int q1 = static_cast<int>(items.a.cols());
  const auto back = io::items_from_json(io::items_to_json(items, true), q1);
  CHECK(back.has_parameters);
  CHECK(back.items.a == items.a);
  CHECK(back.items.b == items.b);
  CHECK(back.items.c == items.c);
  REQUIRE(back.items.size() == items.size());
  for (int i = 0; i < items.size(); ++i) {
    CHECK(back.items.specs[i].name == items.specs[i].name);
    CHECK(back.items.specs[i].loads == items.specs[i].loads);
    if (items.is_graded(i)) CHECK(back.items.thresholds[i] == items.thresholds[i]);
  }
  const auto structure = io::items_from_json(io::items_to_json(items, false), q1);
  CHECK_FALSE(structure.has_parameters);

  auto j = io::items_to_json(items, false);
  j["items"][0]["colour"] = "red";
  CHECK_THROWS_AS(io::items_from_json(j, q1), InputError);
  j = io::items_to_json(items, false);
  j["items"][0]["kind"] = "nominal";
  CHECK_THROWS_AS(io::items_from_json(j, q1), InputError);
  j = io::items_to_json(items, false);
  j["items"][0]["loads"] = {q1 + 1};
  CHECK_THROWS_AS(io::items_from_json(j, q1), InputError);
}

TEST_CASE("hierarchy, loadings and truth round trips") {
  HierarchySpec spec;
  spec.traits = {9, 3, 1};
  spec.parent = {{0, 0, 0, 1, 1, 1, 2, 2, 2}, {0, 0, 0}};
  const auto hs = io::hierarchy_from_json(io::hierarchy_to_json(spec));
  CHECK(hs.traits == spec.traits);
  CHECK(hs.parent == spec.parent);
  CHECK(io::hierarchy_to_json(spec)["parent"][0][0] == 1);

  io::Json two_parents = io::Json::parse(R"({"levels": [6, 2], "parent": [[1, 1, [1, 2], 2, 2, 2]]})");
  CHECK_THROWS_AS(require_valid_hierarchy(io::hierarchy_from_json(two_parents)), InputError);

  Loadings l{Vector(3), Vector(3)};
  l[0] << 0.95, 0.1, -0.3;
  l[1] << 0.2, 0.4, 0.6;
  const auto lb = io::loadings_from_json(io::loadings_to_json(l));
  CHECK(lb[0] == l[0]);
  CHECK(lb[1] == l[1]);

  const auto data = small_data();
  const auto d8 = preset_design(8).hierarchy;
  const auto tb = io::truth_from_json(io::truth_to_json(data.truth, d8), d8);
  CHECK(tb.lambda[0] == data.truth.lambda[0]);
  CHECK(tb.traits.theta[0] == data.truth.traits.theta[0]);
  CHECK(tb.traits.theta[1] == data.truth.traits.theta[1]);
  CHECK(tb.items.a == data.truth.items.a);
}

TEST_CASE("trace CSV round trip") {
  TraceGroup g;
  g.name = "lambda";
  g.columns = {"lambda_2_1", "lambda_2_2"};
  g.draws = Matrix(3, 2);
  g.draws << 0.1, 0.2, 1.0 / 3.0, -0.5, 0.95, 1e-17;
  const auto dir = scratch("trace");
  io::write_trace_csv(dir / "trace.csv", g);
  const auto back = io::read_trace_csv(dir / "trace.csv", "lambda");
  CHECK(back.columns == g.columns);
  CHECK(back.draws == g.draws);
}

TEST_CASE("config defaults and overrides") {
  const io::Json fit = {{"data", "d.csv"}, {"items", "i.json"}, {"hierarchy", "h.json"}};
  const auto c = parse_config(fit, "fit", {}, "/base");
  CHECK(c.data == fs::path("/base/d.csv"));
  CHECK(c.sampler.iterations == 2000);
  CHECK(c.sampler.resolved_burnin() == 1000);
  CHECK(c.sampler.thin == 1);
  CHECK(c.sampler.init_lambda == 0.5);
  CHECK(c.sampler.adapt_window == 50);
  CHECK(c.priors.ab_cov_scale == 4.0);
  CHECK(c.priors.c_alpha == 1.0);
  CHECK(c.priors.c_beta == 4.0);
  CHECK(c.seed == 1);
  CHECK(output_dir(c) == fs::path("fit"));

  io::Json with_sampler = fit;
  with_sampler["seed"] = 5;
  with_sampler["sampler"] = {{"iterations", 300}, {"burnin", 100}};
  ConfigOverrides ov;
  ov.seed = 9;
  ov.iterations = 150;
  ov.out = "elsewhere";
  const auto o = parse_config(with_sampler, "fit", ov);
  CHECK(o.seed == 9);
  CHECK(o.sampler.iterations == 150);
  CHECK(o.sampler.burnin == 100);
  CHECK(output_dir(o) == fs::path("elsewhere"));

  const auto sim = parse_config({{"preset", 1}}, "simulate", {});
  CHECK(*sim.preset == 1);
  CHECK(output_dir(sim) == fs::path("simulation"));
  const auto sum = parse_config({{"fit", "/tmp/f"}}, "summarize", {});
  CHECK(output_dir(sum) == fs::path("/tmp/f/summary"));
  CHECK(output_dir(parse_config(nullptr, "validate", {})) == fs::path("validation"));

  const auto echoed = config_to_json(o);
  CHECK(echoed["sampler"]["iterations"] == 150);
  CHECK(echoed["sampler"]["priors"]["c_beta"] == 4.0);
}

TEST_CASE("config errors name the key path") {
  const io::Json fit = {{"data", "d.csv"}, {"items", "i.json"}, {"hierarchy", "h.json"}};
  io::Json j = fit;
  j["sampler"] = {{"iteratons", 10}};
  CHECK(error_of(j, "fit").find("sampler.iteratons") != std::string::npos);
  CHECK(error_of(j, "fit").find("unknown key") != std::string::npos);

  j = fit;
  j["sampler"] = {{"iterations", "many"}};
  CHECK(error_of(j, "fit").find("sampler.iterations: type mismatch") != std::string::npos);

  j = fit;
  j["sampler"] = {{"priors", {{"c_alpha", true}}}};
  CHECK(error_of(j, "fit").find("sampler.priors.c_alpha") != std::string::npos);

  j = fit;
  j.erase("items");
  CHECK(error_of(j, "fit").find("items: missing required field") != std::string::npos);
  CHECK(error_of(io::Json::object(), "simulate").find("preset") != std::string::npos);
  CHECK(error_of({{"command", "fit"}}, "simulate").find("command") != std::string::npos);
  CHECK(error_of({{"seed", -3}, {"preset", 1}}, "simulate").find("seed") != std::string::npos);
}

TEST_CASE("command exit codes") {
  std::ostringstream log;
  const auto dir = scratch("cmd");
  ConfigOverrides ov;
  ov.out = dir / "nothing";
  io::write_json(dir / "summ.json", {{"fit", (dir / "missing").string()}});
  CHECK(run_command("summarize", dir / "summ.json", ov, log) == 2);

  io::write_json(dir / "bad.json", {{"preset", 1}, {"colour", 1}});
  CHECK(run_command("simulate", dir / "bad.json", ov, log) == 2);

  io::write_json(dir / "sim.json", {{"preset", 8}, {"subjects", 30}});
  ov.out = dir / "sim";
  CHECK(run_command("simulate", dir / "sim.json", ov, log) == 0);
  CHECK(fs::exists(dir / "sim" / "data.csv"));
  CHECK(fs::exists(dir / "sim" / "fit_config.json"));

  // All iterations in burn-in: the run succeeds with an empty trace.
  ConfigOverrides fo;
  fo.iterations = 6;
  fo.burnin = 6;
  fo.out = dir / "fit";
  std::ostringstream fit_log;
  CHECK(run_command("fit", dir / "sim" / "fit_config.json", fo, fit_log) == 0);
  CHECK(fit_log.str().find("warning") != std::string::npos);
  CHECK(fs::exists(dir / "fit" / "manifest.json"));
}
