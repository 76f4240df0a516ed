#include "meshret/augmentation.hpp"
#include "meshret/baselines/baselines.hpp"
#include "meshret/error.hpp"
#include "meshret/fixtures.hpp"
#include "meshret/io/config.hpp"
#include "meshret/io/files.hpp"
#include "meshret/metrics.hpp"
#include "meshret/parallel.hpp"
#include "meshret/retarget.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

using namespace meshret;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kValidation = 1, kSolver = 2, kIo = 3 };

struct CommonFlags {
  std::vector<std::string> configs;
  std::string model, source, scene, out;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
};

void add_common(CLI::App* app, CommonFlags& f, bool many_configs = false) {
  auto* opt = app->add_option("--config", f.configs,
                               many_configs ? "Pipeline config file (repeat for a motion set)"
                                            : "Pipeline config file");
  if (!many_configs) opt->expected(1);
  app->add_option("--model", f.model, "Robot model JSON");
  app->add_option("--source", f.source, "Source motion (JSON or BVH)");
  app->add_option("--scene", f.scene, "Scene JSON");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"json"}));
}

PipelineConfig config_from(const CommonFlags& f, const std::string& config_path) {
  PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
  if (!f.model.empty()) c.model = f.model;
  if (!f.source.empty()) c.source = f.source;
  if (!f.scene.empty()) c.scene = f.scene;
  if (!f.out.empty()) c.output = f.out;
  if (f.seed) {
    c.seed = *f.seed;
    c.retarget.mesh.seed = *f.seed;
  }
  if (c.model.empty()) throw ValidationError("no robot model given (--model or config \"model\")");
  if (c.source.empty()) throw ValidationError("no source motion given (--source or config \"source\")");
  return c;
}

struct Inputs {
  PipelineConfig cfg;
  KinematicModel model;
  SourceMotion demo;    // demonstrator scale
  SourceMotion scaled;  // robot scale
  SceneDescription scene;
  RetargetOptions options;
};

Inputs load_inputs(const PipelineConfig& cfg) {
  Inputs in;
  in.cfg = cfg;
  in.model = load_model(cfg.model);
  in.demo = load_source(cfg.source, cfg.source_format, cfg.bvh);
  in.scaled = scale_source(in.demo, in.model.height());
  if (!cfg.scene.empty()) in.scene = load_scene(cfg.scene);
  validate_scene(in.scene, in.model, in.demo.num_frames());
  in.options = cfg.retarget;
  if (in.options.correspondence.empty()) {
    in.options.correspondence = RetargetOptions::identity(in.model).correspondence;
  }
  return in;
}

bool hard_failure(const RetargetResult& r) {
  for (const auto& f : r.reports) {
    if (f.solve.status == SolveStatus::InfeasibleSubproblem) return true;
  }
  return false;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- subcommands ----------------------------------------------------------

int run_retarget(const CommonFlags& f) {
  const Inputs in = load_inputs(config_from(f, f.configs.empty() ? "" : f.configs[0]));
  const RetargetResult r = retarget_motion(in.model, in.scaled, in.scene, in.options);
  const fs::path out = in.cfg.output;
  write_text_file(out / "trajectory.json", trajectory_to_json(r.trajectory, in.model, &r.reports));
  int relaxed = 0, flagged = 0;
  for (const auto& fr : r.reports) {
    relaxed += fr.solve.relaxed;
    flagged += fr.penetration_flag;
  }
  print_json({{"frames", r.trajectory.size()},
              {"relaxed_frames", relaxed},
              {"penetration_flags", flagged},
              {"trajectory", (out / "trajectory.json").string()}});
  return hard_failure(r) ? kSolver : kOk;
}

int run_augment(const CommonFlags& f, const std::string& nominal_path) {
  const Inputs in = load_inputs(config_from(f, f.configs.empty() ? "" : f.configs[0]));
  const AugmentationFile file = in.cfg.augmentation.empty()
                                    ? AugmentationFile{}
                                    : augmentation_file_from_json(read_text_file(in.cfg.augmentation));
  Trajectory nominal;
  if (!nominal_path.empty()) {
    nominal = load_trajectory(nominal_path, in.model);
  } else {
    nominal = retarget_motion(in.model, in.scaled, in.scene, in.options).trajectory;
  }
  std::vector<AugmentationSpec> specs = file.expand();
  const BatchConfig& b = in.cfg.batch;
  if (specs.size() == 1 && !b.grid_x.empty()) {
    specs = offset_grid(file.base, b.grid_x, b.grid_y);
  } else if (specs.size() == 1 && b.samples > 0) {
    specs = sample_specs(file.base, b.ranges, b.samples, in.cfg.seed);
  }
  const auto batch = generate_batch(in.model, nominal, in.scaled, in.scene, specs, in.options,
                                    worker_count(in.cfg.threads));
  const fs::path out = fs::path(in.cfg.output) / "augment";
  json summary = json::array();
  int exit_code = kOk;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%04zu", i);
    const auto& e = batch[i];
    write_text_file(out / (std::string("spec_") + stem + ".json"), augmentation_spec_to_json(e.spec));
    json entry = {{"index", i}, {"ok", e.ok}, {"feasible", e.feasible}};
    if (e.ok) {
      write_text_file(out / (std::string("trajectory_") + stem + ".json"),
                      trajectory_to_json(e.result.trajectory, in.model, &e.result.reports));
    } else {
      entry["error"] = e.error;
      exit_code = kValidation;
    }
    summary.push_back(entry);
  }
  write_text_file(out / "batch.json", json({{"entries", summary}}).dump(2) + "\n");
  print_json({{"specs", batch.size()}, {"summary", (out / "batch.json").string()}});
  return exit_code;
}

int run_evaluate(const CommonFlags& f, const std::string& trajectory_path) {
  const Inputs in = load_inputs(config_from(f, f.configs.empty() ? "" : f.configs[0]));
  if (trajectory_path.empty()) throw ValidationError("evaluate needs --trajectory");
  const Trajectory traj = load_trajectory(trajectory_path, in.model);
  const QualityReport r = evaluate(traj, in.model, in.scene, in.scaled, in.scene.task,
                                   in.options.feet, in.cfg.metrics);
  const fs::path out = fs::path(in.cfg.output) / "quality.json";
  write_text_file(out, quality_report_to_json(r));
  print_json({{"penetration_duration", r.penetration_duration},
              {"penetration_max_depth_cm", r.penetration_max_depth_cm},
              {"skating_duration", r.skating_duration},
              {"skating_max_velocity_cms", r.skating_max_velocity_cms},
              {"contact_preservation",
               r.contact_preservation ? json(*r.contact_preservation) : json("not-applicable")},
              {"report", out.string()}});
  return kOk;
}

struct Stat {
  std::vector<double> values;
  void add(double v) { values.push_back(v); }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return values.empty() ? NAN : s / values.size();
  }
  double stddev() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / (values.size() - 1));
  }
  json to_json() const {
    if (values.empty()) return json(nullptr);
    return {{"mean", mean()}, {"std", stddev()}, {"n", values.size()}};
  }
  std::string cell(int digits) const {
    if (values.empty()) return "n/a";
    return fixed(mean(), digits) + " +/- " + fixed(stddev(), digits);
  }
};

int run_compare(const CommonFlags& f, const std::string& methods_csv) {
  std::vector<std::string> methods;
  {
    std::stringstream ss(methods_csv);
    std::string m;
    while (std::getline(ss, m, ',')) {
      if (m.empty()) continue;
      if (m != "omni") parse_baseline(m);
      methods.push_back(m);
    }
  }
  if (methods.empty()) throw ValidationError("compare needs at least one method");
  std::vector<std::string> configs = f.configs;
  if (configs.empty()) configs.push_back("");
  std::vector<Inputs> motions;
  for (const auto& c : configs) motions.push_back(load_inputs(config_from(f, c)));

  const int jobs = static_cast<int>(motions.size() * methods.size());
  std::vector<QualityReport> reports(jobs);
  parallel_for(jobs, worker_count(motions[0].cfg.threads), [&](int job) {
    const Inputs& in = motions[job / methods.size()];
    const std::string& m = methods[job % methods.size()];
    Trajectory traj;
    if (m == "omni") {
      traj = retarget_motion(in.model, in.scaled, in.scene, in.options).trajectory;
    } else {
      traj = run_baseline(parse_baseline(m), in.model, in.demo, in.scene, in.options, in.cfg.baselines);
    }
    reports[job] = evaluate(traj, in.model, in.scene, in.scaled, in.scene.task, in.options.feet,
                            in.cfg.metrics);
  });

  json table = json::array();
  std::ostringstream text;
  char line[512];
  std::snprintf(line, sizeof line, "%-11s | %-21s | %-21s | %-21s | %-21s | %-21s\n", "Method",
                "Pen. duration", "Pen. max depth (cm)", "Skate duration", "Skate max vel (cm/s)",
                "Contact preservation");
  text << line << std::string(140, '-') << "\n";
  for (std::size_t k = 0; k < methods.size(); ++k) {
    Stat pd, pm, sd, sv, cp;
    for (std::size_t i = 0; i < motions.size(); ++i) {
      const QualityReport& r = reports[i * methods.size() + k];
      pd.add(r.penetration_duration);
      pm.add(r.penetration_max_depth_cm);
      if (r.skating_applicable) {
        sd.add(r.skating_duration);
        sv.add(r.skating_max_velocity_cms);
      }
      if (r.contact_preservation) cp.add(*r.contact_preservation);
    }
    table.push_back({{"method", methods[k]},
                     {"penetration_duration", pd.to_json()},
                     {"penetration_max_depth_cm", pm.to_json()},
                     {"skating_duration", sd.to_json()},
                     {"skating_max_velocity_cms", sv.to_json()},
                     {"contact_preservation", cp.to_json()}});
    std::snprintf(line, sizeof line, "%-11s | %-21s | %-21s | %-21s | %-21s | %-21s\n",
                  methods[k].c_str(), pd.cell(3).c_str(), pm.cell(2).c_str(), sd.cell(3).c_str(),
                  sv.cell(2).c_str(), cp.cell(3).c_str());
    text << line;
  }
  const fs::path out = motions[0].cfg.output;
  write_text_file(out / "compare.json", json({{"motions", motions.size()}, {"methods", table}}).dump(2) + "\n");
  write_text_file(out / "compare.txt", text.str());
  std::cout << text.str();
  return kOk;
}

int run_mesh_inspect(const CommonFlags& f) {
  const Inputs in = load_inputs(config_from(f, f.configs.empty() ? "" : f.configs[0]));
  std::vector<int> src_idx, robot_kp;
  resolve_correspondence(in.model, in.scaled, in.options, src_idx, robot_kp);
  std::vector<std::string> names;
  PointList kp;
  const int t = in.options.mesh_reference_frame;
  if (t < 0 || t >= in.scaled.num_frames()) throw ValidationError("mesh reference frame outside the motion");
  for (std::size_t s = 0; s < src_idx.size(); ++s) {
    names.push_back(in.model.keypoints()[robot_kp[s]].name);
    kp.push_back(in.scaled.frames[t][src_idx[s]]);
  }
  const SceneDescription src_scene = source_scene(in.scaled, in.scene);
  const InteractionMesh mesh = build_interaction_mesh(names, kp, src_scene, t, in.options.mesh);
  const PointList pos = mesh_vertex_positions(mesh, kp, src_scene, t);
  std::map<int, int> histogram;
  std::map<std::string, int> kinds;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    ++histogram[static_cast<int>(mesh.neighbors[v].size())];
    const char* k = "keypoint";
    switch (mesh.vertices[v].kind) {
      case VertexKind::Keypoint: k = "keypoint"; break;
      case VertexKind::ObjectSample: k = "object"; break;
      case VertexKind::TerrainSample: k = "terrain"; break;
      case VertexKind::GroundSample: k = "ground"; break;
    }
    ++kinds[k];
  }
  json hist = json::object();
  for (const auto& [deg, count] : histogram) hist[std::to_string(deg)] = count;
  const json stats = {{"vertices", mesh.num_vertices()},
                      {"tetrahedra", mesh.tetrahedra.size()},
                      {"vertex_kinds", kinds},
                      {"adjacency_histogram", hist}};
  std::ostringstream wire;
  wire << "# x0 y0 z0 x1 y1 z1 (one mesh edge per line)\n";
  wire.precision(17);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    for (int u : mesh.neighbors[v]) {
      if (u <= v) continue;
      wire << pos[v].x() << " " << pos[v].y() << " " << pos[v].z() << " " << pos[u].x() << " "
           << pos[u].y() << " " << pos[u].z() << "\n";
    }
  }
  const fs::path out = in.cfg.output;
  write_text_file(out / "mesh_stats.json", stats.dump(2) + "\n");
  write_text_file(out / "mesh_wireframe.txt", wire.str());
  print_json(stats);
  return kOk;
}

int run_fixtures(const std::string& out_dir, const std::vector<std::string>& names) {
  const std::vector<std::string> all = names.empty() ? fixture_names() : names;
  json listing = json::array();
  for (const auto& name : all) {
    const Fixture fx = make_fixture(name);
    const fs::path dir = fs::path(out_dir) / name;
    write_text_file(dir / "model.json", model_to_json(fx.model));
    write_text_file(dir / "source.json", source_motion_to_json(fx.source));
    write_text_file(dir / "scene.json", scene_to_json(fx.scene));
    PipelineConfig cfg;
    cfg.model = "model.json";
    cfg.source = "source.json";
    cfg.scene = "scene.json";
    cfg.output = "out";
    cfg.retarget = fx.options;
    write_text_file(dir / "config.json", config_to_json(cfg));
    if (fx.ground_truth) {
      write_text_file(dir / "ground_truth.json", trajectory_to_json(*fx.ground_truth, fx.model));
    }
    listing.push_back({{"name", name}, {"config", (dir / "config.json").string()}});
  }
  print_json(listing);
  return kOk;
}

int error_exit(ErrorKind kind, const std::string& message) {
  const char* label = "validation";
  int code = kValidation;
  switch (kind) {
    case ErrorKind::Parse: label = "parse"; break;
    case ErrorKind::Validation: break;
    case ErrorKind::Io: label = "io"; code = kIo; break;
    case ErrorKind::Solver: label = "solver"; code = kSolver; break;
  }
  std::cerr << json({{"error", {{"kind", label}, {"message", message}}}}).dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interaction-mesh motion retargeting"};
  app.require_subcommand(1);

  CommonFlags retarget_f, augment_f, evaluate_f, compare_f, inspect_f;
  std::string nominal, trajectory, methods = "phc,gmr,videomimic,imma,omni", fixtures_out = "fixtures";
  std::vector<std::string> fixture_list;

  auto* retarget = app.add_subcommand("retarget", "Retarget a source motion onto the robot");
  add_common(retarget, retarget_f);
  auto* augment = app.add_subcommand("augment", "Generate augmented trajectories from a nominal one");
  add_common(augment, augment_f);
  augment->add_option("--nominal", nominal, "Nominal trajectory (retargeted when omitted)");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Kinematic quality metrics of a trajectory");
  add_common(evaluate_cmd, evaluate_f);
  evaluate_cmd->add_option("--trajectory", trajectory, "Trajectory JSON to evaluate")->required();
  auto* compare = app.add_subcommand("compare", "Compare retargeting methods on a motion set");
  add_common(compare, compare_f, true);
  compare->add_option("--methods", methods, "Comma-separated: phc,gmr,videomimic,imma,omni");
  auto* inspect = app.add_subcommand("mesh-inspect", "Interaction mesh statistics and wireframe");
  add_common(inspect, inspect_f);
  auto* fixtures = app.add_subcommand("fixtures", "Write the built-in synthetic fixtures");
  fixtures->add_option("--out", fixtures_out, "Output directory");
  fixtures->add_option("--name", fixture_list, "Fixture name (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*retarget) return run_retarget(retarget_f);
    if (*augment) return run_augment(augment_f, nominal);
    if (*evaluate_cmd) return run_evaluate(evaluate_f, trajectory);
    if (*compare) return run_compare(compare_f, methods);
    if (*inspect) return run_mesh_inspect(inspect_f);
    if (*fixtures) return run_fixtures(fixtures_out, fixture_list);
  } catch (const Error& e) {
    return error_exit(e.kind(), e.what());
  } catch (const fs::filesystem_error& e) {
    return error_exit(ErrorKind::Io, e.what());
  } catch (const std::exception& e) {
    return error_exit(ErrorKind::Validation, e.what());
  }
  return kOk;
}
