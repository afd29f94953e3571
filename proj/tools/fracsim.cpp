// fracsim command line: batch simulation, collision fuzzing, fluoroscopy
// snapshots, the live session server, replay and log analysis.
//
// Exit codes: 0 success, 1 I/O or input errors, 2 usage errors,
// 3 simulation faults or fuzz disagreements.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fracsim/fluoro.hpp"
#include "fracsim/fuzz.hpp"
#include "fracsim/service.hpp"
#include "fracsim/session.hpp"
#include "fracsim/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace fracsim;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFault = 3;

constexpr const char* kDefaultSceneName = "femur_default.scene";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

fs::path scene_dir() {
  if (const char* env = std::getenv("FRACSIM_SCENE_DIR"); env && *env) return env;
#ifdef FRACSIM_DEFAULT_SCENE_DIR
  return FRACSIM_DEFAULT_SCENE_DIR;
#else
  return "scenes";
#endif
}

// An explicit path wins; a bare name is looked up in the scene directory.
Scene resolve_scene(const std::string& arg, double dt_override) {
  fs::path p = arg.empty() ? scene_dir() / kDefaultSceneName : fs::path(arg);
  if (!arg.empty() && !fs::exists(p) && !p.has_parent_path()) p = scene_dir() / p;
  Scene s = load_scene_file(p.string());
  if (dt_override > 0.0) s.dt = dt_override;
  return s;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, mode);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
  return base.parent_path() / (base.stem().string() + suffix);
}

std::vector<WireKeyframe> load_script(const std::string& path) {
  std::istringstream in(read_file(path));
  return read_script_wire(in);
}

void print_report(std::ostream& out, const DeviationReport& r) { write_report_text(out, r); }

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scene, script, out;
  double dt = 0.0;
};

int cmd_simulate(const SimulateArgs& a) {
  const Scene scene = resolve_scene(a.scene, a.dt);
  const Script script = to_script(load_script(a.script));
  const RunResult r = run_script(scene, script);

  const fs::path csv = a.out.empty() ? fs::path(fs::path(a.script).stem().string() + ".csv") : fs::path(a.out);
  {
    auto out = open_out(csv);
    write_trajectory_csv(out, r.samples);
  }
  std::cout << "samples: " << r.samples.size() << "  (" << csv.string() << ")\n";
  if (!r.samples.empty()) {
    const DeviationReport rep = deviation_report(r.samples);
    auto txt = open_out(with_suffix(csv, "_report.txt"));
    write_report_text(txt, rep);
    auto rcsv = open_out(with_suffix(csv, "_report.csv"));
    write_report_csv(rcsv, rep);
    print_report(std::cout, rep);
  }
  int max_it = 0;
  for (int it : r.fk_iterations) max_it = std::max(max_it, it);
  std::cout << "fk_iterations_max: " << max_it << '\n';
  if (r.fault_count() > 0) {
    std::cout << "Unreachable ticks: " << r.unreachable_ticks << '\n';
    std::cout << "Kinematics faults: " << r.kinematics_faults << '\n';
    std::cerr << "simulation finished with " << r.fault_count() << " faulted tick(s)\n";
    return kExitFault;
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_fuzz(std::uint64_t n, std::uint64_t seed, const std::string& out) {
  if (n == 0) throw UsageError("--pairs must be greater than 0");
  const FuzzReport r = collision_fuzz(n, seed);
  if (!out.empty()) {
    auto f = open_out(out);
    write_fuzz_report(f, r, seed);
  }
  std::cout << "pairs: " << r.pairs << "\ncolliding: " << r.colliding << "\ngrazing: " << r.grazing
            << "\ndisagreements: " << r.disagreements.size()
            << "\ngrazing_mismatches: " << r.grazing_mismatch.size() << "\nseconds: " << r.seconds
            << '\n';
  return r.ok() ? 0 : kExitFault;
}

// ---------------------------------------------------------------------------

EulerAngles parse_angles(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  double v[3];
  for (double& x : v) {
    std::string tok;
    if (!(in >> tok)) throw UsageError("--angles needs three numbers in degrees, e.g. 0,90,0");
    std::size_t pos = 0;
    try {
      x = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || !std::isfinite(x)) throw UsageError("invalid angle '" + tok + "'");
  }
  std::string extra;
  if (in >> extra) throw UsageError("--angles takes exactly three values");
  return {deg_to_rad(v[0]), deg_to_rad(v[1]), deg_to_rad(v[2])};
}

void write_overlay_text(std::ostream& out, const FluoroImage& img) {
  out << "# overlay polylines in image-plane mm (+u right, +v up)\n";
  for (const auto& pl : img.overlay) {
    out << pl.label << ' ' << (pl.closed ? "closed" : "open");
    for (const auto& p : pl.points) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " %.3f,%.3f", p.x(), p.y());
      out << buf;
    }
    out << '\n';
  }
}

int cmd_fluoro(const std::string& scene_arg, const std::string& angles, const std::string& out,
               const std::string& log) {
  const EulerAngles delta = parse_angles(angles);
  const Scene scene = resolve_scene(scene_arg, 0.0);
  Pose ring = scene.ring_home;
  if (!log.empty()) {
    std::istringstream in(read_file(log));
    const auto samples = read_trajectory_csv(in);
    if (!samples.empty()) ring = samples.back().rsr_actual;
  }
  const FluoroImage img = capture_scene(scene, ring, set_carm(default_carm(scene), delta));
  const fs::path base = out.empty() ? fs::path("fluoro") : fs::path(out);
  {
    auto f = open_out(with_suffix(base, ".pgm"), std::ios::binary);
    write_pgm(f, img);
  }
  {
    auto f = open_out(with_suffix(base, "_overlay.txt"));
    write_overlay_text(f, img);
  }
  {
    auto f = open_out(with_suffix(base, "_overlay.svg"));
    write_overlay_svg(f, img);
  }
  std::cout << "wrote " << with_suffix(base, ".pgm").string() << " (" << img.width << "x" << img.height
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

std::pair<std::string, unsigned short> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("--bind expects host:port");
  const std::string host = bind.substr(0, colon);
  const std::string port = bind.substr(colon + 1);
  std::size_t pos = 0;
  int p = -1;
  try {
    p = std::stoi(port, &pos);
  } catch (const std::exception&) {
  }
  if (host.empty() || pos != port.size() || p < 0 || p > 65535) {
    throw UsageError("invalid --bind '" + bind + "'");
  }
  return {host, static_cast<unsigned short>(p)};
}

int cmd_serve(const std::string& scene_arg, double dt, const std::string& bind, double hz,
              const std::string& record) {
  const auto [host, port] = parse_bind(bind);
  if (!(hz > 0.0)) throw UsageError("--snapshot-hz must be positive");
  Engine engine(resolve_scene(scene_arg, dt), !record.empty());
  EngineRunner runner(engine);
  Service service(engine, ServiceOptions{host, port, hz});
  const unsigned short bound = service.start();
  runner.start();
  std::cout << "serving on ws://" << host << ':' << bound << "/  (GET /scene, /fluoro/<seq>.pgm)"
            << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));

  service.stop();
  runner.stop();
  if (!record.empty()) {
    auto f = open_out(record);
    write_script_csv(f, engine.recording());
    auto log = open_out(with_suffix(record, "_log.csv"));
    write_trajectory_csv(log, engine.recorded_samples());
    std::cout << "recorded " << engine.recorded_samples().size() << " ticks to " << record << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_replay(const std::string& scene_arg, double dt, const std::string& script, const std::string& out) {
  const Scene scene = resolve_scene(scene_arg, dt);
  const RunResult r = run_script(scene, to_script(load_script(script)));
  const fs::path csv = out.empty() ? with_suffix(script, "_replay.csv") : fs::path(out);
  auto f = open_out(csv);
  write_trajectory_csv(f, r.samples);
  std::cout << "replayed " << r.samples.size() << " ticks to " << csv.string() << '\n';
  if (r.fault_count() > 0) {
    std::cout << "Unreachable ticks: " << r.unreachable_ticks << "\nKinematics faults: "
              << r.kinematics_faults << '\n';
  }
  return 0;
}

int cmd_analyze(const std::string& log, const std::string& out) {
  std::istringstream in(read_file(log));
  const auto samples = read_trajectory_csv(in);
  const DeviationReport rep = deviation_report(samples);
  if (!out.empty()) {
    auto txt = open_out(with_suffix(out, ".txt"));
    write_report_text(txt, rep);
    auto csv = open_out(with_suffix(out, ".csv"));
    write_report_csv(csv, rep);
  }
  print_report(std::cout, rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fracsim: teleoperated fracture-reduction simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fracsim 1.0");

  std::string scene, script, out, bind = "127.0.0.1:8080", angles = "0,0,0", log, record;
  double dt = 0.0, hz = 60.0;
  std::uint64_t seed = 1, pairs = 10000;

  auto add_scene = [&](CLI::App* c) {
    c->add_option("--scene", scene,
                  "Scene file, or a name looked up in $FRACSIM_SCENE_DIR (default: femur_default.scene)");
  };
  auto add_dt = [&](CLI::App* c) {
    c->add_option("--dt", dt, "Override the scene timestep in seconds")->check(CLI::PositiveNumber);
  };

  auto* sim = app.add_subcommand("simulate", "Run a device script and write the trajectory and deviation report");
  add_scene(sim);
  add_dt(sim);
  sim->add_option("--script", script, "Device script CSV")->required();
  sim->add_option("--out", out, "Trajectory CSV path (reports are written next to it)");

  auto* fuzz = app.add_subcommand("collision-fuzz", "Compare SAT contacts against the box-clipping oracle");
  fuzz->add_option("-n,--pairs", pairs, "Number of random box pairs");
  fuzz->add_option("--seed", seed, "Random seed");
  fuzz->add_option("--out", out, "Disagreement report CSV");

  auto* fluoro = app.add_subcommand("fluoro", "Render a fluoroscopy image (PGM + overlay)");
  add_scene(fluoro);
  fluoro->add_option("--angles", angles, "C-arm rotation alpha,beta,gamma in degrees");
  fluoro->add_option("--log", log, "Trajectory CSV; renders the last ring pose");
  fluoro->add_option("--out", out, "Output path prefix (default: fluoro)");

  auto* serve = app.add_subcommand("serve", "Run the live session server");
  add_scene(serve);
  add_dt(serve);
  serve->add_option("--bind", bind, "host:port (port 0 picks a free port)");
  serve->add_option("--snapshot-hz", hz, "Snapshot broadcast rate");
  serve->add_option("--record", record, "Write the session as a replayable script on exit");

  auto* replay = app.add_subcommand("replay", "Re-run a recorded session and write its trajectory log");
  add_scene(replay);
  add_dt(replay);
  replay->add_option("--script", script, "Recorded session script")->required();
  replay->add_option("--out", out, "Trajectory CSV path");

  auto* analyze = app.add_subcommand("analyze", "Deviation report for a trajectory CSV");
  analyze->add_option("--log", log, "Trajectory CSV")->required();
  analyze->add_option("--out", out, "Report path prefix (.txt and .csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate({scene, script, out, dt});
    if (*fuzz) return cmd_fuzz(pairs, seed, out);
    if (*fluoro) return cmd_fluoro(scene, angles, out, log);
    if (*serve) return cmd_serve(scene, dt, bind, hz, record);
    if (*replay) return cmd_replay(scene, dt, script, out);
    if (*analyze) return cmd_analyze(log, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
