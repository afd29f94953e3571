#pragma once

// CSV trajectory logs and device scripts. Files use mm, degrees, N; the
// simulator works in SI, so every conversion happens here.

#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fracsim/sim.hpp"

namespace fracsim {

/// A pose as it appears in files and on the wire: mm and degrees (extrinsic XYZ).
struct WirePose {
  double px = 0.0, py = 0.0, pz = 0.0;
  double qa = 0.0, qb = 0.0, qg = 0.0;
};

inline WirePose to_wire(const Pose& p) {
  const EulerAngles e = rotation_to_euler(p.orientation);
  return {m_to_mm(p.position.x()), m_to_mm(p.position.y()), m_to_mm(p.position.z()),
          rad_to_deg(e.alpha) + 0.0, rad_to_deg(e.beta) + 0.0, rad_to_deg(e.gamma) + 0.0};
}

inline Pose from_wire(const WirePose& w) {
  return Pose{Vec3(mm_to_m(w.px), mm_to_m(w.py), mm_to_m(w.pz)),
              euler_to_rotation({deg_to_rad(w.qa), deg_to_rad(w.qb), deg_to_rad(w.qg)})};
}

/// Twist in mm/s and deg/s.
struct WireTwist {
  double vx = 0.0, vy = 0.0, vz = 0.0;
  double wx = 0.0, wy = 0.0, wz = 0.0;
};

inline Twist from_wire(const WireTwist& w) {
  return Twist{Vec3(mm_to_m(w.vx), mm_to_m(w.vy), mm_to_m(w.vz)),
               Vec3(deg_to_rad(w.wx), deg_to_rad(w.wy), deg_to_rad(w.wz))};
}

inline WireTwist to_wire(const Twist& t) {
  return {m_to_mm(t.linear.x()),      m_to_mm(t.linear.y()),      m_to_mm(t.linear.z()),
          rad_to_deg(t.angular.x()), rad_to_deg(t.angular.y()), rad_to_deg(t.angular.z())};
}

/// Device input exactly as received (wire units), so that a recorded session
/// replays through the same conversion path.
struct WireDeviceInput {
  WirePose pose;
  std::optional<WireTwist> twist;
  bool engaged = true;
  double grip = 0.0;
};

inline DeviceInput from_wire(const WireDeviceInput& w) {
  DeviceInput in;
  in.pose = from_wire(w.pose);
  if (w.twist) in.twist = from_wire(*w.twist);
  in.engaged = w.engaged;
  in.grip = w.grip;
  return in;
}

// ---------------------------------------------------------------------------
// Trajectory log

/// Column names shared by the CSV log and the live snapshot messages.
inline const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> cols = {
      "t",        "hc_px",    "hc_py",    "hc_pz",    "hc_qa",    "hc_qb",    "hc_qg",
      "rsr_t_px", "rsr_t_py", "rsr_t_pz", "rsr_t_qa", "rsr_t_qb", "rsr_t_qg", "rsr_a_px",
      "rsr_a_py", "rsr_a_pz", "rsr_a_qa", "rsr_a_qb", "rsr_a_qg", "d1",       "d2",
      "d3",       "th1",      "th2",      "th3",      "fgx",      "fgy",      "fgz",
      "collide"};
  return cols;
}

/// Sample values in column order, file units.
inline std::vector<double> sample_values(const TrajectorySample& s) {
  std::vector<double> v;
  v.reserve(trajectory_columns().size());
  v.push_back(s.t);
  for (const Pose* p : {&s.hc, &s.rsr_target, &s.rsr_actual}) {
    const WirePose w = to_wire(*p);
    v.insert(v.end(), {w.px, w.py, w.pz, w.qa, w.qb, w.qg});
  }
  for (double d : s.joints.d) v.push_back(m_to_mm(d));
  for (double th : s.joints.theta) v.push_back(rad_to_deg(th));
  v.insert(v.end(), {s.f_global.x(), s.f_global.y(), s.f_global.z()});
  v.push_back(static_cast<double>(s.collide));
  return v;
}

inline std::string format_fixed(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<TrajectorySample>& samples) {
  const auto& cols = trajectory_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& s : samples) {
    const auto v = sample_values(s);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) out << (i ? "," : "") << format_fixed(v[i]);
    out << ',' << s.collide << '\n';
  }
}

class CsvError : public std::runtime_error {
 public:
  CsvError(int line, const std::string& what)
      : std::runtime_error("csv line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

namespace csv_detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double to_number(const std::string& cell, int line, const std::string& col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw CsvError(line, "column " + col + ": not a number: '" + cell + "'");
  }
  if (pos != cell.size()) throw CsvError(line, "column " + col + ": trailing text: '" + cell + "'");
  return v;
}

struct Table {
  std::map<std::string, std::size_t> index;
  std::vector<std::pair<int, std::vector<std::string>>> rows;

  bool has(const std::string& c) const { return index.count(c) != 0; }
};

inline Table read_table(std::istream& in, const std::vector<std::string>& required) {
  Table t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    const auto header = split(line);
    for (std::size_t i = 0; i < header.size(); ++i) t.index[header[i]] = i;
    break;
  }
  for (const auto& r : required) {
    if (!t.has(r)) throw CsvError(line_no, "missing column " + r);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto cells = split(line);
    if (cells.size() != t.index.size()) {
      throw CsvError(line_no, "expected " + std::to_string(t.index.size()) + " cells, got " +
                                  std::to_string(cells.size()));
    }
    t.rows.emplace_back(line_no, std::move(cells));
  }
  return t;
}

}  // namespace csv_detail

inline std::vector<TrajectorySample> read_trajectory_csv(std::istream& in) {
  const auto& cols = trajectory_columns();
  const auto table = csv_detail::read_table(in, cols);
  std::vector<TrajectorySample> out;
  out.reserve(table.rows.size());
  for (const auto& [line, cells] : table.rows) {
    auto num = [&](const std::string& c) {
      return csv_detail::to_number(cells[table.index.at(c)], line, c);
    };
    auto pose = [&](const std::string& prefix) {
      return from_wire(WirePose{num(prefix + "px"), num(prefix + "py"), num(prefix + "pz"),
                                num(prefix + "qa"), num(prefix + "qb"), num(prefix + "qg")});
    };
    TrajectorySample s;
    s.t = num("t");
    s.hc = pose("hc_");
    s.rsr_target = pose("rsr_t_");
    s.rsr_actual = pose("rsr_a_");
    for (int i = 0; i < 3; ++i) {
      s.joints.d[i] = mm_to_m(num("d" + std::to_string(i + 1)));
      s.joints.theta[i] = deg_to_rad(num("th" + std::to_string(i + 1)));
    }
    s.f_global = Vec3(num("fgx"), num("fgy"), num("fgz"));
    s.collide = static_cast<unsigned>(num("collide"));
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Device scripts

inline const std::vector<std::string>& script_columns() {
  static const std::vector<std::string> cols = {"t",     "hc_px", "hc_py", "hc_pz", "hc_qa",
                                                "hc_qb", "hc_qg", "engaged", "grip", "vx",
                                                "vy",    "vz",    "wx",    "wy",    "wz"};
  return cols;
}

/// Keyframe as stored in a script file.
struct WireKeyframe {
  double t = 0.0;
  WireDeviceInput input;
};

inline ScriptKeyframe from_wire(const WireKeyframe& w) {
  const DeviceInput in = from_wire(w.input);
  return {w.t, in.pose, in.twist, in.engaged, in.grip};
}

inline std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes keyframes with round-trip precision; twist cells stay empty when
/// the keyframe has no explicit twist.
inline void write_script_csv(std::ostream& out, const std::vector<WireKeyframe>& frames) {
  const auto& cols = script_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& f : frames) {
    const auto& p = f.input.pose;
    out << format_exact(f.t);
    for (double v : {p.px, p.py, p.pz, p.qa, p.qb, p.qg}) out << ',' << format_exact(v);
    out << ',' << (f.input.engaged ? 1 : 0) << ',' << format_exact(f.input.grip);
    if (f.input.twist) {
      const auto& w = *f.input.twist;
      for (double v : {w.vx, w.vy, w.vz, w.wx, w.wy, w.wz}) out << ',' << format_exact(v);
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
}

inline std::vector<WireKeyframe> read_script_wire(std::istream& in) {
  const auto table = csv_detail::read_table(in, {"t", "hc_px", "hc_py", "hc_pz", "hc_qa", "hc_qb", "hc_qg"});
  std::vector<WireKeyframe> out;
  out.reserve(table.rows.size());
  for (const auto& [line, cells] : table.rows) {
    auto cell = [&](const std::string& c) -> const std::string& { return cells[table.index.at(c)]; };
    auto num = [&](const std::string& c) { return csv_detail::to_number(cell(c), line, c); };
    WireKeyframe f;
    f.t = num("t");
    f.input.pose = {num("hc_px"), num("hc_py"), num("hc_pz"), num("hc_qa"), num("hc_qb"), num("hc_qg")};
    if (table.has("engaged") && !cell("engaged").empty()) f.input.engaged = num("engaged") != 0.0;
    if (table.has("grip") && !cell("grip").empty()) f.input.grip = num("grip");
    const std::vector<std::string> tw = {"vx", "vy", "vz", "wx", "wy", "wz"};
    bool any = false, all = true;
    for (const auto& c : tw) {
      const bool filled = table.has(c) && !cell(c).empty();
      any |= filled;
      all &= filled;
    }
    if (any && !all) throw CsvError(line, "twist columns must be all filled or all empty");
    if (all) {
      f.input.twist = WireTwist{num("vx"), num("vy"), num("vz"), num("wx"), num("wy"), num("wz")};
    }
    out.push_back(f);
  }
  return out;
}

inline Script to_script(const std::vector<WireKeyframe>& frames) {
  Script s;
  s.reserve(frames.size());
  for (const auto& f : frames) s.push_back(from_wire(f));
  return s;
}

inline Script read_script_csv(std::istream& in) { return to_script(read_script_wire(in)); }

/// Report summary as text and as a two-row CSV.
inline void write_report_text(std::ostream& out, const DeviationReport& r) {
  out << "samples: " << r.samples << '\n';
  out << "translation_mm: max " << format_fixed(r.translation_mm.max) << " mean "
      << format_fixed(r.translation_mm.mean) << " rms " << format_fixed(r.translation_mm.rms) << '\n';
  out << "rotation_deg: max " << format_fixed(r.rotation_deg.max) << " mean "
      << format_fixed(r.rotation_deg.mean) << " rms " << format_fixed(r.rotation_deg.rms) << '\n';
}

inline void write_report_csv(std::ostream& out, const DeviationReport& r) {
  out << "quantity,max,mean,rms\n";
  out << "translation_mm," << format_fixed(r.translation_mm.max) << ','
      << format_fixed(r.translation_mm.mean) << ',' << format_fixed(r.translation_mm.rms) << '\n';
  out << "rotation_deg," << format_fixed(r.rotation_deg.max) << ','
      << format_fixed(r.rotation_deg.mean) << ',' << format_fixed(r.rotation_deg.rms) << '\n';
}

}  // namespace fracsim
