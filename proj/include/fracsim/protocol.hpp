#pragma once

// WebSocket JSON protocol. Every message is one JSON object carrying the
// protocol version "v" and a "type". Poses travel in mm and degrees with the
// same field names as the trajectory CSV header. See docs/protocol.md.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "json.hpp"

#include "fracsim/fluoro.hpp"
#include "fracsim/scene.hpp"
#include "fracsim/sim.hpp"
#include "fracsim/trajectory_io.hpp"

namespace fracsim::protocol {

using json = nlohmann::json;

inline constexpr int kVersion = 1;

// Fault codes sent to clients.
inline constexpr const char* kMalformed = "malformed";
inline constexpr const char* kUnsupportedVersion = "unsupported_version";
inline constexpr const char* kUnknownType = "unknown_type";
inline constexpr const char* kInvalidField = "invalid_field";
inline constexpr const char* kInputTokenHeld = "input_token_held";
inline constexpr const char* kInvalidParam = "invalid_param";

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& detail)
      : std::runtime_error(detail), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// ---------------------------------------------------------------------------
// Client -> server

struct DeviceInputMsg {
  WireDeviceInput input;
};

struct CArmDeltaMsg {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;  // deg
};

enum class ControlAction { Pause, Resume, Reset, SetParam, Step };

inline const char* to_string(ControlAction a) {
  switch (a) {
    case ControlAction::Pause: return "pause";
    case ControlAction::Resume: return "resume";
    case ControlAction::Reset: return "reset";
    case ControlAction::SetParam: return "set_param";
    case ControlAction::Step: return "step";
  }
  return "?";
}

struct SessionControlMsg {
  ControlAction action = ControlAction::Pause;
  std::string name;                  // set_param only
  std::optional<double> value;       // set_param only; null clears optional params
  std::optional<std::int64_t> id;    // echoed in the Ack / Fault
};

struct FluoroRequestMsg {};

using ClientMessage = std::variant<DeviceInputMsg, CArmDeltaMsg, SessionControlMsg, FluoroRequestMsg>;

namespace detail {

inline double number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(kInvalidField, std::string("missing field ") + key);
  if (!it->is_number()) throw ProtocolError(kInvalidField, std::string(key) + " must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ProtocolError(kInvalidField, std::string(key) + " must be finite");
  return v;
}

inline std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return number(j, key);
}

inline bool boolean(const json& j, const char* key, bool fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw ProtocolError(kInvalidField, std::string(key) + " must be a boolean");
  return it->get<bool>();
}

inline DeviceInputMsg parse_device_input(const json& j) {
  DeviceInputMsg m;
  auto& in = m.input;
  in.pose = {number(j, "hc_px"), number(j, "hc_py"), number(j, "hc_pz"),
             number(j, "hc_qa"), number(j, "hc_qb"), number(j, "hc_qg")};
  in.engaged = boolean(j, "engaged", true);
  if (const auto g = optional_number(j, "grip")) {
    if (*g < 0.0 || *g > 1.0) throw ProtocolError(kInvalidField, "grip must lie in [0, 1]");
    in.grip = *g;
  }
  static const char* tw[] = {"vx", "vy", "vz", "wx", "wy", "wz"};
  int present = 0;
  for (const char* k : tw) present += j.contains(k) ? 1 : 0;
  if (present != 0 && present != 6) {
    throw ProtocolError(kInvalidField, "twist fields vx..wz must be all present or all absent");
  }
  if (present == 6) {
    in.twist = WireTwist{number(j, "vx"), number(j, "vy"), number(j, "vz"),
                         number(j, "wx"), number(j, "wy"), number(j, "wz")};
  }
  return m;
}

inline SessionControlMsg parse_session(const json& j) {
  SessionControlMsg m;
  const auto it = j.find("action");
  if (it == j.end() || !it->is_string()) {
    throw ProtocolError(kInvalidField, "session message needs a string action");
  }
  const std::string a = it->get<std::string>();
  if (a == "pause") m.action = ControlAction::Pause;
  else if (a == "resume") m.action = ControlAction::Resume;
  else if (a == "reset") m.action = ControlAction::Reset;
  else if (a == "step") m.action = ControlAction::Step;
  else if (a == "set_param") m.action = ControlAction::SetParam;
  else throw ProtocolError(kInvalidField, "unknown session action '" + a + "'");

  if (j.contains("id")) {
    if (!j.at("id").is_number_integer()) throw ProtocolError(kInvalidField, "id must be an integer");
    m.id = j.at("id").get<std::int64_t>();
  }
  if (m.action == ControlAction::SetParam) {
    const auto n = j.find("name");
    if (n == j.end() || !n->is_string()) throw ProtocolError(kInvalidField, "set_param needs a name");
    m.name = n->get<std::string>();
    const auto v = j.find("value");
    if (v == j.end()) throw ProtocolError(kInvalidField, "set_param needs a value");
    if (v->is_boolean()) {
      m.value = v->get<bool>() ? 1.0 : 0.0;
    } else if (!v->is_null()) {
      m.value = number(j, "value");
    }
  }
  return m;
}

}  // namespace detail

/// Parses one text frame. Throws ProtocolError for anything that is not a
/// well-formed client message.
inline ClientMessage parse_client_message(std::string_view text) {
  const json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) throw ProtocolError(kMalformed, "not valid JSON");
  if (!j.is_object()) throw ProtocolError(kMalformed, "message must be a JSON object");
  const auto v = j.find("v");
  if (v == j.end() || !v->is_number_integer()) {
    throw ProtocolError(kUnsupportedVersion, "missing integer protocol version v");
  }
  if (v->get<std::int64_t>() != kVersion) {
    throw ProtocolError(kUnsupportedVersion, "protocol version " + v->dump() + " is not supported");
  }
  const auto t = j.find("type");
  if (t == j.end() || !t->is_string()) throw ProtocolError(kMalformed, "missing string type");
  const std::string type = t->get<std::string>();
  if (type == "device_input") return detail::parse_device_input(j);
  if (type == "carm_delta") {
    return CArmDeltaMsg{detail::number(j, "alpha"), detail::number(j, "beta"),
                        detail::number(j, "gamma")};
  }
  if (type == "session") return detail::parse_session(j);
  if (type == "fluoro_request") return FluoroRequestMsg{};
  throw ProtocolError(kUnknownType, "unknown message type '" + type + "'");
}

inline std::string encode(const DeviceInputMsg& m) {
  const auto& p = m.input.pose;
  json j = {{"v", kVersion},   {"type", "device_input"}, {"hc_px", p.px}, {"hc_py", p.py},
            {"hc_pz", p.pz},   {"hc_qa", p.qa},          {"hc_qb", p.qb}, {"hc_qg", p.qg},
            {"engaged", m.input.engaged}, {"grip", m.input.grip}};
  if (m.input.twist) {
    const auto& w = *m.input.twist;
    j["vx"] = w.vx; j["vy"] = w.vy; j["vz"] = w.vz;
    j["wx"] = w.wx; j["wy"] = w.wy; j["wz"] = w.wz;
  }
  return j.dump();
}

inline std::string encode(const CArmDeltaMsg& m) {
  return json{{"v", kVersion}, {"type", "carm_delta"}, {"alpha", m.alpha}, {"beta", m.beta},
              {"gamma", m.gamma}}
      .dump();
}

inline std::string encode(const SessionControlMsg& m) {
  json j = {{"v", kVersion}, {"type", "session"}, {"action", to_string(m.action)}};
  if (m.action == ControlAction::SetParam) {
    j["name"] = m.name;
    j["value"] = m.value ? json(*m.value) : json(nullptr);
  }
  if (m.id) j["id"] = *m.id;
  return j.dump();
}

inline std::string encode(const FluoroRequestMsg&) {
  return json{{"v", kVersion}, {"type", "fluoro_request"}}.dump();
}

// ---------------------------------------------------------------------------
// Server -> client

/// What the engine publishes after every tick.
struct Snapshot {
  std::uint64_t tick = 0;
  bool paused = false;
  TrajectorySample sample;
  TickFaults faults;
  std::uint64_t unreachable_ticks = 0;
  std::uint64_t kinematics_faults = 0;
};

/// Snapshot fields use the trajectory CSV names and units, at full precision.
inline json snapshot_json(const Snapshot& s) {
  json j = {{"v", kVersion}, {"type", "snapshot"}};
  const auto& cols = trajectory_columns();
  const auto vals = sample_values(s.sample);
  for (std::size_t i = 0; i < cols.size(); ++i) j[cols[i]] = vals[i];
  j["collide"] = s.sample.collide;
  j["tick"] = s.tick;
  j["paused"] = s.paused;
  j["unreachable"] = s.faults.unreachable;
  j["kinematics_fault"] = s.faults.kinematics_fault;
  j["unreachable_ticks"] = s.unreachable_ticks;
  j["kinematics_faults"] = s.kinematics_faults;
  return j;
}

/// Reads a snapshot message back into a sample (wire units converted to SI).
inline TrajectorySample sample_from_snapshot_json(const json& j) {
  auto pose = [&](const std::string& p) {
    return from_wire(WirePose{j.at(p + "px").get<double>(), j.at(p + "py").get<double>(),
                              j.at(p + "pz").get<double>(), j.at(p + "qa").get<double>(),
                              j.at(p + "qb").get<double>(), j.at(p + "qg").get<double>()});
  };
  TrajectorySample s;
  s.t = j.at("t").get<double>();
  s.hc = pose("hc_");
  s.rsr_target = pose("rsr_t_");
  s.rsr_actual = pose("rsr_a_");
  for (int i = 0; i < 3; ++i) {
    s.joints.d[i] = mm_to_m(j.at("d" + std::to_string(i + 1)).get<double>());
    s.joints.theta[i] = deg_to_rad(j.at("th" + std::to_string(i + 1)).get<double>());
  }
  s.f_global = Vec3(j.at("fgx").get<double>(), j.at("fgy").get<double>(), j.at("fgz").get<double>());
  s.collide = j.at("collide").get<unsigned>();
  return s;
}

inline std::string fault_message(const std::string& code, const std::string& detail,
                                 std::optional<std::int64_t> id = std::nullopt) {
  json j = {{"v", kVersion}, {"type", "fault"}, {"code", code}, {"detail", detail}};
  if (id) j["id"] = *id;
  return j.dump();
}

inline std::string ack_message(ControlAction action, std::optional<std::int64_t> id = std::nullopt) {
  json j = {{"v", kVersion}, {"type", "ack"}, {"action", to_string(action)}};
  if (id) j["id"] = *id;
  return j.dump();
}

/// Overlay polylines inline; the raster is fetched over HTTP from raster_ref.
inline json fluoro_frame_json(const FluoroImage& img, std::uint64_t seq, const std::string& raster_ref,
                              const EulerAngles& carm) {
  json overlay = json::array();
  for (const auto& pl : img.overlay) {
    json pts = json::array();
    for (const auto& p : pl.points) pts.push_back({p.x(), p.y()});
    overlay.push_back({{"label", pl.label}, {"closed", pl.closed}, {"points", pts}});
  }
  return {{"v", kVersion},
          {"type", "fluoro_frame"},
          {"seq", seq},
          {"width", img.width},
          {"height", img.height},
          {"pixel_size_mm", m_to_mm(img.pixel_size)},
          {"carm_qa", rad_to_deg(carm.alpha)},
          {"carm_qb", rad_to_deg(carm.beta)},
          {"carm_qg", rad_to_deg(carm.gamma)},
          {"overlay", overlay},
          {"raster", raster_ref}};
}

// ---------------------------------------------------------------------------
// Static scene description served over HTTP (mm, degrees).

inline json pose_json(const Pose& p) {
  const WirePose w = to_wire(p);
  return {{"px", w.px}, {"py", w.py}, {"pz", w.pz}, {"qa", w.qa}, {"qb", w.qb}, {"qg", w.qg}};
}

inline json vec_mm(const Vec3& v) { return {m_to_mm(v.x()), m_to_mm(v.y()), m_to_mm(v.z())}; }

inline json scene_json(const Scene& s) {
  json prox = json::array();
  for (const auto& b : s.proximal) {
    Mat3 m;
    for (int i = 0; i < 3; ++i) m.col(i) = b.axes[i];
    prox.push_back({{"label", to_string(b.label)},
                    {"pose", pose_json(Pose{b.center, Rotation{m}})},
                    {"half_extents", vec_mm(b.half_extents)}});
  }
  json dist = json::array();
  for (const auto& b : s.distal) {
    dist.push_back({{"label", to_string(b.label)},
                    {"offset", pose_json(b.offset)},
                    {"half_extents", vec_mm(b.half_extents)}});
  }
  json rsr = {{"fixed_anchors", json::array()},
              {"moving_anchors", json::array()},
              {"rotary_axes", json::array()},
              {"actuator_min", m_to_mm(s.rsr.actuator_min)},
              {"actuator_max", m_to_mm(s.rsr.actuator_max)}};
  for (int i = 0; i < 3; ++i) {
    rsr["fixed_anchors"].push_back(vec_mm(s.rsr.fixed_anchors[i]));
    rsr["moving_anchors"].push_back(vec_mm(s.rsr.moving_anchors[i]));
    const Vec3& a = s.rsr.rotary_axes[i];
    rsr["rotary_axes"].push_back({a.x(), a.y(), a.z()});
  }
  json fluoro = {{"width", s.fluoro.width_px},
                 {"height", s.fluoro.height_px},
                 {"pixel_size_mm", m_to_mm(s.fluoro.pixel_size)},
                 {"carm", pose_json(Pose{s.fluoro.carm_center, s.fluoro.carm_rotation})},
                 {"bone_opacity", s.fluoro.bone_opacity},
                 {"thigh_opacity", s.fluoro.thigh_opacity}};
  if (s.fluoro.thigh) {
    fluoro["thigh"] = {{"a", vec_mm(s.fluoro.thigh->a)},
                       {"b", vec_mm(s.fluoro.thigh->b)},
                       {"radius", m_to_mm(s.fluoro.thigh->radius)}};
  }
  return {{"v", kVersion},
          {"type", "scene"},
          {"dt_s", s.dt},
          {"ring_home", pose_json(s.ring_home)},
          {"proximal", prox},
          {"distal", dist},
          {"rsr", rsr},
          {"hc_workspace_center", vec_mm(s.hc.workspace_center)},
          {"max_v_mm_s", m_to_mm(s.scaling.max_v)},
          {"max_w_deg_s", rad_to_deg(s.scaling.max_w)},
          {"k_n_m", s.force.k},
          {"c_ns_m", s.force.c},
          {"f_max_n", s.force.f_max ? json(*s.force.f_max) : json(nullptr)},
          {"strict_constraint", s.strict_constraint},
          {"fluoro", fluoro}};
}

}  // namespace fracsim::protocol
