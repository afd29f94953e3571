#include <gtest/gtest.h>

#include <random>

#include "fracsim/operator.hpp"
#include "fracsim/protocol.hpp"

using namespace fracsim;
using namespace fracsim::protocol;

namespace {

std::string code_of(std::string_view text) {
  try {
    parse_client_message(text);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  return "ok";
}

}  // namespace

TEST(Protocol, DeviceInputParses) {
  const auto m = parse_client_message(
      R"({"v":1,"type":"device_input","hc_px":1,"hc_py":2,"hc_pz":3,"hc_qa":4,"hc_qb":5,"hc_qg":6,)"
      R"("engaged":false,"grip":0.5})");
  const auto& in = std::get<DeviceInputMsg>(m).input;
  EXPECT_EQ(in.pose.pz, 3.0);
  EXPECT_EQ(in.pose.qg, 6.0);
  EXPECT_FALSE(in.engaged);
  EXPECT_EQ(in.grip, 0.5);
  EXPECT_FALSE(in.twist.has_value());
}

TEST(Protocol, EncodeParseRoundTrip) {
  DeviceInputMsg d;
  d.input.pose = {0.1, -2.0, 3.5, 10.0, -20.0, 170.0};
  d.input.twist = WireTwist{1, 2, 3, 4, 5, 6};
  d.input.grip = 1.0;
  const auto back = std::get<DeviceInputMsg>(parse_client_message(encode(d))).input;
  EXPECT_EQ(back.pose.px, 0.1);
  EXPECT_EQ(back.twist->wy, 5.0);

  SessionControlMsg s;
  s.action = ControlAction::SetParam;
  s.name = "k_n_m";
  s.value = 2000.0;
  s.id = 42;
  const auto sb = std::get<SessionControlMsg>(parse_client_message(encode(s)));
  EXPECT_EQ(sb.action, ControlAction::SetParam);
  EXPECT_EQ(sb.name, "k_n_m");
  EXPECT_EQ(*sb.value, 2000.0);
  EXPECT_EQ(*sb.id, 42);

  const auto cb = std::get<CArmDeltaMsg>(parse_client_message(encode(CArmDeltaMsg{5, -10, 0})));
  EXPECT_EQ(cb.beta, -10.0);
  EXPECT_TRUE(std::holds_alternative<FluoroRequestMsg>(parse_client_message(encode(FluoroRequestMsg{}))));
}

TEST(Protocol, SetParamValueForms) {
  auto value_of = [](const char* v) {
    return std::get<SessionControlMsg>(
               parse_client_message(std::string(R"({"v":1,"type":"session","action":"set_param","name":"x","value":)") +
                                    v + "}"))
        .value;
  };
  EXPECT_EQ(*value_of("true"), 1.0);
  EXPECT_EQ(*value_of("false"), 0.0);
  EXPECT_FALSE(value_of("null").has_value());
  EXPECT_EQ(*value_of("2.5"), 2.5);
}

TEST(Protocol, FaultCodes) {
  EXPECT_EQ(code_of("not json"), kMalformed);
  EXPECT_EQ(code_of("[1,2]"), kMalformed);
  EXPECT_EQ(code_of(R"({"type":"device_input"})"), kUnsupportedVersion);
  EXPECT_EQ(code_of(R"({"v":2,"type":"device_input"})"), kUnsupportedVersion);
  EXPECT_EQ(code_of(R"({"v":1})"), kMalformed);
  EXPECT_EQ(code_of(R"({"v":1,"type":"teleport"})"), kUnknownType);
  EXPECT_EQ(code_of(R"({"v":1,"type":"device_input","hc_px":1})"), kInvalidField);
  EXPECT_EQ(code_of(R"({"v":1,"type":"device_input","hc_px":"1","hc_py":0,"hc_pz":0,"hc_qa":0,"hc_qb":0,"hc_qg":0})"),
            kInvalidField);
  EXPECT_EQ(code_of(R"({"v":1,"type":"device_input","hc_px":0,"hc_py":0,"hc_pz":0,"hc_qa":0,"hc_qb":0,"hc_qg":0,"grip":2})"),
            kInvalidField);
  EXPECT_EQ(code_of(R"({"v":1,"type":"device_input","hc_px":0,"hc_py":0,"hc_pz":0,"hc_qa":0,"hc_qb":0,"hc_qg":0,"vx":1})"),
            kInvalidField);
  EXPECT_EQ(code_of(R"({"v":1,"type":"session","action":"explode"})"), kInvalidField);
  EXPECT_EQ(code_of(R"({"v":1,"type":"session","action":"pause","id":"a"})"), kInvalidField);
  EXPECT_EQ(code_of(R"({"v":1,"type":"session","action":"set_param","name":"k_n_m"})"), kInvalidField);
  EXPECT_EQ(code_of(R"({"v":1,"type":"carm_delta","alpha":1,"beta":2})"), kInvalidField);
}

TEST(Protocol, RandomBytesNeverEscapeAsOtherExceptions) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> len(0, 200);
  const std::string valid = encode(DeviceInputMsg{});
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    if (i % 2 == 0) {
      const int n = len(rng);
      for (int k = 0; k < n; ++k) s.push_back(static_cast<char>(byte(rng)));
    } else {
      s = valid;
      for (int k = 0; k < 3; ++k) s[rng() % s.size()] = static_cast<char>(byte(rng));
    }
    try {
      parse_client_message(s);
    } catch (const ProtocolError&) {
    } catch (const std::exception& e) {
      FAIL() << "unexpected exception " << e.what();
    }
  }
}

TEST(Protocol, SnapshotMirrorsCsvColumns) {
  const Scene sc = load_scene_file(std::string(FRACSIM_SOURCE_DIR) + "/scenes/femur_default.scene");
  SimState s = make_initial_state(sc);
  PushOperator op({Vec3(0.2, 0.0, 1.0), sc.scaling.max_v, 20.0});
  for (int k = 0; k < 600; ++k) s = step(s, sc, op.next(s.force.f_global, sc.dt));
  Snapshot snap;
  snap.tick = s.tick;
  snap.sample = make_sample(s);
  const json j = snapshot_json(snap);
  EXPECT_EQ(j.at("type"), "snapshot");
  for (const auto& c : trajectory_columns()) EXPECT_TRUE(j.contains(c)) << c;
  const auto vals = sample_values(snap.sample);
  EXPECT_EQ(j.at("rsr_a_pz").get<double>(), vals[15]);
  const TrajectorySample back = sample_from_snapshot_json(json::parse(j.dump()));
  EXPECT_LT((back.rsr_actual.position - s.ring_pose.position).norm(), 1e-15);
  EXPECT_LT(angular_distance(back.rsr_actual.orientation, s.ring_pose.orientation), 1e-12);
  EXPECT_EQ(back.f_global, s.force.f_global);
}

TEST(Protocol, SnapshotSelfConsistency) {
  // A client can rebuild the distal boxes from the ring pose and the scene,
  // and recompute the collision flags.
  const Scene sc = load_scene_file(std::string(FRACSIM_SOURCE_DIR) + "/scenes/femur_default.scene");
  SimState s = make_initial_state(sc);
  PushOperator op({Vec3(0.1, 0.05, 1.0), sc.scaling.max_v, 20.0});
  int colliding = 0;
  for (int k = 0; k < 3000; ++k) {
    s = step(s, sc, op.next(s.force.f_global, sc.dt));
    if (k % 25) continue;
    Snapshot snap;
    snap.sample = make_sample(s);
    const TrajectorySample back = sample_from_snapshot_json(json::parse(snapshot_json(snap).dump()));
    const auto distal = attach_distal(back.rsr_actual, sc.distal);
    for (int i = 0; i < 2; ++i) EXPECT_LT((distal[i].center - s.distal[i].center).norm(), 1e-12);
    const auto contacts = scene_contacts(sc.proximal, distal);
    bool grazing = false;
    for (const auto& c : contacts) grazing |= std::abs(c.smallest_overlap) < 1e-9;
    if (!grazing) {
      EXPECT_EQ(collision_mask(contacts), back.collide);
    }
    colliding += back.collide ? 1 : 0;
  }
  EXPECT_GT(colliding, 10);
}

TEST(Protocol, AckFaultAndFrameMessages) {
  const json ack = json::parse(ack_message(ControlAction::Pause, 7));
  EXPECT_EQ(ack.at("type"), "ack");
  EXPECT_EQ(ack.at("action"), "pause");
  EXPECT_EQ(ack.at("id"), 7);
  const json fault = json::parse(fault_message(kInvalidParam, "nope"));
  EXPECT_EQ(fault.at("code"), "invalid_param");
  EXPECT_FALSE(fault.contains("id"));

  FluoroImage img;
  img.width = 2;
  img.height = 3;
  img.pixel_size = 0.0005;
  img.overlay.push_back({"leg_1", {Vec2(1, 2), Vec2(3, 4)}, false});
  const json f = fluoro_frame_json(img, 9, "/fluoro/9.pgm", {0, 0, deg_to_rad(30)});
  EXPECT_EQ(f.at("raster"), "/fluoro/9.pgm");
  EXPECT_EQ(f.at("pixel_size_mm"), 0.5);
  EXPECT_NEAR(f.at("carm_qg").get<double>(), 30.0, 1e-12);
  EXPECT_EQ(f.at("overlay")[0].at("points")[1][0], 3.0);
}

TEST(Protocol, SceneJsonInWireUnits) {
  const Scene sc = load_scene_file(std::string(FRACSIM_SOURCE_DIR) + "/scenes/femur_default.scene");
  const json j = scene_json(sc);
  EXPECT_NEAR(j.at("ring_home").at("pz").get<double>(), 200.0, 1e-12);
  EXPECT_NEAR(j.at("proximal")[0].at("half_extents")[2].get<double>(), 90.0, 1e-12);
  EXPECT_NEAR(j.at("proximal")[1].at("pose").at("qb").get<double>(), -40.0, 1e-9);
  EXPECT_EQ(j.at("distal")[1].at("label"), "distal_condyle");
  EXPECT_EQ(j.at("f_max_n"), 30.0);
  EXPECT_NEAR(j.at("max_v_mm_s").get<double>(), 50.0, 1e-12);
  EXPECT_NEAR(j.at("fluoro").at("thigh").at("radius").get<double>(), 70.0, 1e-12);
}
