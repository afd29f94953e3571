#pragma once

// Live engine for interactive sessions. One thread owns the simulation state
// and advances it; other threads only touch the latest-wins input slot, the
// ordered control queue and the published snapshot.

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fracsim/protocol.hpp"
#include "fracsim/sim.hpp"
#include "fracsim/trajectory_io.hpp"

namespace fracsim {

/// Applies one runtime parameter change to a scene copy. Returns an error
/// message when the name is unknown or the value is out of range.
inline std::optional<std::string> apply_param(Scene& scene, const std::string& name,
                                              std::optional<double> value) {
  Scene next = scene;
  auto need = [&]() -> std::optional<std::string> {
    if (!value) return name + " needs a numeric value";
    return std::nullopt;
  };
  if (name == "f_max_n") {
    next.force.f_max = value;
  } else if (name == "strict_constraint") {
    if (auto e = need()) return e;
    next.strict_constraint = *value != 0.0;
  } else {
    if (auto e = need()) return e;
    const double v = *value;
    if (name == "max_v_m_s") next.scaling.max_v = v;
    else if (name == "max_w_rad_s") next.scaling.max_w = v;
    else if (name == "k_n_m") next.force.k = v;
    else if (name == "c_ns_m") next.force.c = v;
    else if (name == "drive.linear.stiffness") next.drives.linear.stiffness = v;
    else if (name == "drive.linear.damping") next.drives.linear.damping = v;
    else if (name == "drive.linear.force_limit") next.drives.linear.force_limit = v;
    else if (name == "drive.rotary.stiffness") next.drives.rotary.stiffness = v;
    else if (name == "drive.rotary.damping") next.drives.rotary.damping = v;
    else if (name == "drive.rotary.force_limit") next.drives.rotary.force_limit = v;
    else return "unknown parameter '" + name + "'";
  }
  if (!is_valid(next.scaling) || !is_valid(next.force) || !is_valid(next.drives.linear) ||
      !is_valid(next.drives.rotary)) {
    return "value out of range for " + name;
  }
  scene = std::move(next);
  return std::nullopt;
}

struct ControlCommand {
  protocol::SessionControlMsg msg;
  // Called on the engine thread with an encoded Ack or Fault. Must not block.
  std::function<void(const std::string&)> reply;
};

class Engine {
 public:
  explicit Engine(Scene scene, bool record = false)
      : scene_(std::move(scene)), record_(record) {
    restart(WireDeviceInput{});
  }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // ---- any thread ----

  void submit_input(const WireDeviceInput& in) {
    std::lock_guard lock(input_mutex_);
    pending_input_ = in;
  }

  void submit_control(ControlCommand cmd) {
    std::lock_guard lock(control_mutex_);
    controls_.push_back(std::move(cmd));
  }

  std::shared_ptr<const protocol::Snapshot> snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
  }

  Scene scene_copy() const {
    std::lock_guard lock(scene_mutex_);
    return scene_;
  }

  std::uint64_t engine_ticks() const { return engine_ticks_.load(); }

  // ---- engine thread ----

  /// One engine tick: ordered controls first, then one simulation step unless
  /// paused (a queued "step" advances exactly one step while paused).
  void advance() {
    std::deque<ControlCommand> cmds;
    {
      std::lock_guard lock(control_mutex_);
      cmds.swap(controls_);
    }
    bool single_step = false;
    for (auto& c : cmds) single_step |= handle(c);

    std::optional<WireDeviceInput> fresh;
    {
      std::lock_guard lock(input_mutex_);
      fresh.swap(pending_input_);
    }
    if (!paused_ || single_step) {
      if (fresh) last_input_ = *fresh;
      run_step();
    }
    ++engine_ticks_;
  }

  bool paused() const { return paused_; }
  const SimState& state() const { return state_; }

  /// Inputs applied since the last (re)start, starting with the device pose at
  /// t = 0. Replaying them with run_script reproduces `recorded_samples`.
  const std::vector<WireKeyframe>& recording() const { return recording_; }
  const std::vector<TrajectorySample>& recorded_samples() const { return samples_; }

 private:
  // Returns true when the command requests a single step.
  bool handle(ControlCommand& c) {
    using protocol::ControlAction;
    const auto& m = c.msg;
    auto reply = [&](const std::string& s) {
      if (c.reply) c.reply(s);
    };
    switch (m.action) {
      case ControlAction::Pause:
        paused_ = true;
        break;
      case ControlAction::Resume:
        if (paused_) reseat_ = true;
        paused_ = false;
        break;
      case ControlAction::Reset:
        restart(last_input_);
        break;
      case ControlAction::Step:
        reply(protocol::ack_message(m.action, m.id));
        return true;
      case ControlAction::SetParam: {
        std::lock_guard lock(scene_mutex_);
        if (auto err = apply_param(scene_, m.name, m.value)) {
          reply(protocol::fault_message(protocol::kInvalidParam, *err, m.id));
          return false;
        }
        break;
      }
    }
    reply(protocol::ack_message(m.action, m.id));
    publish();
    return false;
  }

  void restart(const WireDeviceInput& device) {
    last_input_ = device;
    last_input_.twist.reset();
    state_ = make_initial_state(scene_, from_wire(last_input_).pose);
    recording_.clear();
    samples_.clear();
    if (record_) recording_.push_back({0.0, last_input_});
    publish();
  }

  void run_step() {
    WireDeviceInput in = last_input_;
    // The device may have moved while paused: take its pose as the new
    // reference instead of commanding the whole jump.
    if (reseat_) {
      in.engaged = false;
      reseat_ = false;
    }
    state_ = step(state_, scene_, from_wire(in));
    // A held pose is not a moving device.
    last_input_.twist.reset();
    if (record_) {
      recording_.push_back({state_.time, in});
      samples_.push_back(make_sample(state_));
    }
    publish();
  }

  void publish() {
    auto snap = std::make_shared<protocol::Snapshot>();
    snap->tick = state_.tick;
    snap->paused = paused_;
    snap->sample = make_sample(state_);
    snap->faults = state_.faults;
    snap->unreachable_ticks = state_.unreachable_ticks;
    snap->kinematics_faults = state_.kinematics_faults;
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(snap);
  }

  Scene scene_;  // written only on the engine thread, under scene_mutex_
  mutable std::mutex scene_mutex_;
  bool record_;

  SimState state_;
  WireDeviceInput last_input_;
  bool paused_ = false;
  bool reseat_ = false;
  std::vector<WireKeyframe> recording_;
  std::vector<TrajectorySample> samples_;

  std::mutex input_mutex_;
  std::optional<WireDeviceInput> pending_input_;
  std::mutex control_mutex_;
  std::deque<ControlCommand> controls_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const protocol::Snapshot> snapshot_;
  std::atomic<std::uint64_t> engine_ticks_{0};
};

/// Runs an engine in real time on its own thread. Falls behind gracefully:
/// after a long stall the schedule restarts from now instead of bursting.
class EngineRunner {
 public:
  explicit EngineRunner(Engine& engine) : engine_(engine) {}
  ~EngineRunner() { stop(); }

  void start() {
    if (thread_.joinable()) return;
    const auto dt = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(engine_.scene_copy().dt));
    thread_ = std::jthread([this, dt](std::stop_token st) {
      auto next = std::chrono::steady_clock::now();
      while (!st.stop_requested()) {
        engine_.advance();
        next += dt;
        const auto now = std::chrono::steady_clock::now();
        if (now - next > std::chrono::milliseconds(100)) next = now;
        std::this_thread::sleep_until(next);
      }
    });
  }

  void stop() {
    if (thread_.joinable()) {
      thread_.request_stop();
      thread_.join();
    }
  }

 private:
  Engine& engine_;
  std::jthread thread_;
};

}  // namespace fracsim
