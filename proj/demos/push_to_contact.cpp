// Drives the default scene with an operator that pushes the fragment toward the
// proximal bone, then reports depth and rendered force once per second.
//
//   push_to_contact [scene_file]
#include <cstdio>
#include <exception>
#include <string>

#include "fracsim/operator.hpp"

using namespace fracsim;

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : FRACSIM_DEMO_SCENE;
  Scene scene;
  try {
    scene = load_scene_file(path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }

  PushOperator op({Vec3::UnitZ(), scene.scaling.max_v, 20.0});
  SimState s = make_initial_state(scene);
  const long per_second = std::lround(1.0 / scene.dt);

  std::printf("%6s %10s %10s %10s %6s\n", "t_s", "ring_z_mm", "depth_mm", "force_N", "mask");
  for (long k = 1; k <= 10 * per_second; ++k) {
    s = step(s, scene, op.next(s.force.f_global, scene.dt));
    if (k % per_second == 0) {
      std::printf("%6.1f %10.3f %10.4f %10.3f %6u\n", s.time, s.ring_pose.position.z() * 1e3,
                  max_penetration(s) * 1e3, s.force.f_global.norm(), s.collision_mask);
    }
  }
  return s.unreachable_ticks == 0 ? 0 : 3;
}
