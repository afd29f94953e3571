// Two boxes, one slid into the other along x. Prints the SAT result at each
// offset.
#include <cstdio>

#include "fracsim/obb.hpp"

using namespace fracsim;

int main() {
  const Vec3 half(0.01, 0.01, 0.05);
  const Obb bone = Obb::from_pose(Pose{}, half, BoneLabel::ProximalShaft);
  const Rotation tilt = euler_to_rotation({0.0, deg_to_rad(30.0), deg_to_rad(15.0)});

  std::printf("%10s %9s %10s  %s\n", "offset_mm", "contact", "depth_mm", "normal");
  for (int i = 0; i <= 8; ++i) {
    const double x = 0.04 - 0.005 * i;
    const Obb frag = Obb::from_pose(Pose{Vec3(x, 0.0, 0.0), tilt}, half, BoneLabel::DistalShaft);
    const ContactResult c = sat_contact(bone, frag);
    std::printf("%10.1f %9s %10.3f  (%.3f, %.3f, %.3f)\n", x * 1e3, c.colliding ? "yes" : "no",
                c.depth * 1e3, c.normal.x(), c.normal.y(), c.normal.z());
  }
}
