#pragma once

// Seeded random box pairs for cross-checking sat_contact against the
// edge-clipping reference test.

#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "fracsim/box_intersection_oracle.hpp"
#include "fracsim/obb.hpp"

namespace fracsim {

struct FuzzConfig {
  double cube = 0.5;  // centers uniform in [0, cube]^3, m
  double min_half = 0.01;
  double max_half = 0.2;
  double grazing_band = 1e-9;  // |smallest overlap| at or below this is not judged
};

/// Uniformly distributed rotation (Shoemake's subgroup algorithm).
template <class Rng>
Rotation random_rotation(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double t1 = 2.0 * kPi * u2, t2 = 2.0 * kPi * u3;
  return Rotation{Eigen::Quaterniond(b * std::cos(t2), a * std::sin(t1), a * std::cos(t1),
                                     b * std::sin(t2))};
}

template <class Rng>
Obb random_obb(Rng& rng, const FuzzConfig& cfg, BoneLabel label) {
  std::uniform_real_distribution<double> pos(0.0, cfg.cube);
  std::uniform_real_distribution<double> half(cfg.min_half, cfg.max_half);
  const Vec3 c(pos(rng), pos(rng), pos(rng));
  const Vec3 h(half(rng), half(rng), half(rng));
  return Obb::from_pose(Pose{c, random_rotation(rng)}, h, label);
}

struct FuzzCase {
  std::uint64_t index = 0;
  Obb p, d;
  bool sat = false;
  bool oracle = false;
  double smallest_overlap = 0.0;
};

struct FuzzReport {
  std::uint64_t pairs = 0;
  std::uint64_t colliding = 0;
  std::uint64_t grazing = 0;             // inside the band, not judged
  std::vector<FuzzCase> disagreements;   // outside the band
  std::vector<FuzzCase> grazing_mismatch;
  double seconds = 0.0;

  bool ok() const { return disagreements.empty(); }
};

inline FuzzReport collision_fuzz(std::uint64_t n, std::uint64_t seed, const FuzzConfig& cfg = {}) {
  FuzzReport r;
  r.pairs = n;
  std::mt19937_64 rng(seed);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t i = 0; i < n; ++i) {
    FuzzCase c;
    c.index = i;
    c.p = random_obb(rng, cfg, BoneLabel::ProximalShaft);
    c.d = random_obb(rng, cfg, BoneLabel::DistalShaft);
    const ContactResult sat = sat_contact(c.p, c.d);
    c.sat = sat.colliding;
    c.oracle = oracle::boxes_intersect(c.p, c.d);
    c.smallest_overlap = sat.smallest_overlap;
    if (c.sat) ++r.colliding;
    const bool grazing = std::abs(c.smallest_overlap) <= cfg.grazing_band;
    if (grazing) ++r.grazing;
    if (c.sat != c.oracle) (grazing ? r.grazing_mismatch : r.disagreements).push_back(c);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace fuzz_detail {

inline void write_box(std::ostream& out, const Obb& b) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                b.center.x(), b.center.y(), b.center.z(), b.axes[0].x(), b.axes[0].y(),
                b.axes[0].z(), b.axes[1].x(), b.axes[1].y(), b.axes[1].z(), b.axes[2].x(),
                b.axes[2].y(), b.axes[2].z(), b.half_extents.x(), b.half_extents.y(),
                b.half_extents.z());
  out << buf;
}

}  // namespace fuzz_detail

/// Disagreement records as CSV (SI units, full precision). Timing is left out
/// so the file is identical across runs with the same seed.
inline void write_fuzz_report(std::ostream& out, const FuzzReport& r, std::uint64_t seed) {
  out << "# pairs " << r.pairs << " seed " << seed << " colliding " << r.colliding << " grazing "
      << r.grazing << " disagreements " << r.disagreements.size() << " grazing_mismatch "
      << r.grazing_mismatch.size() << '\n';
  out << "index,band,sat,oracle,smallest_overlap";
  for (const char* who : {"p", "d"}) {
    for (const char* f : {"cx", "cy", "cz", "a0x", "a0y", "a0z", "a1x", "a1y", "a1z", "a2x", "a2y",
                          "a2z", "hx", "hy", "hz"}) {
      out << ',' << who << '_' << f;
    }
  }
  out << '\n';
  auto row = [&](const FuzzCase& c, const char* band) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", c.smallest_overlap);
    out << c.index << ',' << band << ',' << c.sat << ',' << c.oracle << ',' << buf << ',';
    fuzz_detail::write_box(out, c.p);
    out << ',';
    fuzz_detail::write_box(out, c.d);
    out << '\n';
  };
  for (const auto& c : r.disagreements) row(c, "outside");
  for (const auto& c : r.grazing_mismatch) row(c, "grazing");
}

}  // namespace fracsim
