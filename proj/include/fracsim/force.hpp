#pragma once

// Spring-damper penalty forces rendered to the operator from bone contacts.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fracsim/obb.hpp"

namespace fracsim {

struct ForceParams {
  double k = 1000.0;             // spring constant, N/m
  double c = 10.0;               // damping constant, N*s/m
  std::optional<double> f_max;   // saturation magnitude, N
};

inline bool is_valid(const ForceParams& p) {
  return p.k > 0.0 && p.c >= 0.0 && (!p.f_max || *p.f_max > 0.0);
}

struct PairForce {
  BoneLabel proximal = BoneLabel::ProximalShaft;
  BoneLabel distal = BoneLabel::DistalShaft;
  Vec3 force = Vec3::Zero();
};

struct ForceResult {
  Vec3 f_col = Vec3::Zero();
  Vec3 f_global = Vec3::Zero();
  std::vector<PairForce> per_contact;
};

/// depth * normal * k for a colliding contact, zero otherwise.
inline Vec3 contact_force(const ContactResult& contact, const ForceParams& params) {
  if (!contact.colliding) return Vec3::Zero();
  return contact.depth * contact.normal * params.k;
}

inline Vec3 aggregate_contact_forces(std::span<const ContactResult> contacts,
                                     const ForceParams& params) {
  Vec3 sum = Vec3::Zero();
  for (const auto& c : contacts) {
    if (c.colliding) sum += contact_force(c, params);
  }
  return sum;
}

/// f_col - c * velocity, clamped to f_max (direction preserved) when set.
inline Vec3 global_force(const Vec3& f_col, const Vec3& velocity, const ForceParams& params) {
  Vec3 f = f_col - velocity * params.c;
  if (params.f_max) {
    const double n = f.norm();
    if (n > *params.f_max) f *= *params.f_max / n;
  }
  return f;
}

inline ForceResult evaluate_forces(std::span<const ContactResult> contacts, const Vec3& velocity,
                                   const ForceParams& params) {
  ForceResult r;
  for (const auto& c : contacts) {
    if (!c.colliding) continue;
    const Vec3 f = contact_force(c, params);
    r.per_contact.push_back({c.first, c.second, f});
    r.f_col += f;
  }
  r.f_global = global_force(r.f_col, velocity, params);
  return r;
}

}  // namespace fracsim
