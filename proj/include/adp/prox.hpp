#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "adp/linalg.hpp"

namespace adp {

/// Penalties R whose proximal maps serve as layer activations.
enum class ProxKind {
  HalfSquaredL2,    // R(x) = ½‖x‖²
  L1,               // R(x) = ‖x‖₁, soft shrinkage
  NonnegIndicator,  // indicator of x ≥ 0, i.e. ReLU
};

inline std::string_view to_string(ProxKind k) {
  switch (k) {
    case ProxKind::HalfSquaredL2: return "l2";
    case ProxKind::L1: return "l1";
    case ProxKind::NonnegIndicator: return "nonneg";
  }
  return "?";
}

inline ProxKind parse_prox_kind(std::string_view s) {
  if (s == "l2") return ProxKind::HalfSquaredL2;
  if (s == "l1") return ProxKind::L1;
  if (s == "nonneg" || s == "relu") return ProxKind::NonnegIndicator;
  throw ValidationError("unknown prox kind '" + std::string(s) + "' (expected l2, l1, nonneg)");
}

inline double prox_scalar(ProxKind kind, double t, double v) {
  switch (kind) {
    case ProxKind::HalfSquaredL2: return v / (1.0 + t);
    case ProxKind::L1: {
      const double mag = std::abs(v) - t;
      return mag > 0.0 ? std::copysign(mag, v) : 0.0;
    }
    case ProxKind::NonnegIndicator: return v > 0.0 ? v : 0.0;
  }
  return v;
}

/// d prox / dv at v. Zero wherever the output is clamped to zero, including the kink.
inline double prox_derivative(ProxKind kind, double t, double v) {
  switch (kind) {
    case ProxKind::HalfSquaredL2: return 1.0 / (1.0 + t);
    case ProxKind::L1: return std::abs(v) > t ? 1.0 : 0.0;
    case ProxKind::NonnegIndicator: return v > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

/// argmin_x ½‖x − v‖² + t·R(x), componentwise.
inline Vec64 prox_apply(ProxKind kind, double t, std::span<const double> v) {
  if (!(t >= 0.0)) throw ValidationError("prox_apply: threshold must be nonnegative");
  Vec64 out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = prox_scalar(kind, t, v[i]);
  return out;
}

}  // namespace adp
