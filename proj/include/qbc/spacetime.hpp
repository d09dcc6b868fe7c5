#pragma once

// Minkowski events, constant-velocity sites, and causal validation of message
// schedules. Units have c = 1; time is measured in the rest frame of B0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbc {

inline constexpr double kCausalTolerance = 1e-9;

using Vec3 = Eigen::Vector3d;

struct Event {
  double t = 0.0;
  Vec3 x = Vec3::Zero();

  Event() = default;
  Event(double time, Vec3 position) : t(time), x(std::move(position)) {
    if (!std::isfinite(t) || !x.allFinite()) throw std::invalid_argument("Event: non-finite coordinate");
  }
};

/// True iff q lies in the closed past light cone of p (lightlike boundary included).
inline bool in_past_cone(const Event& q, const Event& p) {
  return (p.t - q.t) + kCausalTolerance >= (p.x - q.x).norm();
}

/// Pure boost with velocity beta (|beta| < 1).
inline Event lorentz_boost(const Event& e, const Vec3& beta) {
  const double b2 = beta.squaredNorm();
  if (b2 >= 1.0) throw std::invalid_argument("lorentz_boost: |beta| must be < 1");
  if (b2 == 0.0) return e;
  const double gamma = 1.0 / std::sqrt(1.0 - b2);
  const double bx = beta.dot(e.x);
  const double t = gamma * (e.t - bx);
  const Vec3 x = e.x + ((gamma - 1.0) * bx / b2 - gamma * e.t) * beta;
  return Event(t, x);
}

enum class Party { Alice, Bob };

struct Site {
  std::string id;
  Party party = Party::Bob;
  Vec3 origin = Vec3::Zero();    // position at t = 0
  Vec3 velocity = Vec3::Zero();

  Site() = default;
  Site(std::string site_id, Party owner, Vec3 position, Vec3 v = Vec3::Zero())
      : id(std::move(site_id)), party(owner), origin(std::move(position)), velocity(std::move(v)) {
    if (!(velocity.norm() < 1.0)) throw std::invalid_argument("Site " + id + ": worldline must be timelike");
  }

  Vec3 position_at(double t) const { return origin + velocity * t; }
  Event at(double t) const { return Event(t, position_at(t)); }
  bool on_worldline(const Event& e, double tol = kCausalTolerance) const {
    return (position_at(e.t) - e.x).norm() <= tol;
  }
};

/// Earliest time at which a light signal from `from` reaches `receiver`.
inline double light_arrival_time(const Event& from, const Site& receiver) {
  // Solve s = |w + v s| for s = t - from.t >= 0, w = receiver position at from.t minus from.x.
  const Vec3 w = receiver.position_at(from.t) - from.x;
  const Vec3& v = receiver.velocity;
  const double vw = v.dot(w);
  const double a = 1.0 - v.squaredNorm();
  const double s = (vw + std::sqrt(vw * vw + a * w.squaredNorm())) / a;
  return from.t + s;
}

/// Minimal t such that every confirmation lies in the past cone of observer.at(t).
inline double earliest_commitment_time(const Site& observer, std::span<const Event> confirmations) {
  double t = -std::numeric_limits<double>::infinity();
  for (const Event& c : confirmations) t = std::max(t, light_arrival_time(c, observer));
  return t;
}

struct Message {
  std::size_t id = 0;
  std::string sender;
  std::string receiver;
  Event emit;
  Event receive;
  std::string payload;
};

struct Schedule {
  std::vector<Site> sites;
  std::vector<Message> messages;
  std::optional<Event> commitment_point;
  std::optional<double> t_c;
  std::optional<double> t_r;

  const Site* find_site(const std::string& id) const {
    auto it = std::find_if(sites.begin(), sites.end(), [&](const Site& s) { return s.id == id; });
    return it == sites.end() ? nullptr : &*it;
  }

  Message& add(std::string sender, std::string receiver, Event emit, Event receive, std::string payload) {
    messages.push_back(Message{messages.size(), std::move(sender), std::move(receiver), std::move(emit),
                               std::move(receive), std::move(payload)});
    return messages.back();
  }

  /// Appends a message received at the earliest light-speed arrival.
  Message& send(const std::string& sender, const std::string& receiver, double emit_time,
                std::string payload) {
    const Site* from = find_site(sender);
    const Site* to = find_site(receiver);
    if (from == nullptr || to == nullptr) throw std::invalid_argument("Schedule::send: unknown site");
    const Event e = from->at(emit_time);
    return add(sender, receiver, e, to->at(light_arrival_time(e, *to)), std::move(payload));
  }
};

struct Violation {
  enum class Kind { Superluminal, OffWorldline, UnknownSite, Ordering };
  Kind kind;
  std::optional<std::size_t> message_id;
  std::string detail;
};

inline std::string to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::Superluminal: return "superluminal";
    case Violation::Kind::OffWorldline: return "off-worldline";
    case Violation::Kind::UnknownSite: return "unknown-site";
    case Violation::Kind::Ordering: return "ordering";
  }
  return "?";
}

inline std::vector<Violation> validate_schedule(const Schedule& s) {
  std::vector<Violation> out;
  for (const Message& m : s.messages) {
    const Site* from = s.find_site(m.sender);
    const Site* to = s.find_site(m.receiver);
    if (from == nullptr || to == nullptr) {
      out.push_back({Violation::Kind::UnknownSite, m.id, "message " + std::to_string(m.id) + " (" +
                                                             m.payload + ") references an unknown site"});
      continue;
    }
    if (!from->on_worldline(m.emit) || !to->on_worldline(m.receive)) {
      out.push_back({Violation::Kind::OffWorldline, m.id,
                     "message " + std::to_string(m.id) + " (" + m.payload + ") has an event off its site worldline"});
    }
    if (!in_past_cone(m.emit, m.receive)) {
      out.push_back({Violation::Kind::Superluminal, m.id,
                     "message " + std::to_string(m.id) + " (" + m.payload + ") " + m.sender + "->" + m.receiver +
                         " arrives outside the future light cone of its emission"});
    }
  }
  if (s.t_c && s.t_r && !(*s.t_r > *s.t_c)) {
    out.push_back({Violation::Kind::Ordering, std::nullopt, "t_r must be strictly later than t_c"});
  }
  return out;
}

/// B0 at the origin (moving with `b0_velocity`), then A1, B1, A2, B2, ... on the
/// +x axis at multiples of `separation`.
inline std::vector<Site> default_layout(int pairs, double separation = 1.0,
                                        const Vec3& b0_velocity = Vec3::Zero()) {
  if (pairs < 1) throw std::invalid_argument("default_layout: need at least one site pair");
  if (!(separation > 0.0)) throw std::invalid_argument("default_layout: separation must be positive");
  std::vector<Site> sites;
  sites.emplace_back("B0", Party::Bob, Vec3::Zero(), b0_velocity);
  for (int j = 1; j <= pairs; ++j) {
    sites.emplace_back("A" + std::to_string(j), Party::Alice, Vec3((2 * j - 1) * separation, 0, 0));
    sites.emplace_back("B" + std::to_string(j), Party::Bob, Vec3((2 * j) * separation, 0, 0));
  }
  return sites;
}

}  // namespace qbc
