#include "lowlight/posegen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace lowlight::posegen {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::array<unsigned, 6> kPrimes = {2, 3, 5, 7, 11, 13};
constexpr double kPathStepRad = 2.0 * kPi / 180.0;
constexpr double kSpinStepRad = 10.0 * kPi / 180.0;
constexpr double kArrivalTol = 1e-6;

Eigen::Isometry3d dh_transform(const DhRow& row, double theta) {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.rotate(Eigen::AngleAxisd(theta + row.theta_offset, Eigen::Vector3d::UnitZ()));
    t.translate(Eigen::Vector3d(0, 0, row.d));
    t.translate(Eigen::Vector3d(row.a, 0, 0));
    t.rotate(Eigen::AngleAxisd(row.alpha, Eigen::Vector3d::UnitX()));
    return t;
}

double wrap_into(double angle, double lower, double upper) {
    for (int guard = 0; guard < 16 && angle > upper; ++guard) angle -= 2.0 * kPi;
    for (int guard = 0; guard < 16 && angle < lower; ++guard) angle += 2.0 * kPi;
    return std::clamp(angle, lower, upper);
}

}  // namespace

double halton(std::uint64_t index, unsigned base) {
    if (base < 2) throw ContractError("halton: base must be >= 2");
    std::uint64_t num = 0, den = 1;
    while (index != 0) {
        num = num * base + index % base;
        den *= base;
        index /= base;
    }
    return double(num) / double(den);
}

std::vector<double> halton_point(std::uint64_t index, std::size_t dims) {
    if (dims == 0 || dims > kPrimes.size())
        throw ContractError("halton_point: dims must be in 1..6");
    std::vector<double> out(dims);
    for (std::size_t d = 0; d < dims; ++d) out[d] = halton(index, kPrimes[d]);
    return out;
}

FkResult fk(const KinematicChain& chain, const Joints& q) {
    FkResult r;
    r.frames[0] = Eigen::Isometry3d::Identity();
    for (std::size_t i = 0; i < 6; ++i)
        r.frames[i + 1] = r.frames[i] * dh_transform(chain.dh[i], q[i]);
    return r;
}

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1) {
    const Eigen::Vector3d d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
    const double a = d1.squaredNorm(), e = d2.squaredNorm();
    const double f = d2.dot(r), c = d1.dot(r);
    double s = 0.0, t = 0.0;
    if (a <= 1e-18 && e <= 1e-18) {
        // both degenerate: point-point
    } else if (a <= 1e-18) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else if (e <= 1e-18) {
        s = std::clamp(-c / a, 0.0, 1.0);
    } else {
        const double b = d1.dot(d2);
        const double denom = a * e - b * b;
        s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
        t = (b * s + f) / e;
        if (t < 0.0) {
            t = 0.0;
            s = std::clamp(-c / a, 0.0, 1.0);
        } else if (t > 1.0) {
            t = 1.0;
            s = std::clamp((b - c) / a, 0.0, 1.0);
        }
    }
    return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

double capsule_distance(const Capsule& a, const Capsule& b) {
    return segment_distance(a.p0, a.p1, b.p0, b.p1) - a.radius - b.radius;
}

std::vector<Capsule> body_capsules(const KinematicChain& chain, const CollisionScene& scene,
                                   const Joints& q, double spin_angle) {
    Joints qs = q;
    qs[5] += spin_angle;
    const FkResult f = fk(chain, qs);
    std::vector<Capsule> caps;
    caps.reserve(7);
    for (std::size_t i = 0; i < 6; ++i)
        caps.push_back({f.frames[i].translation(), f.frames[i + 1].translation(),
                        scene.link_radius[i]});
    const Eigen::Isometry3d payload = f.ee() * chain.payload_mount;
    const Eigen::Vector3d axis = payload.linear().col(2) * chain.payload_half_length;
    caps.push_back({payload.translation() - axis, payload.translation() + axis,
                    chain.payload_radius});
    return caps;
}

bool collide(const KinematicChain& chain, const CollisionScene& scene, const Joints& q,
             double spin_angle) {
    const std::vector<Capsule> caps = body_capsules(chain, scene, q, spin_angle);
    const std::size_t payload = caps.size() - 1;
    for (std::size_t i = 0; i < caps.size(); ++i) {
        for (std::size_t j = i + 2; j < caps.size(); ++j) {
            // the payload is rigidly attached to the final link
            if (j == payload && i + 2 > payload - 1 + 1) continue;
            if (capsule_distance(caps[i], caps[j]) <= 0.0) return true;
        }
    }
    if (scene.table_enabled) {
        // the base link stands on the table by construction
        for (std::size_t i = 1; i < caps.size(); ++i) {
            const double lowest = std::min(caps[i].p0.z(), caps[i].p1.z()) - caps[i].radius;
            if (lowest <= scene.table_z) return true;
        }
    }
    return false;
}

std::vector<PoseRecord> build_workspace(const KinematicChain& chain,
                                        const CollisionScene& scene, std::size_t n_candidates,
                                        WorkspaceStats* stats) {
    WorkspaceStats local;
    local.candidates = n_candidates;
    std::vector<PoseRecord> feasible;

    for (std::size_t idx = 1; idx <= n_candidates; ++idx) {
        const std::vector<double> u = halton_point(idx, 6);
        Joints target;
        double max_delta = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            target[j] = chain.lower[j] + u[j] * (chain.upper[j] - chain.lower[j]);
            max_delta = std::max(max_delta, std::abs(target[j] - chain.home[j]));
        }

        const std::size_t steps =
            std::max<std::size_t>(1, std::size_t(std::ceil(max_delta / kPathStepRad)));
        std::vector<Joints> trajectory;
        trajectory.reserve(steps + 1);
        bool blocked = false;
        for (std::size_t k = 0; k <= steps && !blocked; ++k) {
            Joints qk;
            const double frac = double(k) / double(steps);
            for (std::size_t j = 0; j < 6; ++j)
                qk[j] = chain.home[j] + frac * (target[j] - chain.home[j]);
            if (collide(chain, scene, qk, 0.0))
                blocked = true;
            else
                trajectory.push_back(qk);
        }
        if (blocked) {
            ++local.rejected_path;
            continue;
        }

        bool spin_blocked = false;
        for (int i = 0; i < 36 && !spin_blocked; ++i)
            spin_blocked = collide(chain, scene, target, double(i) * kSpinStepRad);
        if (spin_blocked) {
            ++local.rejected_spin;
            continue;
        }

        const Eigen::Vector3d arrived = fk(chain, trajectory.back()).ee().translation();
        const Eigen::Vector3d wanted = fk(chain, target).ee().translation();
        if ((arrived - wanted).norm() > kArrivalTol) {
            ++local.rejected_path;
            continue;
        }

        PoseRecord rec;
        rec.q = target;
        rec.feasible = true;
        rec.trajectory = std::move(trajectory);
        const auto sph = to_spherical(chain, target, chain.camera_center);
        rec.r = sph[0];
        rec.azimuth = sph[1];
        rec.elevation = sph[2];
        feasible.push_back(std::move(rec));
    }

    if (stats) *stats = local;
    if (feasible.empty())
        throw DataError("build_workspace: no feasible poses (candidates=" +
                        std::to_string(local.candidates) +
                        " rejected_path=" + std::to_string(local.rejected_path) +
                        " rejected_spin=" + std::to_string(local.rejected_spin) + ")");
    return feasible;
}

std::array<double, 3> to_spherical(const KinematicChain& chain, const Joints& q,
                                   const Eigen::Vector3d& camera_center) {
    const Eigen::Isometry3d sat = fk(chain, q).ee() * chain.payload_mount;
    const Eigen::Vector3d p = sat.inverse() * camera_center;
    const double r = p.norm();
    if (r == 0.0) return {0.0, 0.0, 0.0};
    return {r, std::atan2(p.y(), p.x()), std::asin(std::clamp(p.z() / r, -1.0, 1.0))};
}

std::vector<PoseRecord> stratified_sample(const std::vector<PoseRecord>& records,
                                          const std::array<int, 3>& bins, std::size_t k,
                                          Rng& rng) {
    if (records.empty()) throw DataError("stratified_sample: no records");
    if (bins[0] < 1 || bins[1] < 1 || bins[2] < 1)
        throw ContractError("stratified_sample: bins must be >= 1");
    if (k == 0) return {};

    std::array<double, 3> lo{}, hi{};
    for (int d = 0; d < 3; ++d) {
        lo[d] = hi[d] = 0.0;
    }
    auto coord = [](const PoseRecord& r, int d) {
        return d == 0 ? r.r : d == 1 ? r.azimuth : r.elevation;
    };
    for (int d = 0; d < 3; ++d) {
        lo[d] = hi[d] = coord(records[0], d);
        for (const PoseRecord& r : records) {
            lo[d] = std::min(lo[d], coord(r, d));
            hi[d] = std::max(hi[d], coord(r, d));
        }
    }
    auto bin_of = [&](const PoseRecord& r, int d) {
        if (hi[d] <= lo[d]) return 0;
        const double frac = (coord(r, d) - lo[d]) / (hi[d] - lo[d]);
        return std::min(bins[d] - 1, int(frac * bins[d]));
    };

    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const int flat = (bin_of(records[i], 0) * bins[1] + bin_of(records[i], 1)) * bins[2] +
                         bin_of(records[i], 2);
        strata[flat].push_back(i);
    }

    std::vector<PoseRecord> out;
    out.reserve(k);
    while (out.size() < k) {
        for (const auto& [flat, members] : strata) {
            out.push_back(records[members[rng.uniform_index(members.size())]]);
            if (out.size() == k) break;
        }
    }
    return out;
}

std::vector<Joints> spin_capture_poses(const PoseRecord& record, const KinematicChain& chain) {
    std::vector<Joints> out;
    out.reserve(36);
    for (int i = 0; i < 36; ++i) {
        Joints q = record.q;
        q[5] = wrap_into(record.q[5] + double(i) * kSpinStepRad, chain.lower[5],
                         chain.upper[5]);
        out.push_back(q);
    }
    return out;
}

KinematicChain default_chain() {
    KinematicChain c;
    // six-axis arm, loosely based on a small collaborative manipulator
    c.dh[0] = {0.0, kPi / 2, 0.25, 0.0};
    c.dh[1] = {-0.2437, 0.0, 0.0, 0.0};
    c.dh[2] = {-0.2132, 0.0, 0.0, 0.0};
    c.dh[3] = {0.0, kPi / 2, 0.1124, 0.0};
    c.dh[4] = {0.0, -kPi / 2, 0.0854, 0.0};
    c.dh[5] = {0.0, 0.0, 0.0819, 0.0};
    for (std::size_t j = 0; j < 5; ++j) {
        c.lower[j] = -kPi;
        c.upper[j] = kPi;
    }
    c.lower[5] = -2.0 * kPi;
    c.upper[5] = 2.0 * kPi;
    c.home = {0.0, -kPi / 2, kPi / 2, -kPi / 2, -kPi / 2, 0.0};
    c.payload_radius = 0.06;
    c.payload_half_length = 0.10;
    // lateral offset makes the spin axis matter for collision checks
    c.payload_mount = Eigen::Isometry3d(Eigen::Translation3d(0.05, 0.0, 0.20));
    c.camera_center = Eigen::Vector3d(0.9, 0.0, 0.45);
    return c;
}

CollisionScene default_scene() {
    CollisionScene s;
    s.link_radius = {0.06, 0.05, 0.05, 0.04, 0.04, 0.03};
    s.table_enabled = true;
    s.table_z = 0.0;
    return s;
}

KinematicChain chain_from_config(const config::Config& cfg) {
    KinematicChain c = default_chain();
    for (int j = 0; j < 6; ++j) {
        const std::string p = "dh" + std::to_string(j + 1);
        c.dh[j].a = cfg.get_double(p + ".a", c.dh[j].a);
        c.dh[j].alpha = cfg.get_double(p + ".alpha", c.dh[j].alpha);
        c.dh[j].d = cfg.get_double(p + ".d", c.dh[j].d);
        c.dh[j].theta_offset = cfg.get_double(p + ".theta", c.dh[j].theta_offset);
        const std::string l = "limit" + std::to_string(j + 1);
        c.lower[j] = cfg.get_double(l + ".lower", c.lower[j]);
        c.upper[j] = cfg.get_double(l + ".upper", c.upper[j]);
        c.home[j] = cfg.get_double("home.q" + std::to_string(j + 1), c.home[j]);
        if (c.lower[j] >= c.upper[j])
            throw DataError("chain config: joint " + std::to_string(j + 1) +
                            " limits must satisfy lower < upper");
    }
    c.payload_radius = cfg.get_double("payload.radius", c.payload_radius);
    c.payload_half_length = cfg.get_double("payload.half_length", c.payload_half_length);
    c.payload_mount = Eigen::Isometry3d(
        Eigen::Translation3d(cfg.get_double("payload.mount.x", 0.05),
                             cfg.get_double("payload.mount.y", 0.0),
                             cfg.get_double("payload.mount.z", 0.20)));
    c.camera_center = Eigen::Vector3d(cfg.get_double("camera.x", c.camera_center.x()),
                                      cfg.get_double("camera.y", c.camera_center.y()),
                                      cfg.get_double("camera.z", c.camera_center.z()));
    return c;
}

CollisionScene scene_from_config(const config::Config& cfg) {
    CollisionScene s = default_scene();
    for (int j = 0; j < 6; ++j)
        s.link_radius[j] = cfg.get_double("link" + std::to_string(j + 1) + ".radius",
                                          s.link_radius[std::size_t(j)]);
    s.table_enabled = cfg.get_bool("table.enabled", s.table_enabled);
    s.table_z = cfg.get_double("table.z", s.table_z);
    return s;
}

}  // namespace lowlight::posegen
