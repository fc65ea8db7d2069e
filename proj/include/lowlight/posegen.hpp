#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "lowlight/config.hpp"
#include "lowlight/error.hpp"
#include "lowlight/rng.hpp"

namespace lowlight::posegen {

using Joints = std::array<double, 6>;

// Radical inverse of `index` in a prime base; exact rational accumulation.
double halton(std::uint64_t index, unsigned base);

// First `dims` coordinates from bases 2,3,5,7,11,13.
std::vector<double> halton_point(std::uint64_t index, std::size_t dims);

struct DhRow {
    double a = 0.0;             // link length
    double alpha = 0.0;         // link twist
    double d = 0.0;             // link offset
    double theta_offset = 0.0;  // added to the joint variable
};

struct KinematicChain {
    std::array<DhRow, 6> dh;
    Joints lower{}, upper{};
    Joints home{};
    double payload_radius = 0.1;
    double payload_half_length = 0.12;
    Eigen::Isometry3d payload_mount = Eigen::Isometry3d::Identity();  // ee -> payload
    Eigen::Vector3d camera_center = Eigen::Vector3d::Zero();          // world frame
};

struct CollisionScene {
    std::array<double, 6> link_radius{};
    bool table_enabled = false;
    double table_z = 0.0;
};

struct Capsule {
    Eigen::Vector3d p0, p1;
    double radius = 0.0;
};

struct FkResult {
    // frames[i] carries joints 1..i applied; frames[0] is the base frame
    std::array<Eigen::Isometry3d, 7> frames;
    const Eigen::Isometry3d& ee() const { return frames[6]; }
};

FkResult fk(const KinematicChain& chain, const Joints& q);

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1);

double capsule_distance(const Capsule& a, const Capsule& b);

// Link capsules between consecutive frame origins plus the payload capsule
// (cylinder approximated by a capsule along its spin axis). `spin_angle` is
// added to the terminal joint.
std::vector<Capsule> body_capsules(const KinematicChain& chain, const CollisionScene& scene,
                                   const Joints& q, double spin_angle);

// True iff any non-adjacent body pair or any body/table pair is in contact.
bool collide(const KinematicChain& chain, const CollisionScene& scene, const Joints& q,
             double spin_angle);

struct PoseRecord {
    Joints q{};
    double r = 0.0, azimuth = 0.0, elevation = 0.0;
    bool feasible = false;
    std::vector<Joints> trajectory;
};

struct WorkspaceStats {
    std::size_t candidates = 0;
    std::size_t rejected_path = 0;
    std::size_t rejected_spin = 0;
};

// Halton candidates in joint space, straight-line approach from home checked
// at <= 2 deg per joint, then a full 360 deg payload spin in 10 deg steps.
std::vector<PoseRecord> build_workspace(const KinematicChain& chain,
                                        const CollisionScene& scene, std::size_t n_candidates,
                                        WorkspaceStats* stats = nullptr);

// (r, azimuth, elevation) of the camera optical center in the payload frame.
std::array<double, 3> to_spherical(const KinematicChain& chain, const Joints& q,
                                   const Eigen::Vector3d& camera_center);

// Round-robin draws (with replacement) over the nonempty (r, az, el) strata.
std::vector<PoseRecord> stratified_sample(const std::vector<PoseRecord>& records,
                                          const std::array<int, 3>& bins, std::size_t k,
                                          Rng& rng);

// 36 joint vectors stepping the terminal joint by 10 deg, wrapped into limits.
std::vector<Joints> spin_capture_poses(const PoseRecord& record, const KinematicChain& chain);

// Illustrative six-axis defaults; any key may be overridden by config.
KinematicChain default_chain();
CollisionScene default_scene();
KinematicChain chain_from_config(const config::Config& cfg);
CollisionScene scene_from_config(const config::Config& cfg);

}  // namespace lowlight::posegen
