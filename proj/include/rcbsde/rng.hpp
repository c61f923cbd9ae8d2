#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace rcbsde {

// Counter-based RNG (Philox 4x32-10). Every draw is a pure function of
// (seed, purpose, path, step, slot), so simulation output cannot depend on
// scheduling or worker count.
namespace rng {

enum class Purpose : uint32_t {
    brownian_w = 1,
    brownian_b = 2,
    cox_gap = 3,
    cox_accept = 4,
    cox_mark = 5,
    compensator_mc = 6,
    anchor = 7,
    validation = 8,
};

namespace detail {

constexpr uint32_t kWeylA = 0x9E3779B9u;
constexpr uint32_t kWeylB = 0xBB67AE85u;
constexpr uint32_t kMultA = 0xD2511F53u;
constexpr uint32_t kMultB = 0xCD9E8D57u;

inline void philox_round(std::array<uint32_t, 4>& ctr, uint32_t k0, uint32_t k1) {
    const uint64_t p0 = uint64_t(kMultA) * ctr[0];
    const uint64_t p1 = uint64_t(kMultB) * ctr[2];
    ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ k0, uint32_t(p1),
           uint32_t(p0 >> 32) ^ ctr[3] ^ k1, uint32_t(p0)};
}

}  // namespace detail

inline std::array<uint32_t, 4> philox4(uint64_t seed, Purpose purpose, uint64_t path,
                                       uint32_t step, uint32_t slot) {
    std::array<uint32_t, 4> ctr = {uint32_t(path), uint32_t(path >> 32), step, slot};
    uint32_t k0 = uint32_t(seed);
    uint32_t k1 = uint32_t(seed >> 32) ^ uint32_t(purpose);
    for (int round = 0; round < 10; ++round) {
        detail::philox_round(ctr, k0, k1);
        k0 += detail::kWeylA;
        k1 += detail::kWeylB;
    }
    return ctr;
}

// Uniform on (0,1), strictly interior so log() is always safe.
inline double to_unit(uint32_t hi, uint32_t lo) {
    const uint64_t m = (uint64_t(hi) << 21) ^ (lo >> 11);  // 53 usable bits
    return (double(m & ((uint64_t(1) << 53) - 1)) + 0.5) * 0x1p-53;
}

struct UniformPair {
    double u0, u1;
};

inline UniformPair uniform_pair(uint64_t seed, Purpose purpose, uint64_t path, uint32_t step,
                                uint32_t slot) {
    const auto c = philox4(seed, purpose, path, step, slot);
    return {to_unit(c[0], c[1]), to_unit(c[2], c[3])};
}

struct NormalPair {
    double z0, z1;
};

// Box-Muller on one counter block: two independent N(0,1) variates.
inline NormalPair normal_pair(uint64_t seed, Purpose purpose, uint64_t path, uint32_t step,
                              uint32_t slot) {
    const auto [u0, u1] = uniform_pair(seed, purpose, path, step, slot);
    const double rad = std::sqrt(-2.0 * std::log(u0));
    const double ang = 6.283185307179586476925286766559 * u1;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

// Component i of a standard normal vector attached to (path, step); pairs are
// drawn per slot so adjacent components share one counter block.
inline double normal_component(uint64_t seed, Purpose purpose, uint64_t path, uint32_t step,
                               int component) {
    const auto pair = normal_pair(seed, purpose, path, step, uint32_t(component / 2));
    return (component % 2 == 0) ? pair.z0 : pair.z1;
}

inline double exponential(uint64_t seed, Purpose purpose, uint64_t path, uint32_t step,
                          uint32_t slot) {
    return -std::log(uniform_pair(seed, purpose, path, step, slot).u0);
}

inline double uniform(uint64_t seed, Purpose purpose, uint64_t path, uint32_t step,
                      uint32_t slot) {
    return uniform_pair(seed, purpose, path, step, slot).u0;
}

}  // namespace rng
}  // namespace rcbsde
