#include "hypoql/rng.hpp"

#include <cmath>

namespace hypoql {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    const uint64_t prod = static_cast<uint64_t>(a) * static_cast<uint64_t>(b);
    hi = static_cast<uint32_t>(prod >> 32);
    lo = static_cast<uint32_t>(prod);
}

inline std::array<uint32_t, 4> round_once(const std::array<uint32_t, 4>& c,
                                          const std::array<uint32_t, 2>& k) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        ctr = round_once(ctr, key);
    }
    return ctr;
}

CounterRng::CounterRng(uint64_t seed, uint64_t stream)
    : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)}, stream_(stream) {}

void CounterRng::refill() {
    const std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(pos_), static_cast<uint32_t>(pos_ >> 32),
        static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
    block_ = philox4x32(ctr, key_);
    ++pos_;
    avail_ = 4;
}

uint64_t CounterRng::next_u64() {
    if (avail_ < 2) refill();
    const uint64_t lo = block_[4 - avail_];
    const uint64_t hi = block_[5 - avail_];
    avail_ -= 2;
    return (hi << 32) | lo;
}

double CounterRng::uniform() {
    // 53-bit mantissa, offset keeps the value strictly inside (0,1)
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

void CounterRng::normal_pair(double& a, double& b) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    a = rad * std::cos(2.0 * M_PI * u2);
    b = rad * std::sin(2.0 * M_PI * u2);
}

double CounterRng::normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    double a, b;
    normal_pair(a, b);
    cached_normal_ = b;
    have_cached_normal_ = true;
    return a;
}

void CounterRng::set_position(uint64_t pos) {
    pos_ = pos;
    avail_ = 0;
    have_cached_normal_ = false;
}

}  // namespace hypoql
