#pragma once

#include <array>
#include <cstdint>

namespace hypoql {

/// Philox4x32-10 counter block cipher (Salmon et al. keying scheme).
/// A (key, stream) pair selects an independent stream; the 64-bit position
/// indexes into it, so draws never depend on call history across streams.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key);

/// Counter-based random stream.  seed keys the cipher, stream selects one of
/// 2^64 independent substreams; replication r runs on stream r.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed, uint64_t stream = 0);

    uint64_t next_u64();
    /// uniform on (0,1), never exactly 0 or 1
    double uniform();
    double normal();
    void normal_pair(double& a, double& b);

    uint64_t position() const { return pos_; }
    void set_position(uint64_t pos);

private:
    void refill();

    std::array<uint32_t, 2> key_;
    uint64_t stream_ = 0;
    uint64_t pos_ = 0;       // philox block index
    std::array<uint32_t, 4> block_{};
    int avail_ = 0;          // 32-bit words left in block_
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

}  // namespace hypoql
