#ifndef QTRAJ_RNG_HPP
#define QTRAJ_RNG_HPP

#include <cstdint>

namespace qtraj {

// Counter-seeded random stream. A stream is identified by (seed, index);
// the same pair always produces the same sequence, so trajectory i can be
// handed stream i and the ensemble is reproducible under any parallel
// schedule. State is xoshiro256++, seeded through splitmix64.
class RngStream {
  public:
    RngStream(uint64_t seed, uint64_t index);

    uint64_t seed() const { return seed_; }
    uint64_t index() const { return index_; }

    uint64_t next_u64();
    // uniform on (0,1] (never 0, safe under log)
    double uniform01();
    // standard normal via Box-Muller (pairs cached)
    double gaussian();
    // Bernoulli(p)
    bool bernoulli(double p) { return uniform01() <= p; }
    // Exp(1)
    double exponential();

  private:
    uint64_t s_[4];
    uint64_t seed_, index_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace qtraj

#endif
