#pragma once

#include <cstdint>

// Per-thread operation counters. Every kernel in the library charges its
// floating-point work to one bucket so the cost model can be measured
// independently of wall-clock noise.
namespace sepqn::flops {

enum class Bucket { Data, Metric, Terms, Other };

struct Counts {
    std::uint64_t data = 0;
    std::uint64_t metric = 0;
    std::uint64_t terms = 0;
    std::uint64_t other = 0;

    std::uint64_t total() const { return data + metric + terms + other; }
};

void add(Bucket bucket, std::uint64_t n);
Counts snapshot();
void reset();
/// Rewinds this thread's counters to an earlier snapshot.
void restore(const Counts& saved);

Counts operator-(const Counts& a, const Counts& b);

}  // namespace sepqn::flops
