#include "sepqn/error.hpp"

#include "sepqn/flops.hpp"

namespace sepqn {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "dimension_mismatch";
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::LineSearchFailure: return "line_search_failure";
        case ErrorCode::NonFinite: return "non_finite";
        case ErrorCode::Parse: return "parse_error";
        case ErrorCode::Unsupported: return "unsupported";
        case ErrorCode::Io: return "io_error";
    }
    return "unknown";
}

void throw_dimension(const std::string& where, long expected, long actual) {
    throw Error(ErrorCode::DimensionMismatch,
                where + ": expected length " + std::to_string(expected) + ", got " +
                    std::to_string(actual));
}

namespace flops {

namespace {
thread_local Counts counts;
}

void add(Bucket bucket, std::uint64_t n) {
    switch (bucket) {
        case Bucket::Data: counts.data += n; break;
        case Bucket::Metric: counts.metric += n; break;
        case Bucket::Terms: counts.terms += n; break;
        case Bucket::Other: counts.other += n; break;
    }
}

Counts snapshot() { return counts; }

void reset() { counts = Counts{}; }

void restore(const Counts& saved) { counts = saved; }

Counts operator-(const Counts& a, const Counts& b) {
    return {a.data - b.data, a.metric - b.metric, a.terms - b.terms, a.other - b.other};
}

}  // namespace flops
}  // namespace sepqn
