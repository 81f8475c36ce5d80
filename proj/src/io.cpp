#include "sepqn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "sepqn/error.hpp"

namespace sepqn {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
    throw Error(ErrorCode::Parse, source + ":" + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view token, const std::string& source, std::size_t line) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end || token.empty()) {
        parse_error(source, line, "bad number '" + std::string(token) + "'");
    }
    return value;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, Index feature_count, const std::string& source) {
    std::vector<SparseMatrix::Triplet> triplets;
    std::vector<double> labels;
    std::string raw_line;
    std::size_t line_no = 0;
    Index max_index = 0;
    while (std::getline(in, raw_line)) {
        ++line_no;
        std::string_view line = raw_line;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const Index row = static_cast<Index>(labels.size());
        std::size_t pos = 0;
        auto next_token = [&]() -> std::string_view {
            while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            const std::size_t start = pos;
            while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
            return line.substr(start, pos - start);
        };
        labels.push_back(parse_real(next_token(), source, line_no));
        Index previous = 0;
        for (auto token = next_token(); !token.empty(); token = next_token()) {
            const auto colon = token.find(':');
            if (colon == std::string_view::npos) parse_error(source, line_no, "expected idx:val, got '" + std::string(token) + "'");
            const auto idx_text = token.substr(0, colon);
            Index idx = 0;
            const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
            if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx < 1) {
                parse_error(source, line_no, "bad feature index '" + std::string(idx_text) + "'");
            }
            if (idx <= previous) parse_error(source, line_no, "feature indices must be strictly increasing");
            previous = idx;
            const double value = parse_real(token.substr(colon + 1), source, line_no);
            triplets.push_back({row, idx - 1, value});
            max_index = std::max(max_index, idx);
        }
    }
    if (labels.empty()) throw Error(ErrorCode::Parse, source + ": dataset is empty");
    Index p = max_index;
    if (feature_count > 0) {
        if (feature_count < max_index) {
            throw Error(ErrorCode::Parse, source + ": feature index " + std::to_string(max_index) +
                                              " exceeds configured feature count " + std::to_string(feature_count));
        }
        p = feature_count;
    }
    if (p < 1) throw Error(ErrorCode::Parse, source + ": no features");
    const auto n = static_cast<Index>(labels.size());
    return {SparseMatrix::from_triplets(n, p, std::move(triplets)), std::move(labels)};
}

Dataset read_libsvm(const std::filesystem::path& path, Index feature_count) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return parse_libsvm(in, feature_count, path.string());
}

std::string format_double(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

void write_libsvm(std::ostream& out, const Dataset& data) {
    const auto& m = data.features;
    for (Index r = 0; r < m.rows(); ++r) {
        out << format_double(data.labels[static_cast<std::size_t>(r)]);
        for (Index k = m.row_ptr()[r]; k < m.row_ptr()[r + 1]; ++k) {
            out << ' ' << (m.col_idx()[k] + 1) << ':' << format_double(m.values()[k]);
        }
        out << '\n';
    }
}

void write_libsvm(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_libsvm(out, data);
}

Dataset concatenate(const std::vector<Dataset>& parts) {
    if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concatenate: no datasets");
    if (parts.size() == 1) return parts.front();
    Index p = 0;
    Index n = 0;
    for (const auto& d : parts) {
        p = std::max(p, d.dimension());
        n += d.samples();
    }
    std::vector<SparseMatrix::Triplet> triplets;
    std::vector<double> labels;
    Index offset = 0;
    for (const auto& d : parts) {
        const auto& m = d.features;
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index k = m.row_ptr()[r]; k < m.row_ptr()[r + 1]; ++k) {
                triplets.push_back({offset + r, m.col_idx()[k], m.values()[k]});
            }
        }
        labels.insert(labels.end(), d.labels.begin(), d.labels.end());
        offset += m.rows();
    }
    return {SparseMatrix::from_triplets(n, p, std::move(triplets)), std::move(labels)};
}

SynthResult synth_dataset(const SynthOptions& opt) {
    if (opt.samples < 1 || opt.features < 1) {
        throw Error(ErrorCode::InvalidArgument, "synth: samples and features must be >= 1");
    }
    if (!(opt.sparsity >= 0.0 && opt.sparsity <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "synth: sparsity must lie in [0, 1]");
    }
    if (!(opt.density > 0.0 && opt.density <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "synth: density must lie in (0, 1]");
    }
    if (!(opt.correlation >= 0.0 && opt.correlation < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "synth: correlation must lie in [0, 1)");
    }
    const bool multitask = opt.model == "multitask-dirty-logistic";
    const bool least_squares = opt.model == "least-squares";
    if (!multitask && !least_squares) {
        const auto& names = builtin_model_names();
        if (std::find(names.begin(), names.end(), opt.model) == names.end()) {
            throw Error(ErrorCode::InvalidArgument, "synth: unknown model '" + opt.model + "'");
        }
    }
    if (multitask && opt.classes < 2) throw Error(ErrorCode::InvalidArgument, "synth: classes must be >= 2");

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;

    const Index n = opt.samples;
    const Index p = opt.features;
    const Index tasks = multitask ? opt.classes : 1;
    const Index block = opt.block > 0 ? opt.block : std::max<Index>(1, p / 10);

    // Piecewise-constant, block-sparse truth; one column per task.
    Vector truth = Vector::Zero(p * tasks);
    for (Index start = 0; start < p; start += block) {
        const bool zero = uniform(rng) < opt.sparsity;
        for (Index t = 0; t < tasks; ++t) {
            const double level = normal(rng);
            if (zero) continue;
            for (Index j = start; j < std::min(p, start + block); ++j) truth[t * p + j] = level;
        }
    }
    for (Index t = 0; t < tasks; ++t) {
        auto col = truth.segment(t * p, p);
        const double nrm = col.norm();
        if (nrm > 0.0) col *= 2.0 / nrm;
    }

    const double innovation = std::sqrt(1.0 - opt.correlation * opt.correlation);
    std::vector<SparseMatrix::Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(static_cast<double>(n * p) * opt.density) + 16);
    std::vector<double> labels(static_cast<std::size_t>(n));
    Vector row_margin(tasks);
    for (Index i = 0; i < n; ++i) {
        row_margin.setZero();
        double prev = 0.0;
        for (Index j = 0; j < p; ++j) {
            if (opt.correlation > 0.0) {
                // AR(1) across neighbouring columns, unit marginal variance.
                prev = j == 0 ? normal(rng) : opt.correlation * prev + innovation * normal(rng);
            }
            if (opt.density < 1.0 && uniform(rng) >= opt.density) continue;
            const double a = opt.correlation > 0.0 ? prev : normal(rng);
            triplets.push_back({i, j, a});
            for (Index t = 0; t < tasks; ++t) row_margin[t] += a * truth[t * p + j];
        }
        double label = 0.0;
        if (least_squares) {
            label = row_margin[0] + 0.1 * normal(rng);
        } else if (multitask) {
            Index best = 0;
            double best_score = -1e300;
            for (Index t = 0; t < tasks; ++t) {
                const double gumbel = -std::log(-std::log(std::max(uniform(rng), 1e-300)));
                const double score = row_margin[t] + gumbel;
                if (score > best_score) {
                    best_score = score;
                    best = t;
                }
            }
            label = static_cast<double>(best + 1);
        } else {
            const double prob = 1.0 / (1.0 + std::exp(-row_margin[0]));
            label = uniform(rng) < prob ? 1.0 : -1.0;
        }
        labels[static_cast<std::size_t>(i)] = label;
    }
    return {{SparseMatrix::from_triplets(n, p, std::move(triplets)), std::move(labels)}, std::move(truth)};
}

void write_trace_csv(std::ostream& out, const SolveTrace& trace) {
    out << "iter,objective,step,inner_iters,epochs,seconds,sigma,beta\n";
    for (const auto& r : trace.records) {
        out << r.iter << ',' << format_double(r.objective) << ',' << format_double(r.step) << ','
            << r.inner_iters << ',' << r.epochs << ',' << format_double(r.seconds) << ','
            << format_double(r.sigma) << ',' << format_double(r.beta) << '\n';
    }
}

void write_vector(std::ostream& out, const Vector& x) {
    for (Index i = 0; i < x.size(); ++i) out << format_double(x[i]) << '\n';
}

Vector read_vector(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        values.push_back(parse_real(t, "<vector>", line_no));
    }
    return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace sepqn
