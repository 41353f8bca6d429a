#include "rankcal/randomization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rankcal/rng.hpp"

namespace rankcal {

namespace {

enum StreamTag : std::uint64_t { kSimpleStream = 1, kBlockStream = 2, kMinimizationStream = 3 };

void validate_pi(const std::vector<double>& pi) {
    if (pi.size() < 2) throw ValidationError("randomization needs at least two arms");
    double total = 0.0;
    for (double p : pi) {
        if (!(p > 0.0) || !std::isfinite(p)) throw ValidationError("allocation proportions must be positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("allocation proportions must sum to 1");
}

std::vector<int> block_shares(const RandomizationScheme& scheme) {
    if (scheme.block_size <= 0) throw ValidationError("block size must be positive");
    std::vector<int> shares;
    for (std::size_t j = 0; j < scheme.pi.size(); ++j) {
        const double share = scheme.block_size * scheme.pi[j];
        const double rounded = std::round(share);
        if (std::abs(share - rounded) > 1e-9 || rounded < 1.0)
            throw ValidationError("block size " + std::to_string(scheme.block_size) + " gives arm " +
                                  std::to_string(j + 1) + " a non-integral share " + std::to_string(share));
        shares.push_back(static_cast<int>(rounded));
    }
    return shares;
}

std::size_t uniform_index(std::size_t n, Engine& engine) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine);
}

}  // namespace

const char* to_string(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::simple: return "simple";
        case SchemeKind::stratified_block: return "stratified_block";
        case SchemeKind::minimization: return "minimization";
    }
    return "unknown";
}

void validate_scheme(const RandomizationScheme& scheme) {
    validate_pi(scheme.pi);
    if (scheme.kind == SchemeKind::stratified_block) block_shares(scheme);
    if (scheme.kind == SchemeKind::minimization) {
        const double p = scheme.minimization.p_mz;
        if (!(p > 0.5 && p <= 1.0)) throw ValidationError("minimization coin probability must lie in (0.5, 1]");
        for (double w : scheme.minimization.factor_weights)
            if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("factor weights must be non-negative");
    }
}

std::vector<Arm> assign_simple(std::size_t n, const RandomizationScheme& scheme) {
    validate_pi(scheme.pi);
    Engine engine = make_engine(scheme.seed, {kSimpleStream});
    std::discrete_distribution<int> draw(scheme.pi.begin(), scheme.pi.end());
    std::vector<Arm> out(n);
    for (auto& a : out) a = draw(engine) + 1;
    return out;
}

std::vector<Arm> assign_stratified_block(std::span<const int> strata, const RandomizationScheme& scheme) {
    validate_pi(scheme.pi);
    const std::vector<int> shares = block_shares(scheme);

    struct StratumStream {
        Engine engine;
        std::vector<Arm> block;
        std::size_t next = 0;
    };
    std::map<int, StratumStream> streams;

    std::vector<Arm> out;
    out.reserve(strata.size());
    for (int z : strata) {
        auto it = streams.find(z);
        if (it == streams.end()) {
            const auto id = static_cast<std::uint64_t>(static_cast<std::int64_t>(z));
            it = streams.emplace(z, StratumStream{make_engine(scheme.seed, {kBlockStream, id}), {}, 0}).first;
        }
        StratumStream& s = it->second;
        if (s.next == s.block.size()) {
            s.block.clear();
            for (std::size_t j = 0; j < shares.size(); ++j) s.block.insert(s.block.end(), shares[j], static_cast<Arm>(j + 1));
            std::shuffle(s.block.begin(), s.block.end(), s.engine);
            s.next = 0;
        }
        out.push_back(s.block[s.next++]);
    }
    return out;
}

std::vector<Arm> assign_minimization(std::span<const std::vector<int>> levels, const RandomizationScheme& scheme) {
    validate_scheme(RandomizationScheme{SchemeKind::minimization, scheme.pi, 0, scheme.minimization, scheme.seed});
    if (levels.empty()) return {};
    const std::size_t factors = levels.front().size();
    if (factors == 0) throw ValidationError("minimization needs at least one factor");
    std::vector<double> weights = scheme.minimization.factor_weights;
    if (weights.empty()) weights.assign(factors, 1.0);
    if (weights.size() != factors) throw ValidationError("one weight per minimization factor is required");

    const std::size_t J = scheme.pi.size();
    // factor -> level -> per-arm counts
    std::vector<std::map<int, std::vector<double>>> counts(factors);
    Engine engine = make_engine(scheme.seed, {kMinimizationStream});
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    std::vector<Arm> out;
    out.reserve(levels.size());
    std::vector<double> imbalance(J);
    std::vector<double> scaled(J);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i].size() != factors)
            throw ValidationError("unit " + std::to_string(i) + " has " + std::to_string(levels[i].size()) +
                                  " factor levels, expected " + std::to_string(factors));
        std::vector<std::vector<double>*> rows(factors);
        for (std::size_t f = 0; f < factors; ++f) {
            auto& row = counts[f][levels[i][f]];
            if (row.empty()) row.assign(J, 0.0);
            rows[f] = &row;
        }
        for (std::size_t a = 0; a < J; ++a) {
            double total = 0.0;
            for (std::size_t f = 0; f < factors; ++f) {
                for (std::size_t j = 0; j < J; ++j) scaled[j] = ((*rows[f])[j] + (j == a ? 1.0 : 0.0)) / scheme.pi[j];
                const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
                total += weights[f] * (*hi - *lo);
            }
            imbalance[a] = total;
        }
        const double best = *std::min_element(imbalance.begin(), imbalance.end());
        const double tol = 1e-12 * std::max(1.0, std::abs(best));
        std::vector<std::size_t> minimizers;
        std::vector<std::size_t> others;
        for (std::size_t a = 0; a < J; ++a) (imbalance[a] <= best + tol ? minimizers : others).push_back(a);

        std::size_t chosen;
        if (others.empty()) {
            chosen = minimizers[uniform_index(J, engine)];
        } else if (coin(engine) < scheme.minimization.p_mz) {
            chosen = minimizers[uniform_index(minimizers.size(), engine)];
        } else {
            chosen = others[uniform_index(others.size(), engine)];
        }
        for (std::size_t f = 0; f < factors; ++f) (*rows[f])[chosen] += 1.0;
        out.push_back(static_cast<Arm>(chosen + 1));
    }
    return out;
}

BalanceDiagnostic balance_report(std::span<const Arm> assignments, std::span<const int> strata,
                                 std::span<const double> pi) {
    if (assignments.size() != strata.size()) throw ValidationError("assignment and stratum vectors differ in length");
    const std::size_t J = pi.size();
    BalanceDiagnostic d;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const Arm a = assignments[i];
        if (a < 1 || static_cast<std::size_t>(a) > J) throw ValidationError("label out of range in assignments");
        auto& row = d.counts[strata[i]];
        if (row.empty()) row.assign(J, 0);
        ++row[static_cast<std::size_t>(a - 1)];
        ++d.stratum_sizes[strata[i]];
    }
    for (const auto& [z, row] : d.counts) {
        const double nz = static_cast<double>(d.stratum_sizes[z]);
        for (std::size_t j = 0; j < J; ++j)
            d.max_deviation = std::max(d.max_deviation, std::abs(static_cast<double>(row[j]) / nz - pi[j]));
    }
    return d;
}

std::vector<int> joint_levels(std::span<const std::vector<int>> levels) {
    std::map<std::vector<int>, int> codes;
    std::vector<int> out;
    out.reserve(levels.size());
    for (const auto& tuple : levels) out.push_back(codes.emplace(tuple, static_cast<int>(codes.size())).first->second);
    return out;
}

}  // namespace rankcal
