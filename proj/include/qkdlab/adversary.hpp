#pragma once

// Eve's channel programs: the round-1 entangler, the compensating four-round
// cycle (S2), the naive no-compensation strategy (S1), and a fully
// parametrized two-qubit unitary attack used by the feasibility search.

#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qkdlab/qstate.hpp"
#include "qkdlab/rng.hpp"

namespace qkdlab {

enum class StrategyKind { None, S1, S2, Parametrized };

inline const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::None: return "none";
        case StrategyKind::S1: return "s1";
        case StrategyKind::S2: return "s2";
        case StrategyKind::Parametrized: return "parametrized";
    }
    return "?";
}

// 16 real parameters of a Hermitian generator H; the attack unitary is
// U = exp(i*H), unitary by construction.
struct UnitaryParams {
    std::array<double, 16> values{};

    Eigen::Matrix4cd generator() const {
        Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
        for (int i = 0; i < 4; ++i) h(i, i) = values[static_cast<std::size_t>(i)];
        int k = 4;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                const Amplitude z{values[static_cast<std::size_t>(k)],
                                  values[static_cast<std::size_t>(k + 1)]};
                h(i, j) = z;
                h(j, i) = std::conj(z);
                k += 2;
            }
        return h;
    }

    Eigen::Matrix4cd to_unitary() const {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(generator());
        const Eigen::Vector4d ev = solver.eigenvalues();
        Eigen::Vector4cd phases;
        for (int i = 0; i < 4; ++i)
            phases(i) = std::exp(Amplitude{0.0, ev(i)});
        const Eigen::Matrix4cd u =
            solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
        if ((u.adjoint() * u - Eigen::Matrix4cd::Identity()).cwiseAbs().maxCoeff() > 1e-10)
            throw InternalError("reconstructed attack matrix is not unitary");
        return u;
    }
};

struct Strategy {
    StrategyKind kind = StrategyKind::None;
    UnitaryParams params{};

    static Strategy none() { return {StrategyKind::None, {}}; }
    static Strategy s1() { return {StrategyKind::S1, {}}; }
    static Strategy s2() { return {StrategyKind::S2, {}}; }
    static Strategy parametrized(UnitaryParams p) { return {StrategyKind::Parametrized, p}; }

    bool attacking() const { return kind != StrategyKind::None; }
};

// Primitive steps of Eve's per-round channel program, acting on the in-flight
// carrier and her ancilla.
enum class ChannelStep {
    CnotCarrierToAncilla,  // round-1 entangler
    CnotAncillaToCarrier,
    FlipCarrier,
    MeasureCarrier,        // extraction; the result is recorded
    ApplyUnitary,          // parametrized attack
};

// Whether Eve compensates the bilateral rotation on her ancilla this round.
inline bool rotates_ancilla(const Strategy& strategy, int round) {
    if (round < 2) return false;
    return strategy.kind == StrategyKind::S2 || strategy.kind == StrategyKind::Parametrized;
}

inline bool is_extraction_round(const Strategy& strategy, int round) {
    switch (strategy.kind) {
        case StrategyKind::S1: return round >= 2;
        case StrategyKind::S2: return round >= 3 && ((round - 2) % 4 == 1 || (round - 2) % 4 == 3);
        default: return false;
    }
}

// The per-round program. Round 1 entangles the ancilla; afterwards S2 cycles
// pass-through / extract / flip-pass-through / extract while S1 extracts
// every round. A parametrized attack applies its unitary in every round
// (round 1 included), so the identity parameters reproduce the honest
// channel exactly.
inline std::vector<ChannelStep> channel_steps(const Strategy& strategy, int round) {
    using enum ChannelStep;
    if (!strategy.attacking()) return {};
    if (strategy.kind == StrategyKind::Parametrized) return {ApplyUnitary};
    if (round == 1) return {CnotCarrierToAncilla};
    switch (strategy.kind) {
        case StrategyKind::S1:
            return {CnotAncillaToCarrier, MeasureCarrier, CnotAncillaToCarrier};
        case StrategyKind::S2:
            switch ((round - 2) % 4) {
                case 0: return {CnotAncillaToCarrier};
                case 1: return {CnotAncillaToCarrier, MeasureCarrier, CnotAncillaToCarrier};
                case 2: return {FlipCarrier, CnotAncillaToCarrier};
                default: return {CnotAncillaToCarrier, MeasureCarrier, CnotAncillaToCarrier};
            }
        case StrategyKind::Parametrized:
            return {ApplyUnitary};
        default:
            return {};
    }
}

struct EveState {
    Strategy strategy{};
    int round = 0;
    std::string ancilla_label = "E";
    std::vector<std::pair<int, int>> records;  // (round, measured bit)
};

// Called once per round right after Alice and Bob's rotations.
inline void on_rotation(EveState& eve, StateVector& state, int round, double theta) {
    if (rotates_ancilla(eve.strategy, round))
        state.apply_rotation(eve.ancilla_label, theta);
}

// Executes Eve's program on the in-flight carrier (between Alice's encode
// CNOT and Bob's decode CNOT). Returns the measured bit on extraction rounds.
inline std::optional<int> on_channel(EveState& eve, StateVector& state, int round,
                                     const std::string& carrier, Rng& rng) {
    eve.round = round;
    if (!state.layout().contains(carrier))
        throw InvariantError("channel program invoked without an in-flight carrier");
    std::optional<int> measured;
    for (const ChannelStep step : channel_steps(eve.strategy, round)) {
        switch (step) {
            case ChannelStep::CnotCarrierToAncilla:
                state.apply_cnot(carrier, eve.ancilla_label);
                break;
            case ChannelStep::CnotAncillaToCarrier:
                state.apply_cnot(eve.ancilla_label, carrier);
                break;
            case ChannelStep::FlipCarrier:
                state.apply_x(carrier);
                break;
            case ChannelStep::MeasureCarrier:
                measured = state.measure_z(carrier, rng);
                break;
            case ChannelStep::ApplyUnitary:
                state.apply_unitary2(carrier, eve.ancilla_label,
                                     eve.strategy.params.to_unitary());
                break;
        }
    }
    if (measured)
        eve.records.emplace_back(round, *measured);
    return measured;
}

struct KeyInference {
    // One candidate per first-key-bit hypothesis; '?' marks unknown rounds.
    std::array<std::string, 2> candidate_keys;
    std::optional<std::string> resolved;
    double accuracy = 0.0;
};

// Decodes Eve's XOR records under both hypotheses for the first key bit. A
// publicly leaked check bit that lands on a recorded round (or on round 1)
// pins the hypothesis; accuracy is the fraction of key bits Eve then knows
// exactly (resolved records plus leaked bits), checked against the true key.
inline KeyInference infer_key(const std::vector<std::pair<int, int>>& records,
                              const std::vector<std::pair<int, int>>& leaked_bits,
                              const std::vector<int>& true_key) {
    const int rounds = static_cast<int>(true_key.size());
    KeyInference out;
    for (int h = 0; h < 2; ++h) {
        std::string cand(static_cast<std::size_t>(rounds), '?');
        if (rounds > 0) cand[0] = static_cast<char>('0' + h);
        for (const auto& [r, b] : records)
            cand[static_cast<std::size_t>(r - 1)] = static_cast<char>('0' + (b ^ h));
        out.candidate_keys[static_cast<std::size_t>(h)] = std::move(cand);
    }

    std::optional<int> first_bit;
    for (const auto& [r, v] : leaked_bits) {
        if (r == 1) {
            first_bit = v;
            break;
        }
        for (const auto& [rr, b] : records)
            if (rr == r) {
                first_bit = b ^ v;
                break;
            }
        if (first_bit) break;
    }

    std::set<int> known_rounds;
    std::vector<int> inferred(static_cast<std::size_t>(rounds), -1);
    if (first_bit) {
        for (const auto& [r, b] : records) {
            known_rounds.insert(r);
            inferred[static_cast<std::size_t>(r - 1)] = b ^ *first_bit;
        }
    }
    for (const auto& [r, v] : leaked_bits) {
        known_rounds.insert(r);
        inferred[static_cast<std::size_t>(r - 1)] = v;
    }

    if (first_bit) {
        std::string resolved = out.candidate_keys[static_cast<std::size_t>(*first_bit)];
        for (const auto& [r, v] : leaked_bits)
            resolved[static_cast<std::size_t>(r - 1)] = static_cast<char>('0' + v);
        out.resolved = std::move(resolved);
    }

    int correct = 0;
    for (const int r : known_rounds)
        if (inferred[static_cast<std::size_t>(r - 1)] == true_key[static_cast<std::size_t>(r - 1)])
            ++correct;
    out.accuracy = rounds > 0 ? static_cast<double>(correct) / rounds : 0.0;
    return out;
}

} // namespace qkdlab
