#pragma once

// The quantum-encryption QKD session state machine: per-round rotation,
// encode, channel (with the adversary hook), decode, and the public
// check-bit detection phase.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkdlab/adversary.hpp"
#include "qkdlab/qstate.hpp"
#include "qkdlab/rng.hpp"

namespace qkdlab {

inline const std::string kAliceLabel = "A";
inline const std::string kBobLabel = "B";
inline const std::string kCarrierLabel = "C";

enum class MeasureMode { Exact, Sampled };

struct ProtocolConfig {
    double theta = M_PI / 4;
    int rounds = 1;
    double check_fraction = 0.0;
    std::uint64_t seed = 0;
    MeasureMode mode = MeasureMode::Sampled;
    Strategy strategy{};

    void validate() const {
        if (rounds < 1) throw ConfigError("rounds must be >= 1");
        if (!(check_fraction >= 0.0 && check_fraction < 1.0))
            throw ConfigError("check_fraction must lie in [0, 1)");
        if (!std::isfinite(theta)) throw ConfigError("theta must be finite");
    }
};

struct RoundTranscript {
    int index = 0;   // 1-based
    int sent = 0;
    int received = 0;
    bool error = false;  // sent XOR received
    std::optional<std::pair<int, int>> eve_record;  // (round, bit)
};

struct DetectionReport {
    std::vector<int> check_indices;              // 1-based round numbers
    int mismatches = 0;
    std::vector<std::pair<int, int>> leaked_bits;  // (round, published key bit)
};

struct SessionResult {
    std::vector<RoundTranscript> transcripts;
    double qber = 0.0;
    std::vector<std::pair<int, int>> eve_records;
    std::optional<DetectionReport> detection;
};

// One reused entangled pair, processed strictly sequentially. Sessions always
// sample measurements; exact per-round disturbance lives in the analysis
// module.
class Session {
public:
    explicit Session(ProtocolConfig config)
        : cfg_(std::move(config)),
          state_(StateVector::bell_pair(kAliceLabel, kBobLabel)),
          rng_(cfg_.seed, 0) {
        cfg_.validate();
        eve_.strategy = cfg_.strategy;
        if (eve_.strategy.attacking())
            state_.attach_qubit(eve_.ancilla_label, 0);
    }

    RoundTranscript run_round(int key_bit) {
        if (key_bit != 0 && key_bit != 1) throw ConfigError("key bit must be 0 or 1");
        ++round_;
        if (!first_key_bit_) first_key_bit_ = key_bit;

        state_.apply_rotation(kAliceLabel, cfg_.theta);
        state_.apply_rotation(kBobLabel, cfg_.theta);
        on_rotation(eve_, state_, round_, cfg_.theta);

        // Carrier slot sits between Bob's half and Eve's ancilla: (A,B,C[,E]).
        state_.attach_qubit_at(2, kCarrierLabel, key_bit);
        state_.apply_cnot(kAliceLabel, kCarrierLabel);

        const auto measured = on_channel(eve_, state_, round_, kCarrierLabel, rng_);

        state_.apply_cnot(kBobLabel, kCarrierLabel);
        const int received = state_.measure_z(kCarrierLabel, rng_);
        state_.discard_qubit(kCarrierLabel);

        RoundTranscript t;
        t.index = round_;
        t.sent = key_bit;
        t.received = received;
        t.error = key_bit != received;
        if (measured) t.eve_record = std::make_pair(round_, *measured);
        return t;
    }

    const ProtocolConfig& config() const { return cfg_; }
    const StateVector& joint_state() const { return state_; }
    const EveState& eve() const { return eve_; }
    int rounds_run() const { return round_; }
    std::optional<int> first_key_bit() const { return first_key_bit_; }

private:
    ProtocolConfig cfg_;
    StateVector state_;
    EveState eve_;
    Rng rng_;
    int round_ = 0;
    std::optional<int> first_key_bit_;
};

// Publicly compares ceil(check_fraction * rounds) key bits chosen uniformly
// without replacement; the published (round, bit) pairs are what Eve sees.
inline DetectionReport detection_phase(const SessionResult& result, double check_fraction,
                                       Rng& rng) {
    DetectionReport report;
    const int rounds = static_cast<int>(result.transcripts.size());
    const int count = static_cast<int>(std::ceil(check_fraction * rounds));
    if (count == 0) return report;
    for (const int idx0 : rng.sample_indices(rounds, count))
        report.check_indices.push_back(idx0 + 1);
    for (const int idx : report.check_indices) {
        const auto& t = result.transcripts[static_cast<std::size_t>(idx - 1)];
        if (t.error) ++report.mismatches;
        report.leaked_bits.emplace_back(idx, t.sent);
    }
    return report;
}

inline SessionResult run_session(const ProtocolConfig& config, const std::vector<int>& key_bits) {
    config.validate();
    if (static_cast<int>(key_bits.size()) != config.rounds)
        throw ConfigError("key length must equal the round count");
    Session session(config);
    SessionResult result;
    int errors = 0;
    for (const int bit : key_bits) {
        RoundTranscript t = session.run_round(bit);
        if (t.error) ++errors;
        if (t.eve_record) result.eve_records.push_back(*t.eve_record);
        result.transcripts.push_back(std::move(t));
    }
    result.qber = static_cast<double>(errors) / config.rounds;
    Rng detection_rng(config.seed, 1);
    result.detection = detection_phase(result, config.check_fraction, detection_rng);
    return result;
}

} // namespace qkdlab
